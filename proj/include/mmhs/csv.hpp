#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mmhs::io {

using CsvRow = std::vector<std::string>;

struct CsvTable {
  CsvRow header;
  std::vector<CsvRow> rows;
  std::vector<std::size_t> line_numbers;  // 1-based physical line where each row starts
};

// RFC 4180: quoted fields may hold commas, doubled quotes and newlines. CRLF and
// LF are both accepted. Blank lines are skipped.
CsvTable parse_csv(std::string_view text, const std::string& source = "<csv>");
CsvTable read_csv(const std::filesystem::path& path);

std::string csv_escape(std::string_view field);
std::string format_csv_row(const CsvRow& row);
std::string format_csv(const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// Shortest decimal that round-trips the double.
std::string format_double(double value);

}  // namespace mmhs::io
