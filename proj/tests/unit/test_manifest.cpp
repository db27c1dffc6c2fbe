#include <gtest/gtest.h>

#include <map>

#include "mmhs/csv.hpp"
#include "mmhs/errors.hpp"
#include "mmhs/manifest.hpp"
#include "test_support.hpp"

using namespace mmhs;
using namespace mmhs::data;

namespace {

const char* kGood =
    "id,audio_path,transcript,label,split,valence,arousal,dominance\n"
    "a,audio/a.wav,\"hello, world\",0,train,0.1,0.2,0.3\n"
    "b,audio/b.wav,\"say \"\"hi\"\"\",1,val,0.4,0.5,0.6\n"
    "c,/abs/c.wav,plain,1,test,1,0,0.5\n";

std::string error_of(const std::string& text) {
  try {
    parse_manifest(text, "m.csv");
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST(Manifest, WellFormedFileParses) {
  const auto m = parse_manifest(kGood);
  ASSERT_EQ(m.records.size(), 3u);
  EXPECT_EQ(m.records[0].transcript, "hello, world");
  EXPECT_EQ(m.records[1].transcript, "say \"hi\"");
  EXPECT_EQ(m.records[1].label, 1);
  EXPECT_EQ(m.records[1].split, Split::Val);
  EXPECT_EQ(m.records[2].attributes->valence, 1.0);
  EXPECT_EQ(m.find("b")->id, "b");
  EXPECT_EQ(m.in_split(Split::Test).size(), 1u);
}

TEST(Manifest, AudioPathsResolveAgainstManifestDirectory) {
  mmhs::testing::TempDir dir("manifest");
  io::write_text_file(dir / "m.csv", kGood);
  const auto m = load_manifest(dir / "m.csv");
  EXPECT_EQ(m.audio_path(m.records[0]), dir.path() / "audio/a.wav");
  EXPECT_EQ(m.audio_path(m.records[2]), std::filesystem::path("/abs/c.wav"));
}

TEST(Manifest, EachMalformedRowCategoryIsRejected) {
  const std::string header = "id,audio_path,transcript,label,split\n";
  const std::string ok = "a,a.wav,t,0,train\n";

  try {
    parse_manifest("id,audio_path,label,split\na,a.wav,0,train\n", "m.csv");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_TRUE(contains(e.what(), "transcript")) << e.what();
  }

  auto msg = error_of(header + ok + "a,b.wav,t,1,test\n");
  EXPECT_TRUE(contains(msg, "duplicate id 'a'")) << msg;
  EXPECT_TRUE(contains(msg, "line 3")) << msg;

  msg = error_of(header + ok + "b,b.wav,t,2,test\n");
  EXPECT_TRUE(contains(msg, "line 3")) << msg;
  EXPECT_TRUE(contains(msg, "label")) << msg;

  msg = error_of(header + ok + "b,b.wav,t,1,holdout\n");
  EXPECT_TRUE(contains(msg, "line 3")) << msg;
  EXPECT_TRUE(contains(msg, "holdout")) << msg;

  msg = error_of(header + "a,a.wav,t,0\n");
  EXPECT_TRUE(contains(msg, "line 2")) << msg;

  msg = error_of(header + ",a.wav,t,0,train\n");
  EXPECT_TRUE(contains(msg, "empty id")) << msg;

  msg = error_of("id,audio_path,transcript,label,split,valence,arousal,dominance\na,a.wav,t,0,train,1.5,0,0\n");
  EXPECT_TRUE(contains(msg, "valence")) << msg;

  EXPECT_THROW(parse_manifest("id,audio_path,transcript,label,split\na,a.wav,\"open,0,train\n"), FormatError);
  EXPECT_THROW(parse_manifest(""), SchemaError);
}

TEST(Manifest, RoundTripIsLossless) {
  mmhs::testing::TempDir dir("manifest_rt");
  const auto first = parse_manifest(kGood);
  save_manifest(dir / "out.csv", first.records);
  const auto second = load_manifest(dir / "out.csv");
  ASSERT_EQ(second.records.size(), first.records.size());
  for (std::size_t i = 0; i < first.records.size(); ++i) {
    const auto& a = first.records[i];
    const auto& b = second.records[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.audio_path, b.audio_path);
    EXPECT_EQ(a.transcript, b.transcript);
    EXPECT_EQ(a.label, b.label);
    EXPECT_EQ(a.split, b.split);
    EXPECT_EQ(a.attributes->valence, b.attributes->valence);
    EXPECT_EQ(a.attributes->arousal, b.attributes->arousal);
    EXPECT_EQ(a.attributes->dominance, b.attributes->dominance);
  }
  EXPECT_EQ(format_manifest(second.records), format_manifest(first.records));
}

TEST(SplitDataset, RatiosAndDeterminism) {
  auto make = [](int n) {
    std::vector<ManifestRecord> r(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) r[static_cast<std::size_t>(i)].id = "r" + std::to_string(i);
    return r;
  };
  for (auto [n, train, val, test] : {std::tuple{1000, 800, 100, 100}, std::tuple{10, 8, 1, 1}, std::tuple{3, 3, 0, 0},
                                      std::tuple{25, 21, 2, 2}}) {
    const auto out = split_dataset(make(n), SplitRatios{}, 42);
    std::map<Split, int> count;
    for (const auto& r : out) ++count[*r.split];
    EXPECT_EQ(count[Split::Train], train) << n;
    EXPECT_EQ(count[Split::Val], val) << n;
    EXPECT_EQ(count[Split::Test], test) << n;
    for (int i = 0; i < n; ++i) EXPECT_EQ(out[static_cast<std::size_t>(i)].id, "r" + std::to_string(i));
  }
  const auto a = split_dataset(make(100), SplitRatios{}, 7);
  const auto b = split_dataset(make(100), SplitRatios{}, 7);
  const auto c = split_dataset(make(100), SplitRatios{}, 8);
  bool differs = false;
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(a[i].split, b[i].split);
    differs |= a[i].split != c[i].split;
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(split_dataset(make(2), SplitRatios{}, 1), ValidationError);
  EXPECT_THROW(split_dataset(make(10), SplitRatios{0.5, 0.1, 0.1}, 1), ValidationError);
}

TEST(Labels, OptionalSplitColumn) {
  const auto with = parse_labels("id,valence,arousal,dominance,split\nx,0.1,0.2,0.3,test\n", 1);
  EXPECT_EQ(with.records[0].split, Split::Test);
  EXPECT_EQ(with.records[0].attributes->arousal, 0.2);
  std::string text = "id,valence,arousal,dominance\n";
  for (int i = 0; i < 10; ++i) text += "r" + std::to_string(i) + ",0.5,0.5,0.5\n";
  const auto without = parse_labels(text, 3);
  EXPECT_EQ(without.in_split(Split::Train).size(), 8u);
  EXPECT_EQ(without.in_split(Split::Val).size(), 1u);
  EXPECT_THROW(parse_labels("id,valence,arousal\nx,0.1,0.2\n", 1), SchemaError);
  EXPECT_THROW(parse_labels("id,valence,arousal,dominance,split\nx,0.1,-0.2,0.3,test\n", 1), ValidationError);
}

TEST(Csv, QuotingAndRoundTrip) {
  const std::vector<std::string> row{"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  const auto line = io::format_csv_row(row);
  const auto table = io::parse_csv("h1,h2,h3,h4,h5\r\n" + line, "x");
  ASSERT_EQ(table.rows.size(), 1u);
  EXPECT_EQ(table.rows[0], row);
  EXPECT_EQ(io::parse_csv("\xEF\xBB\xBFid\nx\n", "bom").header[0], "id");
  EXPECT_THROW(io::parse_csv("a,b\nx\"y,z\n", "s"), FormatError);
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_EQ(std::stod(io::format_double(1.0 / 3.0)), 1.0 / 3.0);
}
