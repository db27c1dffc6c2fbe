#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "mmhs/emotion_mtl.hpp"
#include "mmhs/fusion_mml.hpp"

namespace mmhs::io {

inline constexpr int kCheckpointVersion = 1;

// JSON document: format_version, model_kind ("mtl" | "fusion"), layer_sizes
// ([in, out] per layer),
// activations, scaler {min, max}, hyperparameters, layers [{weights, biases}].
// Numbers are single precision and print with at most 9 significant digits.
std::string mtl_checkpoint_json(const emotion::MtlModel& model);
emotion::MtlModel parse_mtl_checkpoint(std::string_view json, const std::string& source = "<checkpoint>");

std::string fusion_checkpoint_json(const fusion::FusionModel& model);
fusion::FusionModel parse_fusion_checkpoint(std::string_view json, const std::string& source = "<checkpoint>");

void save_checkpoint(const std::filesystem::path& path, const emotion::MtlModel& model);
void save_checkpoint(const std::filesystem::path& path, const fusion::FusionModel& model);
emotion::MtlModel load_mtl_checkpoint(const std::filesystem::path& path);
fusion::FusionModel load_fusion_checkpoint(const std::filesystem::path& path);

// Reads only the model_kind field.
std::string checkpoint_kind(const std::filesystem::path& path);

}  // namespace mmhs::io
