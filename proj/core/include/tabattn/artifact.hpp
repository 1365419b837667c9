#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>

#include "tabattn/data.hpp"
#include "tabattn/model.hpp"
#include "tabattn/training.hpp"

namespace tabattn {

inline constexpr int kArtifactFormatVersion = 1;

/// Everything needed to reproduce predictions: schema, training scaler
/// statistics, trained parameters and the configuration that produced them.
struct ModelArtifact {
  int format_version = kArtifactFormatVersion;
  FeatureSchema schema;
  ScalerStats stats;
  TrainConfig config;
  std::string created;  // ISO-8601 UTC; excluded from determinism comparisons
  std::variant<ModelParams, LogisticModel> model;

  std::string model_kind() const;
};

std::string artifact_to_json(const ModelArtifact& artifact);
/// Throws Version error on an unknown format version, Format error on
/// malformed or truncated text, Shape error on inconsistent tensors.
ModelArtifact artifact_from_json(std::string_view text);

void save_artifact(const std::filesystem::path& path, const ModelArtifact& artifact);
ModelArtifact load_artifact(const std::filesystem::path& path);

std::string utc_timestamp();

}  // namespace tabattn
