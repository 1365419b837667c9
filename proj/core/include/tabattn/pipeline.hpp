#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "tabattn/data.hpp"

namespace tabattn {

enum class SmoteMode {
  FullCohort,  // oversample before splitting (reproduces 296 -> 356); leaks into validation
  TrainOnly,   // split first, oversample the training part only
};

std::string_view to_string(SmoteMode mode) noexcept;
SmoteMode parse_smote_mode(std::string_view text);

struct PipelineSettings {
  double z_threshold = 3.0;
  std::size_t smote_k = 5;
  SmoteMode smote_mode = SmoteMode::FullCohort;
  double val_fraction = 0.2;
  std::uint64_t seed = 42;
};

struct PreparedData {
  Cohort train;       // standardized
  Cohort validation;  // standardized
  ScalerStats stats;
  std::size_t raw_count = 0;
  std::size_t cleaned_count = 0;
  std::size_t inlier_count = 0;
  std::size_t balanced_count = 0;  // size of the cohort SMOTE produced
};

/// listwise deletion -> standardize -> outlier removal -> SMOTE and split in
/// the configured order. Errors are re-thrown with the failing stage named.
PreparedData prepare_cohort(const Cohort& raw, const PipelineSettings& settings);

}  // namespace tabattn
