#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tabattn/numerics.hpp"

namespace tabattn {

enum class FeatureKind { Numerical, Categorical, Binary };

std::string_view to_string(FeatureKind kind) noexcept;
FeatureKind parse_feature_kind(std::string_view text);

struct FeatureDescriptor {
  std::string name;
  FeatureKind kind = FeatureKind::Numerical;
  std::vector<std::string> categories;  // categorical only
  std::string unit;

  /// Rows of the embedding table backing this feature; 0 for numerical.
  std::size_t cardinality() const noexcept;

  bool operator==(const FeatureDescriptor&) const = default;
};

/// Ordered feature declaration. Feature order is the column order of CSV
/// files, embeddings, attention vectors and every export.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  /// Validates unique names and categorical cardinality >= 2.
  FeatureSchema(std::vector<FeatureDescriptor> features, std::string label_name);

  /// 5 numerical, 6 categorical and 12 binary variables of the bladder cancer
  /// recurrence cohort. Names not published with the cohort are placeholders.
  static FeatureSchema default_schema();

  static FeatureSchema from_json(std::string_view text);
  static FeatureSchema load(const std::filesystem::path& path);
  std::string to_json() const;

  const std::vector<FeatureDescriptor>& features() const noexcept { return features_; }
  const FeatureDescriptor& feature(std::size_t i) const { return features_.at(i); }
  std::size_t size() const noexcept { return features_.size(); }
  const std::string& label_name() const noexcept { return label_name_; }

  std::optional<std::size_t> index_of(std::string_view name) const;
  /// Position of feature `i` among the features of its own kind.
  std::size_t slot(std::size_t i) const { return slots_.at(i); }
  std::size_t count(FeatureKind kind) const noexcept;
  std::vector<std::string> names() const;

  bool operator==(const FeatureSchema& other) const {
    return features_ == other.features_ && label_name_ == other.label_name_;
  }

 private:
  std::vector<FeatureDescriptor> features_;
  std::string label_name_ = "label";
  std::vector<std::size_t> slots_;
};

inline constexpr int kMissingIndex = -1;

/// One patient record. Values are grouped by kind and indexed by
/// FeatureSchema::slot. Missing markers: NaN for numerical, kMissingIndex
/// otherwise.
struct Sample {
  std::vector<double> numerical;
  std::vector<int> categorical;
  std::vector<int> binary;
  int label = 0;  // 1 = recurrence
  bool synthetic = false;

  bool has_missing() const noexcept;
  bool operator==(const Sample&) const;
};

struct Cohort {
  FeatureSchema schema;
  std::vector<Sample> samples;
  std::string provenance = "raw";

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::size_t count_label(int label) const noexcept;
  /// Throws Schema error when a sample does not match the schema layout or
  /// holds an out-of-range category index.
  void validate() const;
};

Sample make_empty_sample(const FeatureSchema& schema);

// ---------------------------------------------------------------- CSV ----

Cohort parse_csv(std::istream& in, const FeatureSchema& schema);
Cohort load_csv(const std::filesystem::path& path, const FeatureSchema& schema);
void write_csv(std::ostream& out, const Cohort& cohort);
void save_csv(const std::filesystem::path& path, const Cohort& cohort);

// ---------------------------------------------------------- cleaning ----

/// Drops every sample with at least one missing value; survivors keep order.
Cohort listwise_delete(const Cohort& cohort);

/// Per-numerical-feature mean and population standard deviation.
struct ScalerStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool operator==(const ScalerStats&) const = default;
};

struct Standardized {
  Cohort cohort;
  ScalerStats stats;
};

/// Maps numerical values to (x - mean) / stddev. A zero-variance column maps
/// to 0. When `stats` is given it is applied unchanged.
Standardized standardize(const Cohort& cohort,
                         const std::optional<ScalerStats>& stats = std::nullopt);
Cohort destandardize(const Cohort& cohort, const ScalerStats& stats);

/// Removes samples whose standardized numerical |z| exceeds the threshold.
Cohort remove_outliers(const Cohort& cohort, double z_threshold = 3.0);

// ------------------------------------------------------------- SMOTE ----

struct SyntheticOrigin {
  std::size_t base = 0;      // index into the input cohort
  std::size_t neighbor = 0;  // index into the input cohort
  double gap = 0.0;          // interpolation factor in [0, 1]
};

struct SmoteResult {
  Cohort cohort;
  /// One entry per synthetic sample, in the order they were appended.
  std::vector<SyntheticOrigin> origins;
};

/// SMOTE-NC oversampling of the minority class until both classes have equal
/// counts. Numerical values are interpolated; categorical and binary values
/// take the majority among the k neighbours, ties going to the base value.
SmoteResult smote_traced(const Cohort& cohort, std::size_t k_neighbors, RandomSource& rng);
Cohort smote(const Cohort& cohort, std::size_t k_neighbors, RandomSource& rng);

/// Squared mixed-type distance used by SMOTE: squared Euclidean over
/// numerical values plus 1 per differing categorical or binary value.
double mixed_distance_sq(const Sample& a, const Sample& b);

// ------------------------------------------------------------- split ----

struct Split {
  Cohort train;
  Cohort validation;
};

/// Per-class shuffled split; each part keeps the cohort's relative order.
Split stratified_split(const Cohort& cohort, double val_fraction, RandomSource& rng);

// --------------------------------------------------------- generator ----

struct PlantedEffect {
  std::string feature;
  double weight = 0.0;
};

/// Interaction term -weight * c_a * c_b on centred values c in [-1, 1]; for
/// two binary features this is +weight exactly when they differ (XOR).
struct PlantedInteraction {
  std::string first;
  std::string second;
  double weight = 0.0;
};

struct PlantedSignal {
  std::vector<PlantedEffect> effects;
  std::optional<PlantedInteraction> interaction;
  double intercept = 0.0;
  double noise_stddev = 0.0;

  /// SurgicalTime main effect plus a Gender x PTA XOR interaction.
  static PlantedSignal xor_interaction();
  /// No dependence between features and label.
  static PlantedSignal null_signal();

  std::vector<std::string> planted_features() const;
};

struct GeneratorSettings {
  std::size_t n = 296;
  double missing_rate = 0.0;
};

inline constexpr std::size_t kMinSyntheticCohort = 50;

struct SyntheticCohort {
  Cohort cohort;
  std::vector<std::string> planted_features;
  PlantedSignal signal;
};

/// Draws features from per-kind base distributions and labels from
/// Bernoulli(sigmoid(signal score + gaussian noise)).
SyntheticCohort generate_synthetic_cohort(const FeatureSchema& schema,
                                          const GeneratorSettings& settings,
                                          const PlantedSignal& planted, RandomSource& rng);

}  // namespace tabattn
