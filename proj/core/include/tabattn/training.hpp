#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tabattn/data.hpp"
#include "tabattn/model.hpp"

namespace tabattn {

struct TrainConfig {
  std::size_t epochs = 250;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double val_fraction = 0.2;
  std::uint64_t seed = 42;
  double clamp_epsilon = kLossClampEpsilon;
  std::size_t patience = 0;  // early stopping on validation loss; 0 disables
  ModelConfig model;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
double bce_loss(std::span<const double> probabilities, std::span<const int> labels,
                double eps = kLossClampEpsilon);

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moments per tensor plus the step counter.
struct AdamState {
  std::vector<Vector> first;
  std::vector<Vector> second;
  std::size_t step = 0;
};

/// One bias-corrected Adam update. The state is sized lazily on first use and
/// must keep seeing tensors of the same shapes afterwards.
void adam_step(std::span<const TensorRef> params, std::span<const ConstTensorRef> grads,
               AdamState& state, const AdamSettings& settings);

struct ConfusionCounts {
  std::size_t true_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;

  std::size_t total() const noexcept {
    return true_positive + true_negative + false_positive + false_negative;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

struct Metrics {
  double accuracy = 0.0;
  double sensitivity = 0.0;  // 0 when the cohort has no positives
  double specificity = 0.0;  // 0 when the cohort has no negatives
  double loss = 0.0;
  ConfusionCounts confusion;
};

inline constexpr double kDecisionThreshold = 0.5;

/// Class 1 iff p >= 0.5.
Metrics metrics_from_predictions(std::span<const double> probabilities, std::span<const int> labels,
                                 double clamp_eps = kLossClampEpsilon);

/// Infer-mode probabilities for an already standardized cohort.
Vector predict(const ModelParams& params, const Cohort& cohort);

/// Metrics on an already standardized cohort.
Metrics evaluate(const ModelParams& params, const Cohort& cohort);
/// Standardizes `raw` with the training statistics first.
Metrics evaluate(const ModelParams& params, const ScalerStats& stats, const Cohort& raw);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainReport {
  std::string model_kind;  // attention, mean-pool or logistic
  std::vector<EpochRecord> epochs;
  Metrics final_train;
  Metrics final_validation;
  double wall_seconds = 0.0;
  TrainConfig config;
  std::uint64_t seed = 0;
};

/// Per-epoch rows: epoch,train_loss,train_acc,val_loss,val_acc.
void write_curves_csv(std::ostream& out, const TrainReport& report);
void save_curves_csv(const std::filesystem::path& path, const TrainReport& report);

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

/// Seeded minibatch Adam on mean BCE. Both cohorts must already be
/// standardized with the same statistics. Metrics after each epoch are
/// computed in infer mode. Returns the final-epoch parameters.
TrainResult train(const Cohort& train_cohort, const Cohort& val_cohort, const TrainConfig& config);

// ------------------------------------------------- logistic baseline ----

/// Standardized numerical values, one-hot categoricals, binary flags as 0/1.
Vector encode_linear_features(const FeatureSchema& schema, const Sample& sample);
std::size_t linear_feature_width(const FeatureSchema& schema);

struct LogisticModel {
  FeatureSchema schema;
  Vector weights;
  Vector bias = Vector(1, 0.0);
};

Vector predict(const LogisticModel& model, const Cohort& cohort);
Metrics evaluate(const LogisticModel& model, const Cohort& cohort);

struct BaselineResult {
  LogisticModel model;
  TrainReport report;
};

/// Single affine layer + sigmoid trained with the same loss, optimizer,
/// batching and epoch budget as `train`.
BaselineResult train_logistic_baseline(const Cohort& train_cohort, const Cohort& val_cohort,
                                       const TrainConfig& config);

}  // namespace tabattn
