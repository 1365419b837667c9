#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tabattn/data.hpp"
#include "tabattn/numerics.hpp"

namespace tabattn {

enum class Pooling {
  Attention,  // h = sum_i alpha_i x_i with alpha = softmax(w . tanh(W x_i + b))
  MeanPool,   // ablation: alpha fixed at 1/n
};

std::string_view to_string(Pooling pooling) noexcept;
Pooling parse_pooling(std::string_view text);

struct ModelConfig {
  std::size_t dim = 8;        // embedding size d shared by every feature
  std::size_t attn_dim = 8;   // k, rows of the attention projection
  std::vector<std::size_t> hidden = {32, 16};
  double dropout = 0.3;
  double bn_momentum = 0.1;
  Pooling pooling = Pooling::Attention;

  /// Throws Parameter error on a zero dimension or an out-of-range rate.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kLossClampEpsilon = 1e-7;

struct EmbeddingTable {
  Matrix weights;  // cardinality x d
  std::size_t cardinality() const noexcept { return weights.rows(); }
  bool operator==(const EmbeddingTable&) const = default;
};

/// Numerical value v embeds as v * scale + offset.
struct NumericEmbedder {
  Vector scale;
  Vector offset;
  bool operator==(const NumericEmbedder&) const = default;
};

using FeatureEmbedder = std::variant<EmbeddingTable, NumericEmbedder>;

struct AttentionParams {
  Matrix projection;  // W, k x d
  Vector bias;        // b, k
  Vector context;     // w, k
  bool operator==(const AttentionParams&) const = default;
};

struct DenseLayer {
  Matrix weight;  // fan_in x fan_out
  Vector bias;
  bool operator==(const DenseLayer&) const = default;
};

struct BatchNorm {
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;
  bool operator==(const BatchNorm&) const = default;
};

struct MLPHead {
  std::vector<DenseLayer> hidden;
  std::vector<BatchNorm> norms;  // one per hidden layer
  DenseLayer output;             // last hidden width x 1
  double dropout = 0.0;
  double momentum = 0.1;
  bool operator==(const MLPHead&) const = default;
};

/// Named view over one trainable tensor.
struct TensorRef {
  std::string name;
  std::span<double> values;
};
struct ConstTensorRef {
  std::string name;
  std::span<const double> values;
};

struct ModelParams {
  FeatureSchema schema;
  ModelConfig config;
  std::vector<FeatureEmbedder> embedders;  // schema order
  AttentionParams attention;
  MLPHead head;

  /// Every trainable tensor in a fixed order. Batch-norm running statistics
  /// are state, not parameters, and are excluded.
  std::vector<TensorRef> tensors();
  std::vector<ConstTensorRef> tensors() const;
  std::size_t parameter_count() const;

  /// Same shapes, all entries zero.
  ModelParams zeros_like() const;

  bool operator==(const ModelParams&) const = default;
};

/// Gradient tree mirroring ModelParams.
using Gradients = ModelParams;

ModelParams init_params(const FeatureSchema& schema, const ModelConfig& config, RandomSource& rng);

/// n x d matrix of per-feature embeddings, rows in schema order.
Matrix embed_sample(const Sample& sample, const ModelParams& params);

struct AttentionResult {
  Vector pooled;  // h
  Vector alpha;
  Matrix activations;  // tanh(W x_i + b), n x k
};

AttentionResult attention_forward(const Matrix& embeddings, const AttentionParams& params);
AttentionResult mean_pool_forward(const Matrix& embeddings);

enum class Mode { Train, Infer };

struct MlpLayerCache {
  Matrix input;      // activations entering the affine map
  Matrix normalized; // xhat
  Vector inv_std;
  Matrix activated;  // post batch-norm, pre ReLU
  Matrix mask;       // dropout multipliers (0 or 1/(1-rate)); empty when unused
  Vector batch_mean;
  Vector batch_var;
};

struct MlpResult {
  Vector probabilities;
  Vector logits;
  std::vector<MlpLayerCache> layers;
  Matrix final_input;
};

MlpResult mlp_forward(const Matrix& pooled, const MLPHead& head, Mode mode, RandomSource& rng);

struct ForwardCache {
  const ModelParams* params = nullptr;
  Mode mode = Mode::Infer;
  std::vector<Sample> samples;
  std::vector<Matrix> embeddings;
  std::vector<AttentionResult> attention;
  MlpResult mlp;
};

struct ForwardResult {
  Vector probabilities;
  std::vector<Vector> alpha;
  ForwardCache cache;
};

/// embed_sample -> attention (or mean pool) -> MLP head. Train mode needs a
/// batch of at least two samples; infer mode is a pure function of each
/// sample, independent of batch composition.
ForwardResult forward(std::span<const Sample> batch, const ModelParams& params, Mode mode,
                      RandomSource& rng);
ForwardResult forward(std::span<const Sample> batch, const ModelParams& params);

/// Folds the batch statistics of a train-mode pass into the running averages.
void apply_running_stats(ModelParams& params, const ForwardCache& cache);

/// Gradient of mean binary cross-entropy (predictions clamped to
/// [eps, 1 - eps]) with respect to every trainable tensor.
Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   std::span<const int> labels, double clamp_eps = kLossClampEpsilon);

}  // namespace tabattn
