#include "tabattn/model.hpp"

#include <cmath>
#include <limits>

#include "tabattn/error.hpp"

namespace tabattn {

std::string_view to_string(Pooling pooling) noexcept {
  return pooling == Pooling::Attention ? "attention" : "mean-pool";
}

Pooling parse_pooling(std::string_view text) {
  if (text == "attention") return Pooling::Attention;
  if (text == "mean-pool") return Pooling::MeanPool;
  fail(ErrorKind::Parameter, "unknown pooling '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (dim == 0) fail(ErrorKind::Parameter, "embedding dimension must be >= 1");
  if (attn_dim == 0) fail(ErrorKind::Parameter, "attention dimension must be >= 1");
  for (std::size_t h : hidden) {
    if (h == 0) fail(ErrorKind::Parameter, "hidden layer sizes must be >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorKind::Parameter, "dropout must lie in [0, 1)");
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) {
    fail(ErrorKind::Parameter, "batch-norm momentum must lie in [0, 1]");
  }
}

// ------------------------------------------------------------ tensors ----

namespace {

template <class Params, class Ref, class Span>
std::vector<Ref> collect(Params& p) {
  std::vector<Ref> out;
  auto add = [&out](std::string name, auto& container) {
    out.push_back(Ref{std::move(name), Span(container.data(), container.size())});
  };
  for (std::size_t i = 0; i < p.embedders.size(); ++i) {
    const std::string& fname = p.schema.feature(i).name;
    if (auto* table = std::get_if<EmbeddingTable>(&p.embedders[i])) {
      auto values = table->weights.values();
      out.push_back(Ref{"embedding:" + fname, Span(values.data(), values.size())});
    } else {
      auto& num = std::get<NumericEmbedder>(p.embedders[i]);
      add("numeric_scale:" + fname, num.scale);
      add("numeric_offset:" + fname, num.offset);
    }
  }
  {
    auto values = p.attention.projection.values();
    out.push_back(Ref{"attention.W", Span(values.data(), values.size())});
  }
  add("attention.b", p.attention.bias);
  add("attention.w", p.attention.context);
  for (std::size_t l = 0; l < p.head.hidden.size(); ++l) {
    const std::string idx = std::to_string(l);
    auto values = p.head.hidden[l].weight.values();
    out.push_back(Ref{"dense[" + idx + "].weight", Span(values.data(), values.size())});
    add("dense[" + idx + "].bias", p.head.hidden[l].bias);
    add("batchnorm[" + idx + "].gamma", p.head.norms[l].gamma);
    add("batchnorm[" + idx + "].beta", p.head.norms[l].beta);
  }
  auto values = p.head.output.weight.values();
  out.push_back(Ref{"output.weight", Span(values.data(), values.size())});
  add("output.bias", p.head.output.bias);
  return out;
}

}  // namespace

std::vector<TensorRef> ModelParams::tensors() {
  return collect<ModelParams, TensorRef, std::span<double>>(*this);
}

std::vector<ConstTensorRef> ModelParams::tensors() const {
  return collect<const ModelParams, ConstTensorRef, std::span<const double>>(*this);
}

std::size_t ModelParams::parameter_count() const {
  std::size_t total = 0;
  for (const auto& t : tensors()) total += t.values.size();
  return total;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (auto& t : z.tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
  for (auto& bn : z.head.norms) {
    std::fill(bn.running_mean.begin(), bn.running_mean.end(), 0.0);
    std::fill(bn.running_var.begin(), bn.running_var.end(), 0.0);
  }
  return z;
}

// --------------------------------------------------------------- init ----

namespace {

Matrix xavier(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
              RandomSource& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(rows, cols);
  for (double& v : m.values()) v = uniform(rng, -limit, limit);
  return m;
}

Vector gaussian_vector(std::size_t n, double stddev, RandomSource& rng) {
  Vector v(n);
  for (double& x : v) x = gaussian(rng, 0.0, stddev);
  return v;
}

}  // namespace

ModelParams init_params(const FeatureSchema& schema, const ModelConfig& config, RandomSource& rng) {
  config.validate();
  if (schema.size() == 0) fail(ErrorKind::Parameter, "schema has no features");
  constexpr double kEmbeddingStd = 0.1;
  const std::size_t d = config.dim;
  const std::size_t k = config.attn_dim;

  ModelParams p;
  p.schema = schema;
  p.config = config;
  for (const auto& f : schema.features()) {
    if (f.kind == FeatureKind::Numerical) {
      NumericEmbedder num;
      num.scale = gaussian_vector(d, kEmbeddingStd, rng);
      num.offset = gaussian_vector(d, kEmbeddingStd, rng);
      p.embedders.emplace_back(std::move(num));
    } else {
      EmbeddingTable table{Matrix(f.cardinality(), d)};
      for (double& v : table.weights.values()) v = gaussian(rng, 0.0, kEmbeddingStd);
      p.embedders.emplace_back(std::move(table));
    }
  }

  p.attention.projection = xavier(k, d, d, k, rng);
  p.attention.bias.assign(k, 0.0);
  {
    Matrix w = xavier(k, 1, k, 1, rng);
    p.attention.context.assign(w.values().begin(), w.values().end());
  }

  std::size_t width = d;
  for (std::size_t h : config.hidden) {
    p.head.hidden.push_back({xavier(width, h, width, h, rng), Vector(h, 0.0)});
    p.head.norms.push_back({Vector(h, 1.0), Vector(h, 0.0), Vector(h, 0.0), Vector(h, 1.0)});
    width = h;
  }
  p.head.output = {xavier(width, 1, width, 1, rng), Vector(1, 0.0)};
  p.head.dropout = config.dropout;
  p.head.momentum = config.bn_momentum;
  return p;
}

// ------------------------------------------------------------ forward ----

Matrix embed_sample(const Sample& sample, const ModelParams& params) {
  const FeatureSchema& schema = params.schema;
  const std::size_t d = params.config.dim;
  if (sample.numerical.size() != schema.count(FeatureKind::Numerical) ||
      sample.categorical.size() != schema.count(FeatureKind::Categorical) ||
      sample.binary.size() != schema.count(FeatureKind::Binary)) {
    fail(ErrorKind::Schema, "sample layout does not match the model schema");
  }
  Matrix x(schema.size(), d);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& f = schema.feature(i);
    const std::size_t slot = schema.slot(i);
    auto row = x.row(i);
    if (f.kind == FeatureKind::Numerical) {
      const auto& num = std::get<NumericEmbedder>(params.embedders[i]);
      const double v = sample.numerical[slot];
      if (!std::isfinite(v)) fail(ErrorKind::Domain, "missing numerical value for " + f.name);
      for (std::size_t j = 0; j < d; ++j) row[j] = v * num.scale[j] + num.offset[j];
    } else {
      const auto& table = std::get<EmbeddingTable>(params.embedders[i]);
      const int idx = f.kind == FeatureKind::Categorical ? sample.categorical[slot] : sample.binary[slot];
      if (idx < 0 || static_cast<std::size_t>(idx) >= table.cardinality()) {
        fail(ErrorKind::Lookup, "index " + std::to_string(idx) + " out of range for " + f.name);
      }
      auto src = table.weights.row(static_cast<std::size_t>(idx));
      std::copy(src.begin(), src.end(), row.begin());
    }
  }
  return x;
}

AttentionResult attention_forward(const Matrix& embeddings, const AttentionParams& params) {
  const std::size_t n = embeddings.rows();
  const std::size_t d = embeddings.cols();
  const std::size_t k = params.projection.rows();
  if (n == 0) fail(ErrorKind::Shape, "attention over zero features");
  if (params.projection.cols() != d || params.bias.size() != k || params.context.size() != k) {
    fail(ErrorKind::Shape, "attention parameters W" + params.projection.shape_string() +
                               " do not fit embeddings " + embeddings.shape_string());
  }
  AttentionResult out;
  out.activations = Matrix(n, k);
  Vector scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = embeddings.row(i);
    auto t = out.activations.row(i);
    for (std::size_t r = 0; r < k; ++r) t[r] = std::tanh(dot(params.projection.row(r), x) + params.bias[r]);
    scores[i] = dot(params.context, t);
  }
  out.alpha = softmax(scores);
  out.pooled.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = embeddings.row(i);
    for (std::size_t j = 0; j < d; ++j) out.pooled[j] += out.alpha[i] * x[j];
  }
  return out;
}

AttentionResult mean_pool_forward(const Matrix& embeddings) {
  const std::size_t n = embeddings.rows();
  if (n == 0) fail(ErrorKind::Shape, "pooling over zero features");
  AttentionResult out;
  out.alpha.assign(n, 1.0 / static_cast<double>(n));
  out.pooled.assign(embeddings.cols(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = embeddings.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) out.pooled[j] += out.alpha[i] * x[j];
  }
  return out;
}

namespace {

double clamp_open_unit(double p) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  return p < lo ? lo : (p > hi ? hi : p);
}

}  // namespace

MlpResult mlp_forward(const Matrix& pooled, const MLPHead& head, Mode mode, RandomSource& rng) {
  const std::size_t batch = pooled.rows();
  if (batch == 0) fail(ErrorKind::Shape, "empty batch");
  if (mode == Mode::Train && batch < 2) {
    fail(ErrorKind::Parameter, "batch-size error: train mode needs at least 2 samples for batch statistics");
  }
  MlpResult out;
  Matrix a = pooled;
  for (std::size_t l = 0; l < head.hidden.size(); ++l) {
    const DenseLayer& layer = head.hidden[l];
    const BatchNorm& bn = head.norms[l];
    if (layer.weight.rows() != a.cols()) {
      fail(ErrorKind::Shape, "dense layer " + std::to_string(l) + " expects width " +
                                 std::to_string(layer.weight.rows()) + ", got " +
                                 std::to_string(a.cols()));
    }
    MlpLayerCache c;
    Matrix z = matmul(a, layer.weight);
    const std::size_t width = z.cols();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < width; ++j) z(b, j) += layer.bias[j];

    Vector centre(width);
    Vector var(width);
    if (mode == Mode::Train) {
      const double inv_b = 1.0 / static_cast<double>(batch);
      for (std::size_t j = 0; j < width; ++j) {
        double s = 0.0;
        for (std::size_t b = 0; b < batch; ++b) s += z(b, j);
        centre[j] = s * inv_b;
        double sq = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          const double dz = z(b, j) - centre[j];
          sq += dz * dz;
        }
        var[j] = sq * inv_b;
      }
      c.batch_mean = centre;
      c.batch_var = var;
    } else {
      centre = bn.running_mean;
      var = bn.running_var;
    }
    c.inv_std.resize(width);
    for (std::size_t j = 0; j < width; ++j) c.inv_std[j] = 1.0 / std::sqrt(var[j] + kBatchNormEpsilon);

    c.normalized = Matrix(batch, width);
    c.activated = Matrix(batch, width);
    Matrix next(batch, width);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < width; ++j) {
        const double xhat = (z(b, j) - centre[j]) * c.inv_std[j];
        const double y = bn.gamma[j] * xhat + bn.beta[j];
        c.normalized(b, j) = xhat;
        c.activated(b, j) = y;
        next(b, j) = relu(y);
      }
    }
    if (mode == Mode::Train && head.dropout > 0.0) {
      const double keep_scale = 1.0 / (1.0 - head.dropout);
      c.mask = Matrix(batch, width);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < width; ++j) {
          c.mask(b, j) = rng.next_unit() < head.dropout ? 0.0 : keep_scale;
          next(b, j) *= c.mask(b, j);
        }
      }
    }
    c.input = std::move(a);
    out.layers.push_back(std::move(c));
    a = std::move(next);
  }

  if (head.output.weight.rows() != a.cols() || head.output.weight.cols() != 1) {
    fail(ErrorKind::Shape, "output layer " + head.output.weight.shape_string() +
                               " does not fit width " + std::to_string(a.cols()));
  }
  out.logits.resize(batch);
  out.probabilities.resize(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    double logit = head.output.bias[0];
    auto row = a.row(b);
    for (std::size_t j = 0; j < row.size(); ++j) logit += row[j] * head.output.weight(j, 0);
    out.logits[b] = logit;
    out.probabilities[b] = clamp_open_unit(sigmoid(logit));
  }
  out.final_input = std::move(a);
  return out;
}

ForwardResult forward(std::span<const Sample> batch, const ModelParams& params, Mode mode,
                      RandomSource& rng) {
  if (batch.empty()) fail(ErrorKind::Shape, "forward on an empty batch");
  ForwardResult out;
  ForwardCache& cache = out.cache;
  cache.params = &params;
  cache.mode = mode;
  cache.samples.assign(batch.begin(), batch.end());
  cache.embeddings.reserve(batch.size());
  cache.attention.reserve(batch.size());
  Matrix pooled(batch.size(), params.config.dim);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    Matrix x = embed_sample(batch[b], params);
    AttentionResult att = params.config.pooling == Pooling::Attention
                              ? attention_forward(x, params.attention)
                              : mean_pool_forward(x);
    std::copy(att.pooled.begin(), att.pooled.end(), pooled.row(b).begin());
    out.alpha.push_back(att.alpha);
    cache.embeddings.push_back(std::move(x));
    cache.attention.push_back(std::move(att));
  }
  cache.mlp = mlp_forward(pooled, params.head, mode, rng);
  out.probabilities = cache.mlp.probabilities;
  return out;
}

ForwardResult forward(std::span<const Sample> batch, const ModelParams& params) {
  RandomSource unused(0);
  return forward(batch, params, Mode::Infer, unused);
}

void apply_running_stats(ModelParams& params, const ForwardCache& cache) {
  if (cache.mode != Mode::Train) return;
  const double m = params.head.momentum;
  for (std::size_t l = 0; l < params.head.norms.size(); ++l) {
    BatchNorm& bn = params.head.norms[l];
    const MlpLayerCache& c = cache.mlp.layers.at(l);
    for (std::size_t j = 0; j < bn.running_mean.size(); ++j) {
      bn.running_mean[j] = (1.0 - m) * bn.running_mean[j] + m * c.batch_mean[j];
      bn.running_var[j] = (1.0 - m) * bn.running_var[j] + m * c.batch_var[j];
    }
  }
}

// ----------------------------------------------------------- backward ----

Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   std::span<const int> labels, double clamp_eps) {
  if (cache.mode != Mode::Train) fail(ErrorKind::State, "backward needs a train-mode forward cache");
  if (cache.params != &params) fail(ErrorKind::State, "forward cache belongs to different parameters");
  const std::size_t batch = cache.samples.size();
  if (labels.size() != batch || cache.mlp.probabilities.size() != batch) {
    fail(ErrorKind::State, "forward cache holds " + std::to_string(batch) + " samples but " +
                               std::to_string(labels.size()) + " labels were given");
  }

  Gradients g = params.zeros_like();
  const MLPHead& head = params.head;
  const double inv_b = 1.0 / static_cast<double>(batch);

  // d(mean clamped BCE)/d(logit); zero where the clamp is active.
  Vector dlogit(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const double p = cache.mlp.probabilities[b];
    dlogit[b] = (p > clamp_eps && p < 1.0 - clamp_eps) ? (p - labels[b]) * inv_b : 0.0;
  }

  const Matrix& last = cache.mlp.final_input;
  Matrix da(batch, last.cols());
  for (std::size_t b = 0; b < batch; ++b) {
    g.head.output.bias[0] += dlogit[b];
    for (std::size_t j = 0; j < last.cols(); ++j) {
      g.head.output.weight(j, 0) += last(b, j) * dlogit[b];
      da(b, j) = dlogit[b] * head.output.weight(j, 0);
    }
  }

  for (std::size_t l = head.hidden.size(); l-- > 0;) {
    const MlpLayerCache& c = cache.mlp.layers[l];
    const BatchNorm& bn = head.norms[l];
    const std::size_t width = c.activated.cols();
    Matrix dxhat(batch, width);
    Vector sum_dxhat(width, 0.0);
    Vector sum_dxhat_xhat(width, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < width; ++j) {
        double dy = da(b, j);
        if (c.mask.size() != 0) dy *= c.mask(b, j);
        if (c.activated(b, j) <= 0.0) dy = 0.0;
        g.head.norms[l].gamma[j] += dy * c.normalized(b, j);
        g.head.norms[l].beta[j] += dy;
        const double dx = dy * bn.gamma[j];
        dxhat(b, j) = dx;
        sum_dxhat[j] += dx;
        sum_dxhat_xhat[j] += dx * c.normalized(b, j);
      }
    }
    Matrix dz(batch, width);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < width; ++j) {
        dz(b, j) = c.inv_std[j] * inv_b *
                   (static_cast<double>(batch) * dxhat(b, j) - sum_dxhat[j] -
                    c.normalized(b, j) * sum_dxhat_xhat[j]);
      }
    }
    const Matrix dw = matmul(transpose(c.input), dz);
    auto gw = g.head.hidden[l].weight.values();
    auto dwv = dw.values();
    for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += dwv[i];
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < width; ++j) g.head.hidden[l].bias[j] += dz(b, j);
    da = matmul(dz, transpose(head.hidden[l].weight));
  }

  // da now holds dL/dh for every sample.
  const std::size_t d = params.config.dim;
  const std::size_t k = params.config.attn_dim;
  const AttentionParams& att = params.attention;
  for (std::size_t b = 0; b < batch; ++b) {
    const Matrix& x = cache.embeddings[b];
    const AttentionResult& ar = cache.attention[b];
    const std::size_t n = x.rows();
    auto dh = da.row(b);
    Matrix dx(n, d);
    if (params.config.pooling == Pooling::Attention) {
      Vector dalpha(n);
      double weighted = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        dalpha[i] = dot(x.row(i), dh);
        weighted += ar.alpha[i] * dalpha[i];
      }
      for (std::size_t i = 0; i < n; ++i) {
        auto xi = x.row(i);
        auto dxi = dx.row(i);
        for (std::size_t j = 0; j < d; ++j) dxi[j] = ar.alpha[i] * dh[j];
        const double ds = ar.alpha[i] * (dalpha[i] - weighted);
        auto t = ar.activations.row(i);
        for (std::size_t r = 0; r < k; ++r) {
          g.attention.context[r] += ds * t[r];
          const double du = ds * att.context[r] * (1.0 - t[r] * t[r]);
          g.attention.bias[r] += du;
          auto w_row = att.projection.row(r);
          auto gw_row = g.attention.projection.row(r);
          for (std::size_t j = 0; j < d; ++j) {
            gw_row[j] += du * xi[j];
            dxi[j] += w_row[j] * du;
          }
        }
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        auto dxi = dx.row(i);
        for (std::size_t j = 0; j < d; ++j) dxi[j] = ar.alpha[i] * dh[j];
      }
    }

    const Sample& s = cache.samples[b];
    for (std::size_t i = 0; i < n; ++i) {
      const auto& f = params.schema.feature(i);
      const std::size_t slot = params.schema.slot(i);
      auto dxi = dx.row(i);
      if (f.kind == FeatureKind::Numerical) {
        auto& num = std::get<NumericEmbedder>(g.embedders[i]);
        const double v = s.numerical[slot];
        for (std::size_t j = 0; j < d; ++j) {
          num.scale[j] += v * dxi[j];
          num.offset[j] += dxi[j];
        }
      } else {
        auto& table = std::get<EmbeddingTable>(g.embedders[i]);
        const int idx = f.kind == FeatureKind::Categorical ? s.categorical[slot] : s.binary[slot];
        auto row = table.weights.row(static_cast<std::size_t>(idx));
        for (std::size_t j = 0; j < d; ++j) row[j] += dxi[j];
      }
    }
  }
  return g;
}

}  // namespace tabattn
