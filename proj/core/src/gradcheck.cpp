#include "tabattn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tabattn/error.hpp"
#include "tabattn/training.hpp"

namespace tabattn {
namespace {

FeatureSchema random_schema(std::size_t n, RandomSource& rng) {
  std::vector<FeatureDescriptor> features;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureDescriptor f;
    f.name = "f" + std::to_string(i);
    switch (rng.next_index(3)) {
      case 0: f.kind = FeatureKind::Numerical; break;
      case 1: f.kind = FeatureKind::Binary; break;
      default: {
        f.kind = FeatureKind::Categorical;
        const std::size_t card = 2 + rng.next_index(3);
        for (std::size_t c = 0; c < card; ++c) f.categories.push_back("c" + std::to_string(c));
      }
    }
    features.push_back(std::move(f));
  }
  return FeatureSchema(std::move(features), "y");
}

Sample random_sample(const FeatureSchema& schema, RandomSource& rng) {
  Sample s = make_empty_sample(schema);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& f = schema.feature(i);
    const std::size_t slot = schema.slot(i);
    switch (f.kind) {
      case FeatureKind::Numerical: s.numerical[slot] = gaussian(rng, 0.0, 1.0); break;
      case FeatureKind::Categorical:
        s.categorical[slot] = static_cast<int>(rng.next_index(f.cardinality()));
        break;
      case FeatureKind::Binary: s.binary[slot] = static_cast<int>(rng.next_index(2)); break;
    }
  }
  s.label = static_cast<int>(rng.next_index(2));
  return s;
}

// Moves parameters away from the symmetric initial point so every path
// carries a non-trivial gradient.
void perturb(ModelParams& params, RandomSource& rng) {
  for (auto& t : params.tensors()) {
    const bool is_gamma = t.name.find(".gamma") != std::string::npos;
    for (double& v : t.values) v += gaussian(rng, 0.0, is_gamma ? 0.2 : 0.5);
  }
}

// Denominator floor: finite differences carry ~1e-10 absolute noise, so
// gradients below this size are compared absolutely.
constexpr double kErrorFloor = 1e-5;

std::string tensor_family(const std::string& name) {
  return name.substr(0, name.find(':'));
}

}  // namespace

GradCheckReport run_gradient_check(const GradCheckSettings& settings) {
  GradCheckReport report;
  report.tolerance = settings.tolerance;
  std::set<std::string> covered;

  for (std::size_t c = 0; c < settings.configurations; ++c) {
    RandomSource rng(settings.seed + 0x9e3779b97f4a7c15ULL * (c + 1));
    GradCheckCase result;
    result.features = 1 + rng.next_index(6);
    result.batch = 2 + rng.next_index(7);
    ModelConfig& cfg = result.config;
    cfg.dim = 1 + rng.next_index(4);
    cfg.attn_dim = 1 + rng.next_index(3);
    cfg.hidden.clear();
    const std::size_t layers = 1 + rng.next_index(2);
    for (std::size_t l = 0; l < layers; ++l) cfg.hidden.push_back(1 + rng.next_index(8));
    cfg.dropout = c % 2 ? 0.25 : 0.0;
    cfg.pooling = c + 1 == settings.configurations && c > 0 ? Pooling::MeanPool : Pooling::Attention;

    const FeatureSchema schema = random_schema(result.features, rng);
    ModelParams params = init_params(schema, cfg, rng);
    perturb(params, rng);
    std::vector<Sample> batch;
    std::vector<int> labels;
    for (std::size_t b = 0; b < result.batch; ++b) {
      batch.push_back(random_sample(schema, rng));
      labels.push_back(batch.back().label);
    }
    const RandomSource dropout_stream(rng.next_u64());

    auto loss = [&] {
      RandomSource replay = dropout_stream;
      return bce_loss(forward(batch, params, Mode::Train, replay).probabilities, labels);
    };

    RandomSource replay = dropout_stream;
    ForwardResult fwd = forward(batch, params, Mode::Train, replay);
    Gradients analytic = backward(params, fwd.cache, labels);
    if (settings.tamper) settings.tamper(analytic);

    const auto analytic_tensors = analytic.tensors();
    auto tensors = params.tensors();
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      std::span<double> values = tensors[t].values;
      const Vector original(values.begin(), values.end());
      const Vector numeric = finite_diff_grad(
          [&](const Vector& probe) {
            std::copy(probe.begin(), probe.end(), values.begin());
            return loss();
          },
          original, settings.step);
      std::copy(original.begin(), original.end(), values.begin());

      const auto a = analytic_tensors[t].values;
      for (std::size_t j = 0; j < a.size(); ++j) {
        const double scale = std::max({std::abs(a[j]), std::abs(numeric[j]), kErrorFloor});
        const double err = std::abs(a[j] - numeric[j]) / scale;
        if (scale > kErrorFloor) covered.insert(tensor_family(tensors[t].name));
        if (err > result.worst_error || result.worst_tensor.empty()) {
          result.worst_error = err;
          result.worst_tensor = tensors[t].name;
        }
      }
    }
    result.passed = result.worst_error < settings.tolerance;
    if (result.worst_error >= report.worst_error) {
      report.worst_error = result.worst_error;
      report.worst_tensor = result.worst_tensor;
    }
    report.cases.push_back(std::move(result));
  }
  report.passed = std::all_of(report.cases.begin(), report.cases.end(),
                              [](const GradCheckCase& c) { return c.passed; });
  report.covered.assign(covered.begin(), covered.end());
  return report;
}

}  // namespace tabattn
