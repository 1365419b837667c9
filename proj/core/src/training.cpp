#include "tabattn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include "tabattn/error.hpp"

namespace tabattn {

void TrainConfig::validate() const {
  if (epochs == 0) fail(ErrorKind::Parameter, "epochs must be >= 1");
  if (batch_size < 2) fail(ErrorKind::Parameter, "batch size must be >= 2 for batch normalization");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorKind::Parameter, "learning rate must be finite and non-negative");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorKind::Parameter, "Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) fail(ErrorKind::Parameter, "Adam epsilon must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    fail(ErrorKind::Parameter, "validation fraction must lie in (0, 1)");
  }
  if (!(clamp_epsilon > 0.0 && clamp_epsilon < 0.5)) {
    fail(ErrorKind::Parameter, "loss clamp epsilon must lie in (0, 0.5)");
  }
  model.validate();
}

double bce_loss(std::span<const double> probabilities, std::span<const int> labels, double eps) {
  if (probabilities.size() != labels.size()) {
    fail(ErrorKind::Shape, "bce_loss: " + std::to_string(probabilities.size()) +
                               " predictions for " + std::to_string(labels.size()) + " labels");
  }
  if (probabilities.empty()) fail(ErrorKind::Shape, "bce_loss on an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probabilities[i], eps, 1.0 - eps);
    total -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(labels.size());
}

void adam_step(std::span<const TensorRef> params, std::span<const ConstTensorRef> grads,
               AdamState& state, const AdamSettings& settings) {
  if (params.size() != grads.size()) {
    fail(ErrorKind::Shape, "adam_step: " + std::to_string(params.size()) + " tensors but " +
                               std::to_string(grads.size()) + " gradients");
  }
  if (state.first.empty()) {
    for (const auto& p : params) {
      state.first.emplace_back(p.values.size(), 0.0);
      state.second.emplace_back(p.values.size(), 0.0);
    }
  }
  if (state.first.size() != params.size()) fail(ErrorKind::Shape, "adam_step: optimizer state mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].values.size() != grads[t].values.size() ||
        params[t].values.size() != state.first[t].size()) {
      fail(ErrorKind::Shape, "adam_step: shape mismatch for " + params[t].name);
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(settings.beta1, t);
  const double correction2 = 1.0 - std::pow(settings.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].values;
    auto g = grads[i].values;
    Vector& m = state.first[i];
    Vector& v = state.second[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = settings.beta1 * m[j] + (1.0 - settings.beta1) * g[j];
      v[j] = settings.beta2 * v[j] + (1.0 - settings.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= settings.learning_rate * m_hat / (std::sqrt(v_hat) + settings.epsilon);
    }
  }
}

Metrics metrics_from_predictions(std::span<const double> probabilities, std::span<const int> labels,
                                 double clamp_eps) {
  if (labels.empty()) fail(ErrorKind::Domain, "metrics on an empty cohort");
  Metrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = probabilities[i] >= kDecisionThreshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++m.confusion.true_positive;
    else if (!predicted && !actual) ++m.confusion.true_negative;
    else if (predicted) ++m.confusion.false_positive;
    else ++m.confusion.false_negative;
  }
  const auto& c = m.confusion;
  m.accuracy = static_cast<double>(c.true_positive + c.true_negative) / static_cast<double>(c.total());
  const std::size_t pos = c.true_positive + c.false_negative;
  const std::size_t neg = c.true_negative + c.false_positive;
  m.sensitivity = pos ? static_cast<double>(c.true_positive) / static_cast<double>(pos) : 0.0;
  m.specificity = neg ? static_cast<double>(c.true_negative) / static_cast<double>(neg) : 0.0;
  m.loss = bce_loss(probabilities, labels, clamp_eps);
  return m;
}

namespace {

std::vector<int> labels_of(const Cohort& cohort) {
  std::vector<int> y;
  y.reserve(cohort.size());
  for (const Sample& s : cohort.samples) y.push_back(s.label);
  return y;
}

// Shuffled minibatches; a trailing batch of one is merged into its neighbour
// so every train-mode pass has batch statistics.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   RandomSource& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

void check_training_cohorts(const Cohort& train_cohort, const Cohort& val_cohort) {
  if (train_cohort.count_label(0) < 2 || train_cohort.count_label(1) < 2) {
    fail(ErrorKind::Domain, "training cohort needs at least 2 samples of each class");
  }
  if (val_cohort.empty()) fail(ErrorKind::Domain, "validation cohort is empty");
  if (!(train_cohort.schema == val_cohort.schema)) {
    fail(ErrorKind::Schema, "training and validation cohorts use different schemas");
  }
}

AdamSettings adam_settings(const TrainConfig& config) {
  return {config.learning_rate, config.beta1, config.beta2, config.adam_epsilon};
}

// Early stopping bookkeeping shared by both trainers.
class Patience {
 public:
  explicit Patience(std::size_t limit) : limit_(limit) {}
  bool should_stop(double val_loss) {
    if (limit_ == 0) return false;
    if (val_loss < best_) {
      best_ = val_loss;
      stale_ = 0;
      return false;
    }
    return ++stale_ >= limit_;
  }

 private:
  std::size_t limit_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
};

}  // namespace

Vector predict(const ModelParams& params, const Cohort& cohort) {
  if (cohort.empty()) return {};
  return forward(cohort.samples, params).probabilities;
}

Metrics evaluate(const ModelParams& params, const Cohort& cohort) {
  if (cohort.empty()) fail(ErrorKind::Domain, "cannot evaluate an empty cohort");
  if (!(cohort.schema == params.schema)) {
    fail(ErrorKind::Schema, "cohort schema does not match the model schema");
  }
  const Vector p = predict(params, cohort);
  const auto y = labels_of(cohort);
  return metrics_from_predictions(p, y);
}

Metrics evaluate(const ModelParams& params, const ScalerStats& stats, const Cohort& raw) {
  if (raw.empty()) fail(ErrorKind::Domain, "cannot evaluate an empty cohort");
  return evaluate(params, standardize(raw, stats).cohort);
}

void write_curves_csv(std::ostream& out, const TrainReport& report) {
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& r : report.epochs) {
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.train_accuracy)
        << ',' << format_double(r.val_loss) << ',' << format_double(r.val_accuracy) << '\n';
  }
}

void save_curves_csv(const std::filesystem::path& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write curves file " + path.string());
  write_curves_csv(out, report);
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

TrainResult train(const Cohort& train_cohort, const Cohort& val_cohort, const TrainConfig& config) {
  config.validate();
  check_training_cohorts(train_cohort, val_cohort);
  const auto started = std::chrono::steady_clock::now();

  RandomSource rng(config.seed);
  TrainResult result{init_params(train_cohort.schema, config.model, rng), {}};
  ModelParams& params = result.params;
  TrainReport& report = result.report;
  report.model_kind = std::string(to_string(config.model.pooling));
  report.config = config;
  report.seed = config.seed;

  const auto train_labels = labels_of(train_cohort);
  AdamState adam;
  const AdamSettings settings = adam_settings(config);
  Patience patience(config.patience);
  std::vector<Sample> batch;
  std::vector<int> batch_labels;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (const auto& indices : make_batches(train_cohort.size(), config.batch_size, rng)) {
      batch.clear();
      batch_labels.clear();
      for (std::size_t i : indices) {
        batch.push_back(train_cohort.samples[i]);
        batch_labels.push_back(train_labels[i]);
      }
      ForwardResult fwd = forward(batch, params, Mode::Train, rng);
      const Gradients grads = backward(params, fwd.cache, batch_labels, config.clamp_epsilon);
      apply_running_stats(params, fwd.cache);
      adam_step(params.tensors(), grads.tensors(), adam, settings);
    }
    result.report.final_train = evaluate(params, train_cohort);
    result.report.final_validation = evaluate(params, val_cohort);
    report.epochs.push_back({epoch, report.final_train.loss, report.final_train.accuracy,
                             report.final_validation.loss, report.final_validation.accuracy});
    if (patience.should_stop(report.final_validation.loss)) break;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

// ------------------------------------------------- logistic baseline ----

std::size_t linear_feature_width(const FeatureSchema& schema) {
  std::size_t width = 0;
  for (const auto& f : schema.features()) width += f.kind == FeatureKind::Categorical ? f.cardinality() : 1;
  return width;
}

Vector encode_linear_features(const FeatureSchema& schema, const Sample& sample) {
  Vector x;
  x.reserve(linear_feature_width(schema));
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& f = schema.feature(i);
    const std::size_t slot = schema.slot(i);
    switch (f.kind) {
      case FeatureKind::Numerical: x.push_back(sample.numerical[slot]); break;
      case FeatureKind::Binary: x.push_back(static_cast<double>(sample.binary[slot])); break;
      case FeatureKind::Categorical:
        for (std::size_t c = 0; c < f.cardinality(); ++c) {
          x.push_back(static_cast<int>(c) == sample.categorical[slot] ? 1.0 : 0.0);
        }
        break;
    }
  }
  return x;
}

namespace {

std::vector<Vector> encode_all(const Cohort& cohort) {
  std::vector<Vector> rows;
  rows.reserve(cohort.size());
  for (const Sample& s : cohort.samples) rows.push_back(encode_linear_features(cohort.schema, s));
  return rows;
}

Vector predict_encoded(const LogisticModel& model, const std::vector<Vector>& rows) {
  Vector p;
  p.reserve(rows.size());
  for (const Vector& x : rows) p.push_back(sigmoid(dot(model.weights, x) + model.bias[0]));
  return p;
}

Metrics evaluate_encoded(const LogisticModel& model, const std::vector<Vector>& rows,
                         const std::vector<int>& labels) {
  if (rows.empty()) fail(ErrorKind::Domain, "cannot evaluate an empty cohort");
  return metrics_from_predictions(predict_encoded(model, rows), labels);
}

}  // namespace

Vector predict(const LogisticModel& model, const Cohort& cohort) {
  return predict_encoded(model, encode_all(cohort));
}

Metrics evaluate(const LogisticModel& model, const Cohort& cohort) {
  return evaluate_encoded(model, encode_all(cohort), labels_of(cohort));
}

BaselineResult train_logistic_baseline(const Cohort& train_cohort, const Cohort& val_cohort,
                                       const TrainConfig& config) {
  config.validate();
  check_training_cohorts(train_cohort, val_cohort);
  const auto started = std::chrono::steady_clock::now();

  RandomSource rng(config.seed);
  const std::size_t width = linear_feature_width(train_cohort.schema);
  BaselineResult result;
  LogisticModel& model = result.model;
  model.schema = train_cohort.schema;
  model.weights.assign(width, 0.0);

  TrainReport& report = result.report;
  report.model_kind = "logistic";
  report.config = config;
  report.seed = config.seed;

  const auto train_rows = encode_all(train_cohort);
  const auto val_rows = encode_all(val_cohort);
  const auto train_labels = labels_of(train_cohort);
  const auto val_labels = labels_of(val_cohort);
  AdamState adam;
  const AdamSettings settings = adam_settings(config);
  Patience patience(config.patience);
  Vector grad_w(width);
  Vector grad_b(1);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (const auto& indices : make_batches(train_rows.size(), config.batch_size, rng)) {
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      grad_b[0] = 0.0;
      const double inv_b = 1.0 / static_cast<double>(indices.size());
      for (std::size_t i : indices) {
        const double p = sigmoid(dot(model.weights, train_rows[i]) + model.bias[0]);
        if (p <= config.clamp_epsilon || p >= 1.0 - config.clamp_epsilon) continue;
        const double dz = (p - train_labels[i]) * inv_b;
        for (std::size_t j = 0; j < width; ++j) grad_w[j] += dz * train_rows[i][j];
        grad_b[0] += dz;
      }
      const std::vector<TensorRef> params = {{"weights", model.weights}, {"bias", model.bias}};
      const std::vector<ConstTensorRef> grads = {{"weights", grad_w}, {"bias", grad_b}};
      adam_step(params, grads, adam, settings);
    }
    report.final_train = evaluate_encoded(model, train_rows, train_labels);
    report.final_validation = evaluate_encoded(model, val_rows, val_labels);
    report.epochs.push_back({epoch, report.final_train.loss, report.final_train.accuracy,
                             report.final_validation.loss, report.final_validation.accuracy});
    if (patience.should_stop(report.final_validation.loss)) break;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace tabattn
