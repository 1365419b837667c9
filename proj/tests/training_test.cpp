#include <algorithm>
#include <cmath>
#include <sstream>

#include "support.hpp"
#include "tabattn/pipeline.hpp"
#include "tabattn/training.hpp"

using namespace tabattn;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

PreparedData planted_data(std::uint64_t seed, std::size_t n = 296) {
  RandomSource rng(seed);
  const Cohort raw =
      generate_synthetic_cohort(FeatureSchema::default_schema(), {n, 0}, PlantedSignal::xor_interaction(), rng)
          .cohort;
  PipelineSettings settings;
  settings.seed = seed;
  return prepare_cohort(raw, settings);
}

// label = [x > 0] on one numerical and one noise binary feature.
Cohort separable(std::size_t n, RandomSource& rng) {
  Cohort c;
  c.schema = FeatureSchema({testing::numerical("x"), testing::binary("noise")}, "y");
  for (std::size_t i = 0; i < n; ++i) {
    Sample s = make_empty_sample(c.schema);
    double x = gaussian(rng, 0, 1);
    if (std::abs(x) < 0.05) x = x < 0 ? -0.05 : 0.05;
    s.numerical = {x};
    s.binary = {static_cast<int>(rng.next_index(2))};
    s.label = x > 0 ? 1 : 0;
    c.samples.push_back(s);
  }
  return c;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("binary cross-entropy") {
  CHECK(bce_loss(Vector{0.9}, std::vector<int>{0}) == doctest::Approx(2.3025850929940455).epsilon(1e-14));
  CHECK(bce_loss(Vector{0.5, 0.5, 0.5}, std::vector<int>{0, 1, 1}) == doctest::Approx(0.69314718055994531));
  const double perfect = bce_loss(Vector{1.0, 0.0}, std::vector<int>{1, 0});
  CHECK(perfect <= -std::log1p(-1e-7) + 1e-18);
  CHECK(perfect > 0.0);
  CHECK(std::isfinite(bce_loss(Vector{0.0, 1.0}, std::vector<int>{1, 0})));
  CHECK_ERROR_KIND(bce_loss(Vector{0.5}, std::vector<int>{0, 1}), ErrorKind::Shape);
}

TEST_CASE("adam") {
  Vector w{1.0, -2.0, 0.5};
  Vector g(3, 0.0);
  AdamState state;
  const AdamSettings settings;
  auto step = [&] {
    const std::vector<TensorRef> p{{"w", w}};
    const std::vector<ConstTensorRef> d{{"w", g}};
    adam_step(p, d, state, settings);
  };
  step();
  CHECK(w == Vector{1.0, -2.0, 0.5});
  CHECK(state.step == 1);

  g = {0.3, -4.0, 1e-3};
  for (int i = 0; i < 1000; ++i) {
    const Vector prev = w;
    step();
    if (i == 999) {
      for (std::size_t j = 0; j < 3; ++j) {
        const double moved = prev[j] - w[j];
        CHECK(std::abs(std::abs(moved) - 1e-3) <= 1e-6);
        CHECK((moved > 0) == (g[j] > 0));
      }
    }
  }

  g = {0.0, 0.0, 0.0};
  const double m0 = state.first[0][0];
  step();
  CHECK(state.first[0][0] == doctest::Approx(0.9 * m0));
  step();
  CHECK(state.first[0][0] == doctest::Approx(0.81 * m0));

  Vector wrong(2, 0.0);
  const std::vector<TensorRef> p{{"w", w}};
  const std::vector<ConstTensorRef> d{{"w", wrong}};
  CHECK_ERROR_KIND(adam_step(p, d, state, settings), ErrorKind::Shape);
}

TEST_CASE("metrics") {
  const std::vector<int> y{1, 0, 1, 1, 0};
  const Metrics perfect = metrics_from_predictions(Vector{0.9, 0.1, 0.7, 0.5, 0.2}, y);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.sensitivity == 1.0);
  CHECK(perfect.specificity == 1.0);

  const Metrics half = metrics_from_predictions(Vector(5, 0.5), y);
  CHECK(half.accuracy == doctest::Approx(0.6));
  CHECK(half.confusion.true_positive == 3);
  CHECK(half.confusion.false_positive == 2);
  CHECK(half.sensitivity == 1.0);
  CHECK(half.specificity == 0.0);

  RandomSource rng(77);
  Vector p(1000);
  std::vector<int> labels(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    p[i] = rng.next_unit();
    labels[i] = static_cast<int>(rng.next_index(2));
  }
  const Metrics random = metrics_from_predictions(p, labels);
  CHECK(std::abs(random.accuracy - 0.5) <= 0.05);
  const auto& c = random.confusion;
  CHECK(random.accuracy == static_cast<double>(c.true_positive + c.true_negative) / static_cast<double>(c.total()));
  CHECK_ERROR_KIND(metrics_from_predictions(Vector{}, std::vector<int>{}), ErrorKind::Domain);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.validate();
  cfg.epochs = 0;
  CHECK_ERROR_KIND(cfg.validate(), ErrorKind::Parameter);
  cfg = {};
  cfg.batch_size = 1;
  CHECK_ERROR_KIND(cfg.validate(), ErrorKind::Parameter);
  cfg = {};
  cfg.val_fraction = 1.0;
  CHECK_ERROR_KIND(cfg.validate(), ErrorKind::Parameter);
  cfg = {};
  cfg.model.hidden = {};
  cfg.validate();
}

TEST_CASE("separable toy reaches full training accuracy") {
  RandomSource rng(10);
  const Standardized train_set = standardize(separable(200, rng));
  const Cohort val = standardize(separable(50, rng), train_set.stats).cohort;
  TrainConfig cfg;
  cfg.epochs = 100;
  const TrainResult r = train(train_set.cohort, val, cfg);
  CHECK(r.report.epochs.size() == 100);
  CHECK(r.report.final_train.accuracy == 1.0);

  cfg.epochs = 2000;
  const BaselineResult b = train_logistic_baseline(train_set.cohort, val, cfg);
  CHECK(b.report.model_kind == "logistic");
  CHECK(b.report.final_train.accuracy == 1.0);
  CHECK(b.report.final_validation.accuracy == 1.0);
}

TEST_CASE("zero learning rate keeps the initialization") {
  const PreparedData data = planted_data(3);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 0.0;
  const TrainResult r = train(data.train, data.validation, cfg);
  RandomSource rng(cfg.seed);
  const ModelParams init = init_params(data.train.schema, cfg.model, rng);
  const auto a = r.params.tensors();
  const auto b = init.tensors();
  for (std::size_t t = 0; t < a.size(); ++t) CHECK(std::equal(a[t].values.begin(), a[t].values.end(), b[t].values.begin()));

  // Running statistics still move with each batch, so the curves jitter in a
  // narrow band over the second half instead of trending.
  auto band = [](const TrainReport& rep, bool val) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t e = rep.epochs.size() / 2; e < rep.epochs.size(); ++e) {
      const double v = val ? rep.epochs[e].val_loss : rep.epochs[e].train_loss;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return hi - lo;
  };
  CHECK(band(r.report, false) <= 0.05);
  CHECK(band(r.report, true) <= 0.05);

  cfg.learning_rate = 1e-3;
  const TrainResult moving = train(data.train, data.validation, cfg);
  const double drop = moving.report.epochs.front().train_loss - moving.report.epochs.back().train_loss;
  CHECK(drop > 3 * band(r.report, false));
}

TEST_CASE("training is deterministic") {
  const PreparedData data = planted_data(4);
  TrainConfig cfg;
  cfg.epochs = 15;
  const TrainResult a = train(data.train, data.validation, cfg);
  const TrainResult b = train(data.train, data.validation, cfg);
  CHECK(a.params == b.params);
  std::ostringstream ca, cb;
  write_curves_csv(ca, a.report);
  write_curves_csv(cb, b.report);
  const std::string curves = ca.str();
  CHECK(curves == cb.str());
  CHECK(curves.rfind("epoch,train_loss,train_acc,val_loss,val_acc\n1,", 0) == 0);
  CHECK(std::count(curves.begin(), curves.end(), '\n') == 16);
  CHECK(a.report.seed == cfg.seed);
  CHECK(a.report.config == cfg);
  CHECK(a.report.model_kind == "attention");
  for (const auto& e : a.report.epochs) {
    CHECK(e.train_accuracy >= 0.0);
    CHECK(e.train_accuracy <= 1.0);
    CHECK(std::isfinite(e.train_loss));
  }
  const Metrics again = evaluate(a.params, data.validation);
  CHECK(again.accuracy == a.report.final_validation.accuracy);
  CHECK(again.loss == a.report.final_validation.loss);
}

TEST_CASE("training loss decreases on planted-signal cohorts") {
  std::vector<double> drops;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PreparedData data = planted_data(seed);
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.seed = seed;
    const TrainResult r = train(data.train, data.validation, cfg);
    std::vector<double> first, last;
    for (std::size_t e = 0; e < 10; ++e) first.push_back(r.report.epochs[e].train_loss);
    for (std::size_t e = 30; e < 40; ++e) last.push_back(r.report.epochs[e].train_loss);
    drops.push_back(median(first) - median(last));
  }
  CHECK(median(drops) > 0.0);
}

TEST_CASE("training contracts") {
  const PreparedData data = planted_data(5);
  TrainConfig cfg;
  cfg.epochs = 2;
  Cohort one_class = data.train;
  std::erase_if(one_class.samples, [](const Sample& s) { return s.label == 1; });
  CHECK_ERROR_KIND(train(one_class, data.validation, cfg), ErrorKind::Domain);
  CHECK_ERROR_KIND(train_logistic_baseline(one_class, data.validation, cfg), ErrorKind::Domain);
  Cohort empty = data.validation;
  empty.samples.clear();
  CHECK_ERROR_KIND(train(data.train, empty, cfg), ErrorKind::Domain);
  RandomSource rng(1);
  CHECK_ERROR_KIND(evaluate(init_params(data.train.schema, {}, rng), empty), ErrorKind::Domain);
  cfg.epochs = 0;
  CHECK_ERROR_KIND(train(data.train, data.validation, cfg), ErrorKind::Parameter);
  CHECK_ERROR_KIND(train_logistic_baseline(data.train, data.validation, cfg), ErrorKind::Parameter);

  cfg.epochs = 3;
  cfg.model.pooling = Pooling::MeanPool;
  const TrainResult mp = train(data.train, data.validation, cfg);
  CHECK(mp.report.model_kind == "mean-pool");
  CHECK(mp.report.epochs.size() == 3);

  cfg = {};
  cfg.epochs = 200;
  cfg.patience = 2;
  cfg.learning_rate = 0.05;
  const TrainResult early = train(data.train, data.validation, cfg);
  CHECK(early.report.epochs.size() < 200);
}

TEST_CASE("logistic baseline features and XOR limit") {
  const FeatureSchema schema = FeatureSchema::default_schema();
  CHECK(linear_feature_width(schema) == 35);
  Sample s = make_empty_sample(schema);
  std::fill(s.numerical.begin(), s.numerical.end(), 0.5);
  std::fill(s.categorical.begin(), s.categorical.end(), 2);
  std::fill(s.binary.begin(), s.binary.end(), 1);
  const Vector x = encode_linear_features(schema, s);
  CHECK(x.size() == 35);
  double total = 0.0;
  for (double v : x) total += v;
  CHECK(total == doctest::Approx(5 * 0.5 + 6 + 12));

  // Pure XOR of two binary features: no linear model beats chance by much.
  RandomSource rng(8);
  PlantedSignal xor_only;
  xor_only.interaction = PlantedInteraction{"Gender", "PTA", 40.0};
  const Cohort raw = generate_synthetic_cohort(schema, {600, 0}, xor_only, rng).cohort;
  const PreparedData data = prepare_cohort(raw, {});
  TrainConfig cfg;
  cfg.epochs = 100;
  const BaselineResult b = train_logistic_baseline(data.train, data.validation, cfg);
  CHECK(b.report.final_validation.accuracy <= 0.6);
  CHECK(b.model.weights.size() == 35);
}

}
