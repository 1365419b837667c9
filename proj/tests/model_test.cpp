#include <algorithm>
#include <cmath>

#include "support.hpp"
#include "tabattn/gradcheck.hpp"
#include "tabattn/model.hpp"
#include "tabattn/training.hpp"

using namespace tabattn;

namespace {

Sample random_sample(const FeatureSchema& schema, RandomSource& rng) {
  Sample s = make_empty_sample(schema);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& f = schema.feature(i);
    const std::size_t slot = schema.slot(i);
    switch (f.kind) {
      case FeatureKind::Numerical: s.numerical[slot] = gaussian(rng, 0, 1.5); break;
      case FeatureKind::Categorical: s.categorical[slot] = static_cast<int>(rng.next_index(f.cardinality())); break;
      case FeatureKind::Binary: s.binary[slot] = static_cast<int>(rng.next_index(2)); break;
    }
  }
  s.label = static_cast<int>(rng.next_index(2));
  return s;
}

// Two features (numerical x, binary b), d = k = 1, one hidden unit.
ModelParams hand_model() {
  const FeatureSchema schema({testing::numerical("x"), testing::binary("b")}, "y");
  ModelConfig cfg;
  cfg.dim = 1;
  cfg.attn_dim = 1;
  cfg.hidden = {1};
  cfg.dropout = 0.0;
  RandomSource rng(0);
  ModelParams p = init_params(schema, cfg, rng);
  std::get<NumericEmbedder>(p.embedders[0]) = {{0.5}, {0.1}};
  std::get<EmbeddingTable>(p.embedders[1]).weights = Matrix::from_rows({{-0.3}, {0.7}});
  p.attention = {Matrix::from_rows({{2.0}}), {0.1}, {1.5}};
  p.head.hidden[0] = {Matrix::from_rows({{1.2}}), {0.05}};
  p.head.norms[0] = {{0.8}, {0.2}, {0.3}, {0.5}};
  p.head.output = {Matrix::from_rows({{-1.1}}), {0.4}};
  return p;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("init_params shapes and determinism") {
  const FeatureSchema schema = FeatureSchema::default_schema();
  ModelConfig cfg;
  cfg.dim = 4;
  cfg.attn_dim = 3;
  RandomSource r1(7), r2(7);
  const ModelParams a = init_params(schema, cfg, r1);
  const ModelParams b = init_params(schema, cfg, r2);
  CHECK(a == b);
  CHECK(a.attention.projection.rows() == 3);
  CHECK(a.attention.projection.cols() == 4);
  CHECK(a.embedders.size() == 23);
  std::size_t tables = 0, numeric = 0;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (const auto* t = std::get_if<EmbeddingTable>(&a.embedders[i])) {
      ++tables;
      CHECK(t->cardinality() == schema.feature(i).cardinality());
      CHECK(t->weights.cols() == 4);
    } else {
      ++numeric;
      CHECK(std::get<NumericEmbedder>(a.embedders[i]).scale.size() == 4);
    }
  }
  CHECK(tables == 18);
  CHECK(numeric == 5);
  CHECK(a.head.hidden.size() == 2);
  CHECK(a.head.hidden[0].weight.rows() == 4);
  CHECK(a.head.hidden[0].weight.cols() == 32);
  CHECK(a.head.hidden[1].weight.cols() == 16);
  CHECK(a.head.output.weight.rows() == 16);
  CHECK(a.head.norms[1].running_var == Vector(16, 1.0));

  std::size_t count = 0;
  for (const auto& t : a.tensors()) count += t.values.size();
  CHECK(count == a.parameter_count());
  const ModelParams zeros = a.zeros_like();
  for (const auto& t : zeros.tensors())
    CHECK(std::all_of(t.values.begin(), t.values.end(), [](double v) { return v == 0.0; }));

  cfg.hidden = {8, 0};
  RandomSource r3(1);
  CHECK_ERROR_KIND(init_params(schema, cfg, r3), ErrorKind::Parameter);
  cfg.hidden = {8};
  cfg.dim = 0;
  CHECK_ERROR_KIND(init_params(schema, cfg, r3), ErrorKind::Parameter);
  cfg.dim = 4;
  cfg.dropout = 1.0;
  CHECK_ERROR_KIND(init_params(schema, cfg, r3), ErrorKind::Parameter);
}

TEST_CASE("embed_sample") {
  const FeatureSchema schema = FeatureSchema::default_schema();
  RandomSource rng(3);
  const ModelParams p = init_params(schema, {}, rng);
  Sample s = random_sample(schema, rng);
  const std::size_t age = *schema.index_of("Age");
  const std::size_t gender = *schema.index_of("Gender");
  const std::size_t smoking = *schema.index_of("SmokingStatus");
  s.numerical[schema.slot(age)] = 0.0;
  s.categorical[schema.slot(smoking)] = 0;
  s.binary[schema.slot(gender)] = 0;

  Matrix e = embed_sample(s, p);
  CHECK(e.rows() == 23);
  CHECK(e.cols() == 8);
  const auto& off = std::get<NumericEmbedder>(p.embedders[age]).offset;
  CHECK(std::equal(off.begin(), off.end(), e.row(age).begin()));
  const auto& smoke_table = std::get<EmbeddingTable>(p.embedders[smoking]).weights;
  CHECK(std::equal(smoke_table.row(0).begin(), smoke_table.row(0).end(), e.row(smoking).begin()));
  const auto& gender_table = std::get<EmbeddingTable>(p.embedders[gender]).weights;
  CHECK(std::equal(gender_table.row(0).begin(), gender_table.row(0).end(), e.row(gender).begin()));
  s.binary[schema.slot(gender)] = 1;
  e = embed_sample(s, p);
  CHECK(std::equal(gender_table.row(1).begin(), gender_table.row(1).end(), e.row(gender).begin()));

  s.numerical[schema.slot(age)] = 2.0;
  e = embed_sample(s, p);
  const auto& emb = std::get<NumericEmbedder>(p.embedders[age]);
  for (std::size_t j = 0; j < 8; ++j) CHECK(e(age, j) == 2.0 * emb.scale[j] + emb.offset[j]);

  Sample bad = s;
  bad.categorical[schema.slot(smoking)] = 3;
  CHECK_ERROR_KIND(embed_sample(bad, p), ErrorKind::Lookup);
  bad = s;
  bad.numerical[0] = std::nan("");
  CHECK_ERROR_KIND(embed_sample(bad, p), ErrorKind::Domain);
  bad = s;
  bad.binary.pop_back();
  CHECK_ERROR_KIND(embed_sample(bad, p), ErrorKind::Schema);
}

TEST_CASE("attention examples") {
  RandomSource rng(5);
  AttentionParams ap{Matrix(3, 2), {0, 0, 0}, {0, 0, 0}};
  for (double& v : ap.projection.values()) v = gaussian(rng, 0, 1);
  for (double& v : ap.bias) v = gaussian(rng, 0, 1);
  for (double& v : ap.context) v = gaussian(rng, 0, 1);

  const Matrix one = Matrix::from_rows({{0.3, -1.7}});
  AttentionResult r = attention_forward(one, ap);
  CHECK(r.alpha == Vector{1.0});
  CHECK(r.pooled == Vector{0.3, -1.7});

  const Matrix same = Matrix::from_rows({{0.3, -1.7}, {0.3, -1.7}, {0.3, -1.7}, {0.3, -1.7}});
  r = attention_forward(same, ap);
  for (double a : r.alpha) CHECK(a == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(r.pooled[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(r.pooled[1] == doctest::Approx(-1.7).epsilon(1e-15));

  const AttentionParams scalar{Matrix::from_rows({{1.0}}), {0.0}, {1.0}};
  r = attention_forward(Matrix::from_rows({{0.0}, {10.0}}), scalar);
  CHECK(r.alpha[0] == doctest::Approx(0.26894142218048994).epsilon(1e-14));
  CHECK(r.alpha[1] == doctest::Approx(0.73105857781951011).epsilon(1e-14));
  CHECK(r.pooled[0] == doctest::Approx(7.3105857781951009).epsilon(1e-14));

  CHECK_ERROR_KIND(attention_forward(Matrix(2, 5), ap), ErrorKind::Shape);
  CHECK_ERROR_KIND(attention_forward(Matrix(0, 2), ap), ErrorKind::Shape);

  const AttentionResult m = mean_pool_forward(Matrix::from_rows({{1.0}, {2.0}, {6.0}}));
  CHECK(m.alpha == Vector(3, 1.0 / 3.0));
  CHECK(m.pooled[0] == doctest::Approx(3.0));
}

TEST_CASE("attention simplex, convexity and permutation equivariance") {
  RandomSource rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.next_index(25), d = 1 + rng.next_index(8), k = 1 + rng.next_index(8);
    AttentionParams ap{Matrix(k, d), Vector(k), Vector(k)};
    for (double& v : ap.projection.values()) v = gaussian(rng, 0, 2);
    for (double& v : ap.bias) v = gaussian(rng, 0, 1);
    for (double& v : ap.context) v = gaussian(rng, 0, 5);
    Matrix x(n, d);
    for (double& v : x.values()) v = gaussian(rng, 0, 3);
    const AttentionResult r = attention_forward(x, ap);
    double sum = 0.0;
    for (double a : r.alpha) {
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
      sum += a;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    for (std::size_t j = 0; j < d; ++j) {
      double lo = x(0, j), hi = x(0, j);
      for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, x(i, j));
        hi = std::max(hi, x(i, j));
      }
      CHECK(r.pooled[j] >= lo - 1e-12);
      CHECK(r.pooled[j] <= hi + 1e-12);
    }

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    shuffle(perm, rng);
    Matrix px(n, d);
    for (std::size_t i = 0; i < n; ++i)
      std::copy(x.row(perm[i]).begin(), x.row(perm[i]).end(), px.row(i).begin());
    const AttentionResult pr = attention_forward(px, ap);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(pr.alpha[i] - r.alpha[perm[i]]) <= 1e-12);
    for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(pr.pooled[j] - r.pooled[j]) <= 1e-12);
  }
}

TEST_CASE("mlp head") {
  RandomSource rng(2);
  const FeatureSchema schema = FeatureSchema::default_schema();
  ModelParams p = init_params(schema, {}, rng);
  for (auto& t : p.tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
  Matrix h(5, 8);
  for (double& v : h.values()) v = gaussian(rng, 0, 1);
  for (Mode mode : {Mode::Train, Mode::Infer}) {
    const MlpResult r = mlp_forward(h, p.head, mode, rng);
    for (double prob : r.probabilities) CHECK(prob == 0.5);
  }

  RandomSource init(4);
  ModelParams q = init_params(schema, {}, init);
  q.head.dropout = 0.0;
  RandomSource a(1), b(999);
  CHECK(mlp_forward(h, q.head, Mode::Infer, a).probabilities ==
        mlp_forward(h, q.head, Mode::Infer, b).probabilities);
  CHECK(a.state() == RandomSource(1).state());

  CHECK_ERROR_KIND(mlp_forward(Matrix(1, 8), q.head, Mode::Train, a), ErrorKind::Parameter);
  CHECK_ERROR_KIND(mlp_forward(Matrix(3, 7), q.head, Mode::Infer, a), ErrorKind::Shape);

  // Saturated logits still give probabilities strictly inside (0, 1).
  q.head.output.bias[0] = 1e4;
  for (double prob : mlp_forward(h, q.head, Mode::Infer, a).probabilities) {
    CHECK(prob > 0.0);
    CHECK(prob < 1.0);
  }
}

TEST_CASE("forward matches a hand evaluation") {
  const ModelParams p = hand_model();
  Sample s = make_empty_sample(p.schema);
  s.numerical = {1.0};
  s.binary = {1};
  const std::vector<Sample> batch{s};
  const ForwardResult r = forward(batch, p);
  CHECK(std::abs(r.alpha[0][0] - 0.48372134496088276) <= 1e-12);
  CHECK(std::abs(r.alpha[0][1] - 0.5162786550391173) <= 1e-12);
  CHECK(std::abs(r.probabilities[0] - 0.38177674274631362) <= 1e-12);

  const ForwardResult again = forward(batch, p);
  CHECK(again.probabilities == r.probabilities);
  CHECK(again.alpha == r.alpha);
}

TEST_CASE("batch-norm running statistics follow the momentum rule") {
  ModelParams p = hand_model();
  Sample base = make_empty_sample(p.schema);
  base.binary = {0};
  std::vector<Sample> batch(3, base);
  batch[0].numerical = {1.0};
  batch[1].numerical = {-2.0};
  batch[2].numerical = {0.5};
  batch[1].binary = {1};
  RandomSource rng(1);
  const ForwardResult r = forward(batch, p, Mode::Train, rng);
  const double mean = r.cache.mlp.layers[0].batch_mean[0];
  const double var = r.cache.mlp.layers[0].batch_var[0];
  apply_running_stats(p, r.cache);
  CHECK(p.head.norms[0].running_mean[0] == doctest::Approx(0.9 * 0.3 + 0.1 * mean).epsilon(1e-15));
  CHECK(p.head.norms[0].running_var[0] == doctest::Approx(0.9 * 0.5 + 0.1 * var).epsilon(1e-15));
}

TEST_CASE("infer mode is independent of batch composition") {
  const FeatureSchema schema = FeatureSchema::default_schema();
  RandomSource rng(31);
  ModelParams p = init_params(schema, {}, rng);
  for (auto& bn : p.head.norms) {
    for (double& v : bn.running_mean) v = gaussian(rng, 0, 0.5);
    for (double& v : bn.running_var) v = 0.5 + rng.next_unit();
  }
  for (int trial = 0; trial < 20; ++trial) {
    const Sample s = random_sample(schema, rng);
    std::vector<Sample> batch{s};
    const ForwardResult alone = forward(batch, p);
    for (int i = 0; i < 64; ++i) batch.push_back(random_sample(schema, rng));
    std::swap(batch[0], batch[trial % 65]);
    const ForwardResult mixed = forward(batch, p);
    CHECK(mixed.probabilities[trial % 65] == alone.probabilities[0]);
    CHECK(mixed.alpha[trial % 65] == alone.alpha[0]);
  }
}

TEST_CASE("backward contracts") {
  const FeatureSchema schema = FeatureSchema::default_schema();
  RandomSource rng(8);
  ModelConfig cfg;
  cfg.dropout = 0.0;
  const ModelParams p = init_params(schema, cfg, rng);
  const Sample s1 = random_sample(schema, rng);
  const Sample s2 = random_sample(schema, rng);

  // Repeating the batch leaves batch statistics and the mean loss unchanged.
  const std::vector<Sample> two{s1, s2}, four{s1, s2, s1, s2};
  RandomSource r1(1), r2(1);
  const ForwardResult f2 = forward(two, p, Mode::Train, r1);
  const ForwardResult f4 = forward(four, p, Mode::Train, r2);
  const Gradients g2 = backward(p, f2.cache, std::vector<int>{1, 0});
  const Gradients g4 = backward(p, f4.cache, std::vector<int>{1, 0, 1, 0});
  const auto t2 = g2.tensors();
  const auto t4 = g4.tensors();
  for (std::size_t t = 0; t < t2.size(); ++t)
    for (std::size_t j = 0; j < t2[t].values.size(); ++j)
      CHECK_MESSAGE(std::abs(t2[t].values[j] - t4[t].values[j]) <= 1e-9 * std::max(1.0, std::abs(t2[t].values[j])),
                    t2[t].name);

  // Only SmokingStatus = Never appears in the batch: rows 1 and 2 get no gradient.
  std::vector<Sample> batch{random_sample(schema, rng), random_sample(schema, rng), random_sample(schema, rng)};
  const std::size_t smoking = *schema.index_of("SmokingStatus");
  for (auto& b : batch) b.categorical[schema.slot(smoking)] = 0;
  RandomSource r3(2);
  const ForwardResult fb = forward(batch, p, Mode::Train, r3);
  const Gradients g = backward(p, fb.cache, std::vector<int>{1, 0, 1});
  const Matrix& table = std::get<EmbeddingTable>(g.embedders[smoking]).weights;
  for (std::size_t r = 1; r < 3; ++r)
    for (double v : table.row(r)) CHECK(v == 0.0);
  CHECK(std::any_of(table.row(0).begin(), table.row(0).end(), [](double v) { return v != 0.0; }));

  CHECK_ERROR_KIND(backward(p, forward(batch, p).cache, std::vector<int>{1, 0, 1}), ErrorKind::State);
  const ModelParams other = p;
  CHECK_ERROR_KIND(backward(other, fb.cache, std::vector<int>{1, 0, 1}), ErrorKind::State);
  CHECK_ERROR_KIND(backward(p, fb.cache, std::vector<int>{1, 0}), ErrorKind::State);
}

TEST_CASE("analytic gradients match finite differences") {
  const GradCheckReport report = run_gradient_check();
  CHECK(report.cases.size() == 20);
  CHECK(report.passed);
  CHECK(report.worst_error < 1e-4);
  for (const char* family : {"embedding", "numeric_scale", "numeric_offset", "attention.W", "attention.b",
                             "attention.w", "dense[0].weight", "dense[1].weight",
                             "batchnorm[0].gamma", "batchnorm[0].beta", "batchnorm[1].gamma",
                             "batchnorm[1].beta", "output.weight", "output.bias"}) {
    CHECK_MESSAGE(std::find(report.covered.begin(), report.covered.end(), family) != report.covered.end(),
                  family);
  }
  bool saw_mean_pool = false, saw_dropout = false;
  for (const auto& c : report.cases) {
    CHECK(c.features <= 6);
    CHECK(c.batch <= 8);
    CHECK(c.config.dim <= 4);
    CHECK(c.config.attn_dim <= 3);
    for (std::size_t h : c.config.hidden) CHECK(h <= 8);
    saw_mean_pool |= c.config.pooling == Pooling::MeanPool;
    saw_dropout |= c.config.dropout > 0.0;
  }
  CHECK(saw_mean_pool);
  CHECK(saw_dropout);

  const GradCheckReport repeat = run_gradient_check();
  CHECK(repeat.worst_error == report.worst_error);

  GradCheckSettings tampered;
  tampered.tamper = [](Gradients& g) { g.attention.context[0] += 0.01; };
  const GradCheckReport bad = run_gradient_check(tampered);
  CHECK_FALSE(bad.passed);
  CHECK(bad.worst_tensor == "attention.w");
}

}
