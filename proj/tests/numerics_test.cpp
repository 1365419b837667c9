#include <cmath>
#include <limits>
#include <numbers>

#include "support.hpp"
#include "tabattn/numerics.hpp"

using namespace tabattn;

TEST_SUITE("numerics") {

TEST_CASE("matmul") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{5, 6}, {7, 8}});
  CHECK(matmul(Matrix::identity(2), b) == b);
  CHECK(matmul(a, b) == Matrix::from_rows({{19, 22}, {43, 50}}));

  try {
    (void)matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Shape);
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x3]", msg.find("[2x3]") + 1) != std::string::npos);
  }
  CHECK_ERROR_KIND(Matrix(2, 2, Vector(3)), ErrorKind::Shape);
  CHECK_ERROR_KIND(Matrix::from_rows({{1, 2}, {3}}), ErrorKind::Shape);
}

TEST_CASE("matmul is associative on random chains") {
  RandomSource rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.next_index(6), n = 1 + rng.next_index(6);
    const std::size_t p = 1 + rng.next_index(6), q = 1 + rng.next_index(6);
    auto random = [&](std::size_t r, std::size_t c) {
      Matrix out(r, c);
      for (double& v : out.values()) v = uniform(rng, -3, 3);
      return out;
    };
    const Matrix a = random(m, n), b = random(n, p), c = random(p, q);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      const double l = left.values()[i], r = right.values()[i];
      CHECK(std::abs(l - r) <= 1e-9 * std::max({1.0, std::abs(l), std::abs(r)}));
    }
  }
}

TEST_CASE("transpose, matvec and dot") {
  const Matrix a = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(transpose(a) == Matrix::from_rows({{1, 4}, {2, 5}, {3, 6}}));
  CHECK(matvec(a, Vector{1, 0, -1}) == Vector{-2, -2});
  CHECK(dot(Vector{1, 2, 3}, Vector{4, 5, 6}) == 32.0);
  CHECK_ERROR_KIND(matvec(a, Vector{1, 2}), ErrorKind::Shape);
  CHECK_ERROR_KIND(dot(Vector{1}, Vector{1, 2}), ErrorKind::Shape);
}

TEST_CASE("softmax") {
  for (double c : {-5.0, 0.0, 3.5, 690.0}) {
    const Vector s = softmax(Vector{c, c, c});
    for (double v : s) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  const Vector s = softmax(Vector{0.0, std::numbers::ln2});
  CHECK(s[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_ERROR_KIND(softmax(Vector{}), ErrorKind::Domain);

  const Vector big = softmax(Vector{700.0, 699.0, -700.0});
  CHECK(all_finite(big));
  CHECK(big[0] > big[1]);
}

TEST_CASE("softmax stays on the simplex and is shift invariant") {
  RandomSource rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    Vector v(1 + rng.next_index(30));
    for (double& x : v) x = uniform(rng, -700, 700);
    const Vector s = softmax(v);
    double sum = 0.0;
    for (double x : s) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    Vector small(v.size());
    for (double& x : small) x = uniform(rng, -20, 20);
    const double shift = uniform(rng, -50, 50);
    Vector shifted = small;
    for (double& x : shifted) x += shift;
    const Vector a = softmax(small), b = softmax(shifted);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
  }
}

TEST_CASE("activations") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(relu(-3.2) == 0.0);
  CHECK(relu(3.2) == 3.2);
  CHECK(tanh_act(10.0) == doctest::Approx(0.99999999587769273).epsilon(1e-15));
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) <= 1.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
  CHECK(relu(Vector{-1, 2}) == Vector{0, 2});
  const Vector t = tanh_act(Vector{0.0, 10.0});
  CHECK(t[0] == 0.0);
  CHECK(sigmoid(Vector{0.0}) == Vector{0.5});
  CHECK_FALSE(all_finite(Vector{1.0, std::numeric_limits<double>::quiet_NaN()}));
}

TEST_CASE("finite differences") {
  const Vector g = finite_diff_grad([](const Vector& x) { return x[0] * x[0]; }, Vector{3.0});
  CHECK(std::abs(g[0] - 6.0) <= 1e-6);

  const Vector z = finite_diff_grad([](const Vector&) { return 4.2; }, Vector{1, 2, 3});
  CHECK(z == Vector{0, 0, 0});

  CHECK_ERROR_KIND(finite_diff_grad([](const Vector& x) { return std::log(x[0]); }, Vector{0.0}),
                   ErrorKind::Domain);

  RandomSource rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Vector x(1 + rng.next_index(5)), a(x.size());
    for (double& v : x) v = uniform(rng, -2, 2);
    for (double& v : a) v = uniform(rng, -2, 2);
    auto f = [&](const Vector& p) {
      double s = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) s += a[i] * p[i] * p[i] + std::tanh(p[i]);
      return s;
    };
    const Vector num = finite_diff_grad(f, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double t = std::tanh(x[i]);
      const double exact = 2 * a[i] * x[i] + 1 - t * t;
      CHECK(std::abs(num[i] - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));
    }
  }
}

TEST_CASE("splitmix64 reference stream") {
  RandomSource rng(0);
  CHECK(rng.next_u64() == 0xe220a8397b1dcdafULL);
  CHECK(rng.next_u64() == 0x6e789e6aa1b965f4ULL);
  CHECK(rng.next_u64() == 0x06c45d188009454fULL);

  RandomSource a(99), b(99);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  RandomSource fork = a;
  CHECK(fork.next_unit() == a.next_unit());
}

TEST_CASE("uniform and gaussian draws") {
  RandomSource rng(3);
  CHECK(gaussian(rng, 2.5, 0.0) == 2.5);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = uniform(rng, 0.0, 1.0);
    CHECK_FALSE((u < 0.0 || u >= 1.0));
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) <= 0.01);

  double gsum = 0.0, gsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = gaussian(rng, 1.0, 2.0);
    gsum += g;
    gsq += g * g;
  }
  const double mean = gsum / n;
  CHECK(std::abs(mean - 1.0) <= 0.03);
  CHECK(std::abs(std::sqrt(gsq / n - mean * mean) - 2.0) <= 0.03);

  CHECK_ERROR_KIND(uniform(rng, 1.0, 0.0), ErrorKind::Domain);
  CHECK_ERROR_KIND(gaussian(rng, 0.0, -1.0), ErrorKind::Domain);
  CHECK_ERROR_KIND(rng.next_index(0), ErrorKind::Domain);

  RandomSource r1(8), r2(8);
  for (int i = 0; i < 20; ++i) CHECK(gaussian(r1, 0, 1) == gaussian(r2, 0, 1));
}

TEST_CASE("format_double round-trips") {
  RandomSource rng(21);
  for (int i = 0; i < 1000; ++i) {
    const double x = gaussian(rng, 0.0, 1e3) * std::pow(10.0, static_cast<double>(rng.next_index(40)) - 20);
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.1) == "0.10000000000000001");
}

}
