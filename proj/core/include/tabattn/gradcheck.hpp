#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tabattn/model.hpp"

namespace tabattn {

struct GradCheckCase {
  std::size_t features = 0;
  std::size_t batch = 0;
  ModelConfig config;
  double worst_error = 0.0;
  std::string worst_tensor;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double worst_error = 0.0;
  std::string worst_tensor;
  double tolerance = 0.0;
  bool passed = false;
  /// Tensor-name prefixes that received a non-trivial comparison, e.g.
  /// "embedding", "attention.W", "batchnorm[0].gamma".
  std::vector<std::string> covered;
};

struct GradCheckSettings {
  std::uint64_t seed = 20240601;
  std::size_t configurations = 20;
  double tolerance = 1e-4;
  double step = 1e-5;
  /// Applied to the analytic gradients before comparison (negative controls).
  std::function<void(Gradients&)> tamper;
};

/// Compares backward() against central finite differences of the clamped BCE
/// on random tiny models (n <= 6, d <= 4, k <= 3, hidden <= 8, batch <= 8).
/// The error per coordinate is |a - f| / max(|a|, |f|, 1e-5).
GradCheckReport run_gradient_check(const GradCheckSettings& settings = {});

}  // namespace tabattn
