#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "csats/tensor.hpp"

namespace csats {

using NamedTensor = std::pair<std::string, Tensor<double>>;

struct GradCheckOptions {
  double step = 1e-5;       // central-difference h
  double tolerance = 1e-4;  // max relative error
  // Denominator floor: rel = |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-6;
};

struct GradCheckFailure {
  std::string param;
  std::size_t coordinate = 0;
  double analytic = 0, numeric = 0, rel_error = 0;
};

struct GradCheckReport {
  bool passed = true;
  double max_rel_error = 0;
  std::string worst_param;
  std::size_t worst_coordinate = 0;
  std::size_t coordinates_checked = 0;
  std::vector<GradCheckFailure> failures;

  std::string summary() const;
};

/// Compares reverse-mode gradients of a scalar function against central differences at 64-bit
/// precision. `loss` must rebuild the graph from the current parameter values on every call; it
/// runs once under a tape for the analytic pass and twice per coordinate without one.
/// Existing gradients on `params` are zeroed first.
GradCheckReport grad_check(const std::function<Tensor<double>()>& loss,
                           const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options = {});

}  // namespace csats
