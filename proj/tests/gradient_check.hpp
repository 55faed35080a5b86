#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "smishing/nn.hpp"

namespace smishing::testing {

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// Compares analytic gradients against central differences on every scalar.
// Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
// parameters with vanishing gradient from dividing roundoff by zero.
inline GradientCheckResult check_gradients(nn::ParameterSet& params, const nn::Gradients& analytic,
                                           const std::function<double()>& loss, double step = 1e-5,
                                           double floor = 1e-7) {
  GradientCheckResult result;
  for (std::size_t p = 0; p < params.values.size(); ++p) {
    nn::Matrix& m = params.values[p];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + step;
      const double up = loss();
      m.data()[i] = saved - step;
      const double down = loss();
      m.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[p].data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++result.checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst = params.names[p] + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace smishing::testing
