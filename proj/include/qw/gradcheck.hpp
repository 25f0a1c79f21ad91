#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "qw/tensor.hpp"

namespace qw {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Builds a scalar loss on the given tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients with fourth-order central differences
/// (8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h. The relative error of each element uses
/// max(|analytic|, |numeric|, 1e-8) as denominator. With max_per_param > 0
/// only that many evenly spaced elements of each parameter are probed.
GradCheckResult grad_check(const LossBuilder& build, std::span<Parameter* const> params,
                           double h = 1e-3, std::size_t max_per_param = 0);

}  // namespace qw
