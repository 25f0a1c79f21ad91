#include "qw/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qw/error.hpp"

namespace qw {

namespace {

double evaluate(const LossBuilder& build) {
  Tape tape(false);
  const double v = build(tape).item();
  require(std::isfinite(v), ErrorKind::non_finite, "grad_check: non-finite loss");
  return v;
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& build, std::span<Parameter* const> params,
                           double h, std::size_t max_per_param) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = build(tape);
    require(std::isfinite(loss.item()), ErrorKind::non_finite,
            "grad_check: non-finite loss");
    tape.backward(loss);
  }

  GradCheckResult result;
  for (Parameter* p : params) {
    const std::size_t n = p->value.size();
    std::vector<std::size_t> idx;
    if (max_per_param == 0 || max_per_param >= n) {
      idx.resize(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    } else {
      for (std::size_t k = 0; k < max_per_param; ++k)
        idx.push_back(k * n / max_per_param);
    }
    for (std::size_t i : idx) {
      const double saved = p->value[i];
      auto at = [&](double offset) {
        p->value[i] = saved + offset;
        return evaluate(build);
      };
      const double f1 = at(h), f_1 = at(-h), f2 = at(2.0 * h), f_2 = at(-2.0 * h);
      p->value[i] = saved;

      const double numeric = (8.0 * (f1 - f_1) - (f2 - f_2)) / (12.0 * h);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (rel > result.max_rel_error || result.checked == 1) {
        result.max_rel_error = std::max(result.max_rel_error, rel);
        if (rel >= result.max_rel_error) {
          result.worst_param = p->name;
          result.worst_index = i;
          result.analytic = analytic;
          result.numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace qw
