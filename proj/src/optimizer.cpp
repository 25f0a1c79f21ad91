#include "qw/optimizer.hpp"

#include <cmath>

#include "qw/error.hpp"

namespace qw {

void AdamW::update(std::span<Parameter* const> params) {
  for (const Parameter* p : params) {
    require(p->grad.all_finite(), ErrorKind::non_finite,
            "non-finite gradient in parameter '" + p->name + "'");
  }
  ++state_.step;
  const double t = double(state_.step);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (Parameter* p : params) {
    auto [mit, fresh] = state_.m.try_emplace(p->name, p->value.shape());
    auto& m = mit->second;
    auto& v = state_.v.try_emplace(p->name, p->value.shape()).first->second;
    (void)fresh;
    require(m.shape() == p->value.shape(), ErrorKind::shape_mismatch,
            "optimizer state for '" + p->name + "' has the wrong shape");
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double step = (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
      p->value[i] -= config_.lr * (step + config_.weight_decay * p->value[i]);
    }
  }
}

}  // namespace qw
