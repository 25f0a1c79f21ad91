#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "qw/tensor.hpp"

namespace qw {

struct AdamWConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Moment buffers keyed by parameter name.
struct OptimizerState {
  std::uint64_t step = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  const AdamWConfig& config() const { return config_; }
  OptimizerState& state() { return state_; }
  const OptimizerState& state() const { return state_; }

  /// Bias-corrected Adam step with decoupled decay
  /// (theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)).
  /// Throws non_finite naming the first parameter with a bad gradient;
  /// nothing is modified in that case.
  void update(std::span<Parameter* const> params);

 private:
  AdamWConfig config_;
  OptimizerState state_;
};

}  // namespace qw
