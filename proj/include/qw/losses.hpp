#pragma once

#include <cstddef>
#include <span>

#include "qw/grid.hpp"
#include "qw/tensor.hpp"

namespace qw {

struct LossWeights {
  double lambda_rps = 0.5;
  double lambda_ce = 0.1;
  double lambda_kl = 5e-4;
  double charbonnier_eps = 1e-3;

  /// Throws validation if any weight is negative or eps is not positive.
  void validate() const;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// [C,H,W] tensor holding alpha_i at every (c, i, j).
Tensor lat_weight_field(const LatWeights& weights, std::size_t channels,
                        std::size_t n_lon);

/// [K,H,W] one-hot encoding of 0-based labels (row-major [H,W]).
Tensor one_hot(std::span<const std::size_t> labels, std::size_t num_bins,
               std::size_t n_lat, std::size_t n_lon);

/// (1/CHW) sum alpha_i sqrt((pred - target)^2 + eps^2)
Var charbonnier_loss(Var pred, Var target, const LatWeights& weights, double eps);

/// Latitude-weighted mean over cells of -sum_l Q_l log max(Qhat_l, 1e-12).
/// probs and onehot are [K,H,W].
Var ce_loss(Var probs, const Tensor& onehot, const LatWeights& weights);

/// Latitude-weighted mean over cells of sum_k (cumsum(Qhat)_k - cumsum(Q)_k)^2.
Var rps_loss(Var probs, const Tensor& onehot, const LatWeights& weights);

/// Mean over elements of KL(N(mu_q, sigma_q) || N(mu_p, sigma_p)) for
/// diagonal Gaussians given as log standard deviations (clamped).
Var kl_diag_gaussians(Var mu_q, Var log_sigma_q, Var mu_p, Var log_sigma_p);

/// reg + lambda_rps rps + lambda_ce ce + lambda_kl kl
Var total_objective(Var reg, Var rps, Var ce, Var kl, const LossWeights& w);
double total_objective(double reg, double rps, double ce, double kl,
                       const LossWeights& w);

}  // namespace qw
