#include "qw/losses.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "qw/error.hpp"
#include "qw/ops.hpp"

namespace qw {

void LossWeights::validate() const {
  require(lambda_rps >= 0.0 && lambda_ce >= 0.0 && lambda_kl >= 0.0,
          ErrorKind::validation, "loss weights must be nonnegative");
  require(charbonnier_eps > 0.0, ErrorKind::validation,
          "Charbonnier epsilon must be positive");
}

Tensor lat_weight_field(const LatWeights& weights, std::size_t channels,
                        std::size_t n_lon) {
  const std::size_t h = weights.n_lat();
  Tensor w({channels, h, n_lon});
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < n_lon; ++j) w.at(c, i, j) = weights.alpha[i];
  return w;
}

Tensor one_hot(std::span<const std::size_t> labels, std::size_t num_bins,
               std::size_t n_lat, std::size_t n_lon) {
  require(labels.size() == n_lat * n_lon, ErrorKind::shape_mismatch,
          "one_hot: label count does not match grid");
  Tensor t({num_bins, n_lat, n_lon});
  const std::size_t hw = n_lat * n_lon;
  for (std::size_t c = 0; c < hw; ++c) {
    require(labels[c] < num_bins, ErrorKind::validation,
            "one_hot: label " + std::to_string(labels[c]) + " outside 0.." +
                std::to_string(num_bins - 1));
    t[labels[c] * hw + c] = 1.0;
  }
  return t;
}

namespace {

void check_probabilistic_inputs(const Var& probs, const Tensor& onehot,
                                const LatWeights& weights, const char* who) {
  const auto& s = probs.shape();
  require(s.size() == 3 && onehot.shape() == s && s[1] == weights.n_lat(),
          ErrorKind::shape_mismatch,
          std::string(who) + ": probs " + shape_str(s) + ", target " +
              shape_str(onehot.shape()));
  const std::size_t k = s[0], hw = s[1] * s[2];
  const auto& p = probs.value();
  for (std::size_t c = 0; c < hw; ++c) {
    double ps = 0.0, qs = 0.0;
    for (std::size_t l = 0; l < k; ++l) {
      const double q = onehot[l * hw + c];
      require(q == 0.0 || q == 1.0, ErrorKind::validation,
              std::string(who) + ": target is not one-hot");
      qs += q;
      ps += p[l * hw + c];
    }
    require(qs == 1.0, ErrorKind::validation,
            std::string(who) + ": target is not one-hot");
    require(std::abs(ps - 1.0) <= 1e-6, ErrorKind::validation,
            std::string(who) + ": probabilities do not sum to 1");
  }
}

}  // namespace

Var charbonnier_loss(Var pred, Var target, const LatWeights& weights, double eps) {
  const auto& s = pred.shape();
  require(s.size() == 3 && target.shape() == s && s[1] == weights.n_lat(),
          ErrorKind::shape_mismatch,
          "charbonnier_loss: prediction " + shape_str(s) + ", target " +
              shape_str(target.shape()));
  require(eps > 0.0, ErrorKind::validation, "charbonnier_loss: eps must be positive");
  Tape& t = pred.tape();
  Var per_cell = sqrt(add_scalar(square(sub(pred, target)), eps * eps));
  Var w = t.constant(lat_weight_field(weights, s[0], s[2]));
  return mean(mul(per_cell, w));
}

Var ce_loss(Var probs, const Tensor& onehot, const LatWeights& weights) {
  check_probabilistic_inputs(probs, onehot, weights, "ce_loss");
  const auto& s = probs.shape();
  Tape& t = probs.tape();
  Tensor wq = lat_weight_field(weights, s[0], s[2]);
  for (std::size_t i = 0; i < wq.size(); ++i) wq[i] *= -onehot[i];
  Var logp = log(clamp(probs, kProbabilityFloor, std::numeric_limits<double>::max()));
  return scale(sum(mul(logp, t.constant(std::move(wq)))), 1.0 / double(s[1] * s[2]));
}

Var rps_loss(Var probs, const Tensor& onehot, const LatWeights& weights) {
  check_probabilistic_inputs(probs, onehot, weights, "rps_loss");
  const auto& s = probs.shape();
  Tape& t = probs.tape();
  Tensor cum_obs(onehot.shape());
  const std::size_t hw = s[1] * s[2];
  for (std::size_t c = 0; c < hw; ++c) {
    double run = 0.0;
    for (std::size_t l = 0; l < s[0]; ++l) {
      run += onehot[l * hw + c];
      cum_obs[l * hw + c] = run;
    }
  }
  Var diff = sub(cumsum(probs, 0), t.constant(std::move(cum_obs)));
  Var w = t.constant(lat_weight_field(weights, s[0], s[2]));
  return scale(sum(mul(square(diff), w)), 1.0 / double(hw));
}

Var kl_diag_gaussians(Var mu_q, Var log_sigma_q, Var mu_p, Var log_sigma_p) {
  require(mu_q.shape() == log_sigma_q.shape() && mu_q.shape() == mu_p.shape() &&
              mu_p.shape() == log_sigma_p.shape(),
          ErrorKind::shape_mismatch, "kl_diag_gaussians: parameter shapes differ");
  Var lq = clamp(log_sigma_q, kLogSigmaMin, kLogSigmaMax);
  Var lp = clamp(log_sigma_p, kLogSigmaMin, kLogSigmaMax);
  // log(sp/sq) + sq^2/(2 sp^2) + (mq-mp)^2/(2 sp^2) - 1/2
  Var log_ratio = sub(lp, lq);
  Var var_ratio = exp(scale(sub(lq, lp), 2.0));
  Var mean_term = mul(square(sub(mu_q, mu_p)), exp(scale(lp, -2.0)));
  Var per = add_scalar(add(log_ratio, scale(add(var_ratio, mean_term), 0.5)), -0.5);
  return mean(per);
}

Var total_objective(Var reg, Var rps, Var ce, Var kl, const LossWeights& w) {
  return add(add(reg, scale(rps, w.lambda_rps)),
             add(scale(ce, w.lambda_ce), scale(kl, w.lambda_kl)));
}

double total_objective(double reg, double rps, double ce, double kl,
                       const LossWeights& w) {
  return reg + w.lambda_rps * rps + w.lambda_ce * ce + w.lambda_kl * kl;
}

}  // namespace qw
