#include "qw/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qw/error.hpp"
#include "qw/ops.hpp"
#include "qw/rng.hpp"

namespace qw {

void ModelConfig::validate() const {
  require(channels >= 1 && precip_channel < channels, ErrorKind::validation,
          "model needs >= 1 channel and a valid precipitation channel");
  require(num_bins >= 2, ErrorKind::validation, "K must be >= 2");
  require(hidden >= 1 && blocks >= 1 && encoder_hidden >= 1, ErrorKind::validation,
          "model widths and depth must be positive");
  require(tau_init > 0.0 && tau_min > 0.0, ErrorKind::validation,
          "temperature settings must be positive");
}

TemporalConditioning TemporalConditioning::make(std::size_t step, const Date& valid_date,
                                                double step_scale) {
  const double angle = 2.0 * std::numbers::pi * double(valid_date.day_of_year()) / 365.25;
  return {double(step) * step_scale, std::sin(angle), std::cos(angle)};
}

Normalizer Normalizer::fit(std::span<const Tensor> states, std::size_t precip_channel) {
  require(!states.empty(), ErrorKind::validation, "normalizer needs data");
  const std::size_t c = states.front().dim(0);
  const std::size_t hw = states.front().size() / c;
  Normalizer n;
  n.precip_channel = precip_channel;
  n.mean.assign(c, 0.0);
  n.stddev.assign(c, 0.0);
  auto value = [&](const Tensor& s, std::size_t ch, std::size_t p) {
    const double v = s[ch * hw + p];
    return ch == precip_channel ? std::log1p(std::max(v, 0.0)) : v;
  };
  const double count = double(states.size() * hw);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (const auto& st : states)
      for (std::size_t p = 0; p < hw; ++p) s += value(st, ch, p);
    const double m = s / count;
    double v = 0.0;
    for (const auto& st : states)
      for (std::size_t p = 0; p < hw; ++p) {
        const double d = value(st, ch, p) - m;
        v += d * d;
      }
    n.mean[ch] = m;
    n.stddev[ch] = std::max(std::sqrt(v / count), 1e-6);
  }
  return n;
}

Tensor Normalizer::apply(const Tensor& raw) const {
  const std::size_t c = raw.dim(0);
  require(c == mean.size(), ErrorKind::shape_mismatch,
          "normalizer channel count does not match state");
  const std::size_t hw = raw.size() / c;
  Tensor out(raw.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < hw; ++p) {
      double v = raw[ch * hw + p];
      if (ch == precip_channel) v = std::log1p(std::max(v, 0.0));
      out[ch * hw + p] = (v - mean[ch]) / stddev[ch];
    }
  return out;
}

double Normalizer::invert_value(std::size_t channel, double v) const {
  const double x = v * stddev[channel] + mean[channel];
  return channel == precip_channel ? std::max(std::expm1(x), 0.0) : x;
}

Tensor Normalizer::invert(const Tensor& normalized) const {
  const std::size_t c = normalized.dim(0);
  require(c == mean.size(), ErrorKind::shape_mismatch,
          "normalizer channel count does not match state");
  const std::size_t hw = normalized.size() / c;
  Tensor out(normalized.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < hw; ++p)
      out[ch * hw + p] = invert_value(ch, normalized[ch * hw + p]);
  return out;
}

namespace {

void fill_normal(Tensor& t, Rng& rng, double sd) {
  for (auto& v : t.data()) v = sd * rng.normal();
}

}  // namespace

std::size_t Forecaster::add_param(std::string name, Shape shape) {
  params_.emplace_back(std::move(name), Tensor(std::move(shape)));
  return params_.size() - 1;
}

Forecaster::Forecaster(const ModelConfig& config, std::size_t n_lat, std::size_t n_lon,
                       std::uint64_t seed)
    : config_(config), n_lat_(n_lat), n_lon_(n_lon) {
  config_.validate();
  const std::size_t c = config_.channels, h = config_.hidden, e = config_.encoder_hidden;
  const std::size_t k = config_.num_bins;
  params_.reserve(64);

  embed_w_ = add_param("trunk.embed.w", {h, 2 * c, 3, 3});
  embed_b_ = add_param("trunk.embed.b", {h});
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    const std::string pre = "trunk.block" + std::to_string(b);
    block_w_.push_back(add_param(pre + ".conv.w", {h, h, 3, 3}));
    block_b_.push_back(add_param(pre + ".conv.b", {h}));
    block_film_.push_back({add_param(pre + ".film.w", {3, 2 * h}),
                           add_param(pre + ".film.b", {1, 2 * h})});
  }
  reg_film_ = {add_param("reg_head.film.w", {3, 4 * h}), add_param("reg_head.film.b", {1, 4 * h})};
  reg_w_ = add_param("reg_head.out.w", {c, 2 * h, 3, 3});
  reg_b_ = add_param("reg_head.out.b", {c});
  cls_film_ = {add_param("cls_head.film.w", {3, 4 * h}), add_param("cls_head.film.b", {1, 4 * h})};
  cls_w_ = add_param("cls_head.out.w", {k, 2 * h, 3, 3});
  cls_b_ = add_param("cls_head.out.b", {k});
  tau_ = add_param("tau", {1});
  params_[tau_].value[0] = config_.tau_init;

  auto encoder = [&](const std::string& pre) {
    return Encoder{add_param(pre + ".conv1.w", {e, 2 * c, 3, 3}), add_param(pre + ".conv1.b", {e}),
                   add_param(pre + ".out.w", {2 * c, e, 3, 3}), add_param(pre + ".out.b", {2 * c})};
  };
  prior_ = encoder("prior");
  posterior_ = encoder("posterior");

  // Hidden convolutions get scaled normal init; every output projection
  // (both heads, both encoders) and every scale-shift layer starts at zero.
  Rng rng(derive_seed(seed, {0x1D}));
  auto conv_init = [&](std::size_t idx) {
    const auto& s = params_[idx].value.shape();
    fill_normal(params_[idx].value, rng, 1.0 / std::sqrt(double(s[1] * 9)));
  };
  conv_init(embed_w_);
  for (auto w : block_w_) conv_init(w);
  conv_init(prior_.w1);
  conv_init(posterior_.w1);
  for (auto& prm : params_) prm.zero_grad();
}

std::vector<Parameter*> Forecaster::parameter_ptrs() {
  std::vector<Parameter*> out;
  for (auto& prm : params_) out.push_back(&prm);
  return out;
}

Parameter& Forecaster::parameter(const std::string& name) {
  for (auto& prm : params_)
    if (prm.name == name) return prm;
  fail(ErrorKind::validation, "no parameter named '" + name + "'");
}

void Forecaster::zero_grad() {
  for (auto& prm : params_) prm.zero_grad();
}

double Forecaster::temperature() const {
  return std::max(params_[tau_].value[0], config_.tau_min);
}

void Forecaster::randomize_all(std::uint64_t seed, double scale_factor) {
  Rng rng(derive_seed(seed, {0x2A}));
  for (auto& prm : params_) {
    if (&prm == &params_[tau_]) {
      prm.value[0] = 0.7 + 0.6 * rng.uniform();
      continue;
    }
    const auto& s = prm.value.shape();
    const double fan_in = s.size() == 4 ? double(s[1] * 9) : double(s[0]);
    fill_normal(prm.value, rng, scale_factor / std::sqrt(fan_in));
  }
}

GaussianFieldParams Forecaster::encode(Tape& tape, const Encoder& enc, Var a, Var b) {
  Var x = concat({a, b});
  Var h = gelu(conv2d(x, p(tape, enc.w1), p(tape, enc.b1)));
  Var out = conv2d(h, p(tape, enc.w2), p(tape, enc.b2));
  const std::size_t c = config_.channels;
  return {slice(out, 0, c), clamp(slice(out, c, 2 * c), kLogSigmaMin, kLogSigmaMax)};
}

GaussianFieldParams Forecaster::prior_params(Tape& tape, Var previous, Var current) {
  return encode(tape, prior_, previous, current);
}

GaussianFieldParams Forecaster::posterior_params(Tape& tape, Var current, Var next) {
  return encode(tape, posterior_, current, next);
}

Var Forecaster::perturb(Var current, const GaussianFieldParams& theta, const Tensor& noise) {
  return add(current, gaussian_sample(theta.mu, theta.log_sigma, noise));
}

Var Forecaster::film(Tape& tape, const Film& f, Var cond, Var x) {
  const std::size_t ch = x.shape()[0];
  Var mod = reshape(add(matmul(cond, p(tape, f.w)), p(tape, f.b)), {2 * ch});
  return scale_shift(x, add_scalar(slice(mod, 0, ch), 1.0), slice(mod, ch, 2 * ch));
}

DualHeadOutput Forecaster::forward(Tape& tape, Var previous, Var current,
                                   const TemporalConditioning& cond) {
  const Shape state{config_.channels, n_lat_, n_lon_};
  require(previous.shape() == state && current.shape() == state, ErrorKind::shape_mismatch,
          "forward: expected states of shape " + shape_str(state));
  Var c = tape.constant(Tensor({1, 3}, {cond.step, cond.doy_sin, cond.doy_cos}));

  Var h0 = gelu(conv2d(concat({previous, current}), p(tape, embed_w_), p(tape, embed_b_)));
  Var h = h0;
  for (std::size_t b = 0; b < block_w_.size(); ++b) {
    Var u = conv2d(h, p(tape, block_w_[b]), p(tape, block_b_[b]));
    h = add(h, gelu(film(tape, block_film_[b], c, u)));
  }
  Var fused = concat({h, h0});

  DualHeadOutput out;
  out.regression = conv2d(gelu(film(tape, reg_film_, c, fused)), p(tape, reg_w_), p(tape, reg_b_));
  out.logits = conv2d(gelu(film(tape, cls_film_, c, fused)), p(tape, cls_w_), p(tape, cls_b_));
  out.probs = probabilities(tape, out.logits);
  return out;
}

Var Forecaster::probabilities(Tape& tape, Var logits) {
  Var tau = clamp(p(tape, tau_), config_.tau_min, std::numeric_limits<double>::max());
  return softmax(div_scalar(logits, tau), 0);
}

RolloutResult rollout(Forecaster& model, Tape& grad_tape, const RolloutRequest& req) {
  require(req.window != nullptr && req.noise != nullptr, ErrorKind::validation,
          "rollout: window and noise are required");
  require(req.n_steps >= 1, ErrorKind::validation, "rollout: n_steps must be >= 1");
  const bool train = req.mode == RolloutMode::train;
  require(!train || req.next_state != nullptr, ErrorKind::validation,
          "rollout: train mode needs the next state for the posterior");

  RolloutResult res;
  res.scratch = std::make_unique<Tape>(false);
  Tape& scratch = *res.scratch;
  const std::size_t first_grad = req.detach_states ? req.grad_from : 1;
  auto on_grad = [&](std::size_t step) {
    return grad_tape.grad_enabled() && step >= first_grad && step <= req.grad_to;
  };

  // Encoders run on the grad tape in train mode (the KL term needs them) or
  // when the first step itself is differentiated.
  Tape& enc_tape = (train || on_grad(1) || !grad_tape.grad_enabled()) ? grad_tape : scratch;
  Var prev0 = enc_tape.constant(req.window->previous);
  Var cur0 = enc_tape.constant(req.window->current);
  res.prior = model.prior_params(enc_tape, prev0, cur0);
  const GaussianFieldParams* theta = &res.prior;
  if (train) {
    res.posterior = model.posterior_params(enc_tape, cur0, enc_tape.constant(*req.next_state));
    theta = &res.posterior;
  }
  Var perturbed = model.perturb(cur0, *theta, *req.noise);

  Tensor prev_state = req.window->previous;
  Tensor cur_state = perturbed.value();
  Var prev_link, cur_link;  // connected states when not detaching
  for (std::size_t step = 1; step <= req.n_steps; ++step) {
    // Without gradients everything stays on the caller's tape.
    Tape& tape = on_grad(step) || !grad_tape.grad_enabled() ? grad_tape : scratch;
    const bool linked = !req.detach_states && step > 1 && on_grad(step - 1) && &tape == &grad_tape;
    Var prev_v = linked ? prev_link : tape.constant(prev_state);
    Var cur_v = linked ? cur_link
                       : (step == 1 && &tape == &enc_tape) ? perturbed : tape.constant(cur_state);
    const auto cond = TemporalConditioning::make(
        step, req.init_date.plus_days(long(step)), model.config().step_scale);
    DualHeadOutput out = model.forward(tape, prev_v, cur_v, cond);
    for (double v : out.regression.value().data()) {
      if (std::abs(v) > kDivergenceLimit) {
        fail(ErrorKind::divergence, "rollout diverged at step " + std::to_string(step) +
                                        " from " + req.init_date.iso());
      }
    }
    prev_state = std::move(cur_state);
    cur_state = out.regression.value();
    prev_link = cur_v;
    cur_link = out.regression;
    res.steps.push_back(out);
  }
  return res;
}

}  // namespace qw
