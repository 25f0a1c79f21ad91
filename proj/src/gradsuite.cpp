#include "qw/gradsuite.hpp"

#include "qw/losses.hpp"
#include "qw/ops.hpp"
#include "qw/pipeline.hpp"
#include "qw/rng.hpp"

namespace qw {

namespace {

Tensor random_tensor(Rng& rng, const Shape& shape, double sd = 1.0) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = sd * rng.normal();
  return t;
}

std::vector<std::size_t> random_labels(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> out(n);
  for (auto& l : out) l = std::size_t(rng.below(k));
  return out;
}

// Small world shared by every seed of the end-to-end check.
const World& suite_world(const GradSuiteOptions& o) {
  static std::vector<std::pair<std::vector<std::size_t>, World>> cache;
  const std::vector<std::size_t> key{o.n_lat, o.n_lon, o.channels, o.num_bins};
  for (const auto& [k, w] : cache)
    if (k == key) return w;
  RunConfig c;
  c.world.n_lat = o.n_lat;
  c.world.n_lon = o.n_lon;
  c.world.channels = o.channels;
  c.model.channels = o.channels;
  c.model.num_bins = o.num_bins;
  c.data_start = Date(2001, 11, 1);
  c.data_end = Date(2022, 3, 31);
  c.train_years = {2017, 2017};
  c.test_years = {2022, 2022};
  cache.emplace_back(key, build_world(c));
  return cache.back().second;
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed, const GradSuiteOptions& o) {
  std::vector<GradSuiteEntry> out;
  Rng rng(derive_seed(seed, {0x96AD}));
  const Shape state{o.channels, o.n_lat, o.n_lon};
  const Shape bins{o.num_bins, o.n_lat, o.n_lon};
  const LatLonGrid grid = LatLonGrid::regular(o.n_lat, o.n_lon);
  const LatWeights weights = latitude_weights(grid);
  const std::size_t n = o.n_lat * o.n_lon;

  {
    Parameter pred("pred", random_tensor(rng, state));
    const Tensor target = random_tensor(rng, state);
    std::vector<Parameter*> ps{&pred};
    out.push_back({"charbonnier", seed, grad_check([&](Tape& t) {
                     return charbonnier_loss(t.param(pred), t.constant(target), weights, 1e-3);
                   }, ps, 1e-5)});
  }
  {
    Parameter logits("logits", random_tensor(rng, bins));
    const Tensor onehot = one_hot(random_labels(rng, n, o.num_bins), o.num_bins, o.n_lat, o.n_lon);
    std::vector<Parameter*> ps{&logits};
    out.push_back({"ce", seed, grad_check([&](Tape& t) {
                     return ce_loss(softmax(t.param(logits), 0), onehot, weights);
                   }, ps)});
    out.push_back({"rps", seed, grad_check([&](Tape& t) {
                     return rps_loss(softmax(t.param(logits), 0), onehot, weights);
                   }, ps)});
  }
  {
    Parameter mq("mu_q", random_tensor(rng, state)), lq("log_sigma_q", random_tensor(rng, state, 0.5));
    Parameter mp("mu_p", random_tensor(rng, state)), lp("log_sigma_p", random_tensor(rng, state, 0.5));
    std::vector<Parameter*> ps{&mq, &lq, &mp, &lp};
    out.push_back({"kl", seed, grad_check([&](Tape& t) {
                     return kl_diag_gaussians(t.param(mq), t.param(lq), t.param(mp), t.param(lp));
                   }, ps)});
  }
  {
    const World& world = suite_world(o);
    ModelConfig mc;
    mc.channels = o.channels;
    mc.num_bins = o.num_bins;
    mc.hidden = 4;
    mc.blocks = 1;
    mc.encoder_hidden = 4;
    Forecaster model(mc, o.n_lat, o.n_lon, derive_seed(seed, {1}));
    model.randomize_all(derive_seed(seed, {2}));
    const auto pool = training_inits(world.data, world.config.train_years, 2);
    GroupRequest req;
    req.init = pool[rng.below(pool.size())];
    req.depth = 2;
    req.supervise_from = 1;
    req.group = 2;
    req.noise_seed = derive_seed(seed, {3});
    req.detach_states = false;
    const LossWeights w;
    const auto ps = model.parameter_ptrs();
    out.push_back({"objective", seed, grad_check([&](Tape& t) {
                     return group_objective(t, model, world.data, req, w);
                   }, ps, 2e-4, o.max_per_param)});
    // A detached rollout is exactly differentiable over its first step only.
    req.detach_states = true;
    req.depth = 1;
    out.push_back({"objective_detached", seed, grad_check([&](Tape& t) {
                     return group_objective(t, model, world.data, req, w);
                   }, ps, 2e-4, o.max_per_param)});
  }
  return out;
}

}  // namespace qw
