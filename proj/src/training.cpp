#include "qw/training.hpp"

#include <algorithm>

#include <json.hpp>

#include "qw/error.hpp"
#include "qw/ops.hpp"
#include "qw/rng.hpp"

namespace qw {

const Tensor& ForecastDataset::state(const Date& d) const {
  require(covers(d), ErrorKind::missing_data, "no state for " + d.iso());
  return states[std::size_t(d.days_since(start))];
}

StateWindow ForecastDataset::window(const Date& init) const {
  return {state(init.plus_days(-1)), state(init)};
}

std::vector<std::size_t> ForecastDataset::labels(const Date& valid) const {
  return discretize_field(weekly_precip.at(valid), clim.thresholds_at(valid));
}

Tensor ForecastDataset::onehot(const Date& valid) const {
  return one_hot(labels(valid), num_bins, grid.n_lat(), grid.n_lon());
}

ForecastDataset make_dataset(const LatLonGrid& grid, const std::vector<DailyCube>& channels,
                             const Normalizer& norm, const Climatology& clim,
                             std::size_t num_bins) {
  require(!channels.empty(), ErrorKind::validation, "dataset needs at least one channel");
  const std::size_t n = grid.n_cells();
  for (const auto& c : channels)
    require(c.n_cells == n && c.start == channels[0].start && c.n_days() == channels[0].n_days(),
            ErrorKind::shape_mismatch, "channel cubes disagree with the grid or each other");
  ForecastDataset ds;
  ds.grid = grid;
  ds.weights = latitude_weights(grid);
  ds.norm = norm;
  ds.start = channels[0].start;
  ds.num_bins = num_bins;
  ds.clim = clim;
  ds.weekly_precip = rolling_weekly_mean(channels[0]);
  const std::size_t c = channels.size();
  ds.states.reserve(channels[0].n_days());
  for (std::size_t t = 0; t < channels[0].n_days(); ++t) {
    Tensor raw({c, grid.n_lat(), grid.n_lon()});
    for (std::size_t ch = 0; ch < c; ++ch)
      std::copy_n(channels[ch].data.data() + t * n, n, raw.data().data() + ch * n);
    ds.states.push_back(norm.apply(raw));
  }
  return ds;
}

Tensor noise_field(std::uint64_t seed, const Shape& shape) {
  Rng rng(seed);
  Tensor t(shape);
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

Var group_objective(Tape& tape, Forecaster& model, const ForecastDataset& data,
                    const GroupRequest& req, const LossWeights& w, LossComponents* parts) {
  require(req.group >= 1, ErrorKind::validation, "group size must be >= 1");
  require(req.supervise_from >= 1 && req.supervise_from <= req.depth, ErrorKind::validation,
          "supervised steps must lie within the rollout");
  const StateWindow win = data.window(req.init);
  const Tensor next = data.state(req.init.plus_days(1));
  const Shape shape = win.current.shape();

  std::vector<Tensor> noises;
  std::vector<RolloutResult> runs;
  noises.reserve(req.group);
  for (std::size_t m = 0; m < req.group; ++m) {
    noises.push_back(noise_field(derive_seed(req.noise_seed, {m}), shape));
    RolloutRequest r;
    r.window = &win;
    r.next_state = &next;
    r.n_steps = req.depth;
    r.mode = RolloutMode::train;
    r.init_date = req.init;
    r.noise = &noises.back();
    r.grad_from = req.supervise_from;
    r.grad_to = req.depth;
    r.detach_states = req.detach_states;
    runs.push_back(rollout(model, tape, r));
  }

  const double inv_g = 1.0 / double(req.group);
  Var reg, rps, ce;
  for (std::size_t k = req.supervise_from; k <= req.depth; ++k) {
    Var y = runs[0].steps[k - 1].regression;
    Var q = runs[0].steps[k - 1].probs;
    for (std::size_t m = 1; m < req.group; ++m) {
      y = add(y, runs[m].steps[k - 1].regression);
      q = add(q, runs[m].steps[k - 1].probs);
    }
    if (req.group > 1) {
      y = scale(y, inv_g);
      q = scale(q, inv_g);
    }
    const Date valid = req.init.plus_days(long(k));
    const Tensor onehot = data.onehot(valid);
    Var r = charbonnier_loss(y, tape.constant(data.state(valid)), data.weights, w.charbonnier_eps);
    Var p = rps_loss(q, onehot, data.weights);
    Var c = ce_loss(q, onehot, data.weights);
    reg = reg.valid() ? add(reg, r) : r;
    rps = rps.valid() ? add(rps, p) : p;
    ce = ce.valid() ? add(ce, c) : c;
  }
  const double inv_s = 1.0 / double(req.depth - req.supervise_from + 1);
  reg = scale(reg, inv_s);
  rps = scale(rps, inv_s);
  ce = scale(ce, inv_s);
  const auto& r0 = runs[0];
  Var kl = kl_diag_gaussians(r0.posterior.mu, r0.posterior.log_sigma, r0.prior.mu,
                             r0.prior.log_sigma);
  Var total = total_objective(reg, rps, ce, kl, w);
  if (parts) *parts = {reg.item(), rps.item(), ce.item(), kl.item(), total.item()};
  return total;
}

LossComponents accumulate_group_gradients(Forecaster& model, const ForecastDataset& data,
                                          const GroupRequest& req, const LossWeights& w) {
  Tape tape(true);
  LossComponents parts;
  Var total = group_objective(tape, model, data, req, w, &parts);
  tape.backward(scale(total, req.grad_scale));
  return parts;
}

namespace {

void add_scaled(LossComponents& acc, const LossComponents& x, double s) {
  acc.reg += s * x.reg;
  acc.rps += s * x.rps;
  acc.ce += s * x.ce;
  acc.kl += s * x.kl;
  acc.total += s * x.total;
}

}  // namespace

LossComponents train_step_phase1(Forecaster& model, AdamW& opt, const ForecastDataset& data,
                                 const std::vector<Date>& samples, std::size_t depth,
                                 std::uint64_t noise_seed, const LossWeights& w,
                                 std::size_t supervise_from, bool detach_states) {
  require(!samples.empty(), ErrorKind::validation, "phase-1 batch is empty");
  model.zero_grad();
  const double inv_b = 1.0 / double(samples.size());
  LossComponents out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    GroupRequest req{samples[i], depth, supervise_from, 1, derive_seed(noise_seed, {i}), inv_b,
                     detach_states};
    add_scaled(out, accumulate_group_gradients(model, data, req, w), inv_b);
  }
  opt.update(model.parameter_ptrs());
  return out;
}

LossComponents train_step_phase2(Forecaster& model, AdamW& opt, const ForecastDataset& data,
                                 const std::vector<Date>& samples, std::size_t group,
                                 std::size_t depth, std::size_t supervise_from,
                                 std::uint64_t noise_seed, const LossWeights& w,
                                 bool detach_states) {
  require(!samples.empty(), ErrorKind::validation, "phase-2 step needs a sample");
  model.zero_grad();
  const double inv = 1.0 / double(samples.size());
  LossComponents out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    GroupRequest req{samples[i], depth, supervise_from, group, derive_seed(noise_seed, {i}), inv,
                     detach_states};
    add_scaled(out, accumulate_group_gradients(model, data, req, w), inv);
  }
  opt.update(model.parameter_ptrs());
  return out;
}

ECCTSchedule::Position ECCTSchedule::at(std::size_t iteration) const {
  require(iteration < total_iters(), ErrorKind::validation, "iteration past the schedule");
  if (iteration < phase1_iters()) return {1, phase1.first + iteration / iters_per_step};
  return {2, phase2.first + (iteration - phase1_iters()) / iters_per_step};
}

ECCTSchedule ECCTSchedule::from(const RunConfig& c) {
  return {c.phase1,
          c.phase2,
          c.iters_per_step,
          c.batch,
          c.group,
          c.groups_per_update,
          c.phase2_supervise_from ? c.phase2_supervise_from : c.phase2.first,
          c.detach_rollout};
}

std::vector<Date> training_inits(const ForecastDataset& data, const YearRange& years,
                                 std::size_t max_depth) {
  std::vector<Date> out;
  for (Date d(years.first, 1, 1); d.year() <= years.last; d = d.plus_days(1)) {
    const Date end = d.plus_days(long(max_depth));
    if (!data.covers(d.plus_days(-1)) || !data.covers(end)) continue;
    if (!data.weekly_precip.covers(d.plus_days(1)) || !data.weekly_precip.covers(end)) continue;
    if (!data.clim.thresholds.count(d.plus_days(1)) || !data.clim.thresholds.count(end)) continue;
    out.push_back(d);
  }
  return out;
}

Trainer::Trainer(const RunConfig& config, Forecaster& model, const ForecastDataset& data)
    : config_(config),
      model_(model),
      data_(data),
      schedule_(ECCTSchedule::from(config)),
      opt_(AdamWConfig{config.lr, 0.9, 0.999, 1e-8, config.weight_decay}) {
  pool_ = training_inits(data, config.train_years,
                         std::max(config.phase1.last, config.phase2.last));
  require(!pool_.empty(), ErrorKind::missing_data,
          "no training initialisations with full rollout coverage");
}

LossComponents Trainer::step() {
  const auto pos = schedule_.at(iteration_);
  Rng pick(derive_seed(config_.seed, {iteration_, 0x5A3}));
  const std::uint64_t noise = derive_seed(config_.seed, {iteration_, 0x0E1});
  if (pos.phase == 1) {
    std::vector<Date> batch;
    for (std::size_t b = 0; b < schedule_.batch; ++b) batch.push_back(pool_[pick.below(pool_.size())]);
    return train_step_phase1(model_, opt_, data_, batch, pos.depth, noise, config_.loss,
                             schedule_.phase1.first, schedule_.detach_states);
  }
  std::vector<Date> samples;
  for (std::size_t b = 0; b < schedule_.groups_per_update; ++b)
    samples.push_back(pool_[pick.below(pool_.size())]);
  return train_step_phase2(model_, opt_, data_, samples, schedule_.group, pos.depth,
                           schedule_.phase2_supervise_from, noise, config_.loss,
                           schedule_.detach_states);
}

Checkpoint Trainer::snapshot() const {
  Checkpoint ck;
  store_model(ck, model_, &opt_);
  ck.meta["fingerprint"] = training_fingerprint(config_);
  ck.meta["iteration"] = iteration_;
  ck.meta["seed"] = config_.seed;
  ck.meta["normalizer"] = to_json(data_.norm);
  ck.meta["config"] = to_json(config_);
  return ck;
}

void Trainer::resume(const Checkpoint& ck) {
  require(ck.meta.value("fingerprint", std::uint64_t{0}) == training_fingerprint(config_),
          ErrorKind::checkpoint_mismatch,
          "checkpoint was written under a different training configuration");
  restore_model(ck, model_, &opt_);
  iteration_ = ck.meta.at("iteration").get<std::size_t>();
}

TrainerProgress Trainer::run(const TrainerOptions& opts) {
  TrainerProgress prog;
  const std::size_t end = opts.stop_after ? std::min(opts.stop_after, schedule_.total_iters())
                                          : schedule_.total_iters();
  auto save = [&](const std::string& name) {
    if (!opts.checkpoint_dir.empty()) snapshot().save(opts.checkpoint_dir / name);
  };
  while (iteration_ < end) {
    const auto pos = schedule_.at(iteration_);
    const LossComponents lc = step();
    if (opts.log) {
      nlohmann::json line = {{"iteration", iteration_}, {"phase", pos.phase},
                             {"rollout_step", pos.depth}, {"reg", lc.reg},
                             {"rps", lc.rps},           {"ce", lc.ce},
                             {"kl", lc.kl},             {"total", lc.total}};
      *opts.log << line.dump() << '\n';
    }
    prog.history.push_back(lc);
    ++iteration_;
    if (iteration_ == schedule_.phase1_iters()) save("ckpt_phase1.qwck");
  }
  if (iteration_ == schedule_.total_iters()) {
    save("ckpt_final.qwck");
  } else {
    save("ckpt_iter" + std::to_string(iteration_) + ".qwck");
  }
  prog.iteration = iteration_;
  return prog;
}

}  // namespace qw
