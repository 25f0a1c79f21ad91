#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <vector>

#include "qw/checkpoint.hpp"
#include "qw/climatology.hpp"
#include "qw/config.hpp"
#include "qw/grid.hpp"
#include "qw/losses.hpp"
#include "qw/model.hpp"
#include "qw/optimizer.hpp"

namespace qw {

/// Normalised daily states plus everything needed to label them.
struct ForecastDataset {
  LatLonGrid grid;
  LatWeights weights;
  Normalizer norm;
  Date start;
  std::vector<Tensor> states;  ///< normalised [C,H,W], one per day from `start`
  DailyCube weekly_precip;     ///< trailing weekly means, physical units
  Climatology clim;
  std::size_t num_bins = 5;

  bool covers(const Date& d) const {
    return d >= start && d.days_since(start) < long(states.size());
  }
  const Tensor& state(const Date& d) const;
  /// {X^{t-1}, X^t}
  StateWindow window(const Date& init) const;
  /// 0-based category of the weekly precipitation ending at `valid`.
  std::vector<std::size_t> labels(const Date& valid) const;
  Tensor onehot(const Date& valid) const;
};

/// Builds a dataset from daily channel cubes (channel 0 precipitation).
ForecastDataset make_dataset(const LatLonGrid& grid, const std::vector<DailyCube>& channels,
                             const Normalizer& norm, const Climatology& clim,
                             std::size_t num_bins);

struct LossComponents {
  double reg = 0.0;
  double rps = 0.0;
  double ce = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

/// One supervised rollout of `group` members from the same initialisation.
/// Members roll out to `depth`; steps in [supervise_from, depth] are
/// supervised on the member-mean regression output and the member-mean
/// probabilities. KL comes from the shared prior/posterior pair. The total
/// is multiplied by `grad_scale` before backward, and gradients are added
/// to the parameters' grad buffers.
struct GroupRequest {
  Date init;
  std::size_t depth = 1;
  std::size_t supervise_from = 1;
  std::size_t group = 1;
  std::uint64_t noise_seed = 0;  ///< member m draws from derive_seed(noise_seed, {m})
  double grad_scale = 1.0;
  bool detach_states = true;
};

/// The group objective built on `tape` without running backward.
Var group_objective(Tape& tape, Forecaster& model, const ForecastDataset& data,
                    const GroupRequest& req, const LossWeights& w, LossComponents* parts = nullptr);

LossComponents accumulate_group_gradients(Forecaster& model, const ForecastDataset& data,
                                          const GroupRequest& req, const LossWeights& w);

/// Standard-normal [C,H,W] draw.
Tensor noise_field(std::uint64_t seed, const Shape& shape);

struct ECCTSchedule {
  StepRange phase1{1, 6};
  StepRange phase2{12, 18};
  std::size_t iters_per_step = 1000;
  std::size_t batch = 4;
  std::size_t group = 4;
  std::size_t groups_per_update = 1;
  std::size_t phase2_supervise_from = 12;
  bool detach_states = true;

  struct Position {
    int phase = 1;
    std::size_t depth = 1;
  };
  std::size_t phase1_iters() const { return phase1.count() * iters_per_step; }
  std::size_t total_iters() const {
    return (phase1.count() + phase2.count()) * iters_per_step;
  }
  Position at(std::size_t iteration) const;

  static ECCTSchedule from(const RunConfig& c);
};

/// Phase 1: `samples` independent rollouts (G = 1) supervised on
/// [supervise_from, depth], losses averaged over the batch, one update.
LossComponents train_step_phase1(Forecaster& model, AdamW& opt, const ForecastDataset& data,
                                 const std::vector<Date>& samples, std::size_t depth,
                                 std::uint64_t noise_seed, const LossWeights& w,
                                 std::size_t supervise_from = 1, bool detach_states = true);

/// Phase 2: each sample is broadcast to G members, supervised on
/// [supervise_from, depth]. With several samples the group gradients are
/// averaged before the single update.
LossComponents train_step_phase2(Forecaster& model, AdamW& opt, const ForecastDataset& data,
                                 const std::vector<Date>& samples, std::size_t group,
                                 std::size_t depth, std::size_t supervise_from,
                                 std::uint64_t noise_seed, const LossWeights& w,
                                 bool detach_states = true);

struct TrainerOptions {
  std::filesystem::path checkpoint_dir;  ///< empty: no checkpoint files
  std::ostream* log = nullptr;           ///< JSON lines, one per iteration
  /// Stop (and checkpoint) once this many iterations are done; 0 = run to
  /// the end of the schedule.
  std::size_t stop_after = 0;
};

struct TrainerProgress {
  std::size_t iteration = 0;  ///< completed iterations
  std::vector<LossComponents> history;
};

/// Candidate initialisation dates: every day of the training years with
/// enough data on both sides for a rollout of `max_depth` steps.
std::vector<Date> training_inits(const ForecastDataset& data, const YearRange& years,
                                 std::size_t max_depth);

class Trainer {
 public:
  Trainer(const RunConfig& config, Forecaster& model, const ForecastDataset& data);

  AdamW& optimizer() { return opt_; }
  const ECCTSchedule& schedule() const { return schedule_; }
  std::size_t iteration() const { return iteration_; }

  /// Runs iterations until `stop_after` or the end of the schedule.
  /// Writes ckpt_phase1.qwck at the phase boundary, ckpt_final.qwck at the
  /// end and ckpt_iter<N>.qwck when stopped early.
  TrainerProgress run(const TrainerOptions& opts);

  Checkpoint snapshot() const;
  /// Restores parameters, optimizer state and the iteration counter.
  /// Throws checkpoint_mismatch if the checkpoint came from another config.
  void resume(const Checkpoint& ck);

 private:
  LossComponents step();

  RunConfig config_;
  Forecaster& model_;
  const ForecastDataset& data_;
  ECCTSchedule schedule_;
  AdamW opt_;
  std::vector<Date> pool_;
  std::size_t iteration_ = 0;
};

}  // namespace qw
