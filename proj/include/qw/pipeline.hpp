#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qw/calibration.hpp"
#include "qw/config.hpp"
#include "qw/datagen.hpp"
#include "qw/evaluation.hpp"
#include "qw/fieldio.hpp"
#include "qw/training.hpp"

namespace qw {

/// Truth, climatology and the normalised dataset for one run config.
struct World {
  RunConfig config;
  SynthTruth truth;
  DailyCube weekly_precip;
  Climatology clim;
  ForecastDataset data;
};

World build_world(const RunConfig& config);
/// Same, from daily channel cubes already on disk.
World build_world(const RunConfig& config, SynthTruth truth);

/// Climatology over the configured years for every date in [first, last].
Climatology world_climatology(const RunConfig& config, const DailyCube& weekly_precip,
                              const Date& first, const Date& last);

/// Member trajectories, [member][step - 1]. Regression fields are normalised.
struct EnsembleOutput {
  std::vector<std::vector<Tensor>> regression;
  std::vector<std::vector<Tensor>> probs;
};

/// Prior-perturbed rollouts; member m draws its noise from
/// derive_seed(seed, {days since 1970-01-01 of init, m}).
EnsembleOutput infer_ensemble(Forecaster& model, const ForecastDataset& data, const Date& init,
                              std::size_t members, std::size_t n_steps, std::uint64_t seed);

/// Verification inputs for one lead week across initialisations.
struct LeadForecasts {
  int week = 0;
  std::vector<Date> inits;
  ProbSeries model_probs;  ///< member-mean probabilistic head at lead day 7w
  ProbSeries raw_probs;    ///< member fractions of weekly-mean regression vs observed thresholds
  FieldSeries fc_weekly;   ///< member-mean weekly precipitation, physical units
};

std::vector<LeadForecasts> collect_forecasts(Forecaster& model, const World& world,
                                             const std::vector<Date>& inits, std::size_t members,
                                             const std::vector<int>& weeks, std::uint64_t seed);

/// Turns member weekly means (physical units) into raw probabilities and the
/// ensemble-mean field.
void add_member_weekly(LeadForecasts& lf, const std::vector<std::vector<double>>& member_weekly,
                       const QuantileThresholds& obs_thr);

struct EvalOptions {
  std::size_t resamples = 1000;
  double level = 0.975;
  std::uint64_t seed = 0;
  std::optional<SpatialMask> land;  ///< land/sea split; absent gives global only
};

struct Evaluation {
  MetricReport report;
  /// Per lead week: per-init RPS of the probabilistic head, the raw
  /// ensemble and the uniform reference over the global RPSS mask.
  struct PerInit {
    int week = 0;
    std::vector<double> model_rps, raw_rps, clim_rps;
    BootstrapResult model_skill;
  };
  std::vector<PerInit> per_init;
  SpatialMask rpss_mask, bss_mask;
};

Evaluation evaluate_forecasts(const std::vector<LeadForecasts>& forecasts, const World& world,
                              const EvalOptions& opts);

/// Forecast archive layout: variables reg_m<MM>_<channel> (physical units),
/// prob_m<MM>_bin<k>, prob_mean_bin<k>; date = init, lead = rollout step.
FieldArchive forecast_archive(const Forecaster& model, const ForecastDataset& data,
                              const Date& init, const EnsembleOutput& ens);
/// Rebuilds verification inputs from a forecast archive.
std::vector<LeadForecasts> forecasts_from_archive(const FieldArchive& archive, const World& world,
                                                  const std::vector<Date>& inits,
                                                  const std::vector<int>& weeks,
                                                  std::size_t num_bins);

/// Reforecast calibration experiment on the synthetic world.
struct CalibrationStudy {
  MismatchTable mismatch;
  std::vector<double> calibrated_freq;  ///< mean calibrated probability per bin
  std::vector<double> raw_freq;         ///< same, discretised against observed thresholds
  SpatialMask mask;
};

CalibrationStudy run_calibration_study(const World& world, std::size_t members, double bias,
                                       int lead_days);

/// Forecaster built from a run config and the dataset grid.
Forecaster make_model(const RunConfig& config, const ForecastDataset& data);

}  // namespace qw
