#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qw/grid.hpp"

namespace qw {

/// Fields indexed [init][cell].
using FieldSeries = std::vector<std::vector<double>>;
/// Probabilities indexed [init][bin * n_cells + cell].
using ProbSeries = std::vector<std::vector<double>>;
/// 0-based categories indexed [init][cell].
using LabelSeries = std::vector<std::vector<std::size_t>>;

std::vector<double> anomaly(std::span<const double> field, std::span<const double> clim_mean);

/// sqrt( weighted spatial mean of (mean over inits of squared error) )
double armse(const FieldSeries& fc, const FieldSeries& obs, const LatWeights& w,
             const SpatialMask& mask);

/// Weighted uncentred spatial correlation for each init.
std::vector<double> acc_per_init(const FieldSeries& fc, const FieldSeries& obs,
                                 const LatWeights& w, const SpatialMask& mask);
/// Unweighted mean of acc_per_init.
double acc(const FieldSeries& fc, const FieldSeries& obs, const LatWeights& w,
           const SpatialMask& mask);

struct TccResult {
  double value = 0.0;
  std::size_t excluded = 0;  ///< kept cells dropped for zero temporal variance
};
/// Per-cell uncentred temporal correlation, then weighted spatial mean.
TccResult tcc(const FieldSeries& fc, const FieldSeries& obs, const LatWeights& w,
              const SpatialMask& mask);

/// sum_k (cumsum(p)_k - cumsum(onehot(label))_k)^2 for one cell.
double rps_cell(std::span<const double> probs, std::size_t label);

/// Weighted spatial mean RPS for each init.
std::vector<double> rps_per_init(const ProbSeries& probs, const LabelSeries& labels,
                                 std::size_t num_bins, const LatWeights& w,
                                 const SpatialMask& mask);
/// Same against the exact uniform reference.
std::vector<double> clim_rps_per_init(const LabelSeries& labels, std::size_t num_bins,
                                      const LatWeights& w, const SpatialMask& mask);
/// 1 - mean RPS_model / mean RPS_clim
double rpss(const ProbSeries& probs, const LabelSeries& labels, std::size_t num_bins,
            const LatWeights& w, const SpatialMask& mask);

inline constexpr double kEventReference = 0.2;
/// Top-bin event probabilities and outcomes.
FieldSeries event_probabilities(const ProbSeries& probs, std::size_t num_bins);
FieldSeries event_outcomes(const LabelSeries& labels, std::size_t num_bins);
std::vector<double> brier_per_init(const FieldSeries& p_event, const FieldSeries& outcome,
                                   const LatWeights& w, const SpatialMask& mask);
/// 1 - mean BS_model / mean BS of the constant 0.2 forecast
double bss(const FieldSeries& p_event, const FieldSeries& outcome, const LatWeights& w,
           const SpatialMask& mask);

struct BootstrapResult {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t resamples = 0;
  double level = 0.975;
  bool significant = false;  ///< interval excludes 0
};

/// Resamples init indices with replacement and recomputes `stat`; the
/// interval is the central `level` percentile range of the resampled values.
BootstrapResult bootstrap_statistic(std::size_t n_dates,
                                    const std::function<double(std::span<const std::size_t>)>& stat,
                                    std::size_t n_resamples, double level, std::uint64_t seed);
/// Mean of a[s] - b[s].
BootstrapResult bootstrap_difference(std::span<const double> a, std::span<const double> b,
                                     std::size_t n_resamples = 1000, double level = 0.975,
                                     std::uint64_t seed = 0);
/// Skill 1 - sum a / sum b over the resampled dates.
BootstrapResult bootstrap_skill(std::span<const double> a, std::span<const double> b,
                                std::size_t n_resamples = 1000, double level = 0.975,
                                std::uint64_t seed = 0);

struct MetricRow {
  std::string metric;
  int lead_week = 0;
  std::string region;
  std::string forecast;  ///< which forecast was scored
  double score = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  std::size_t n_samples = 0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  /// Paired comparisons against a baseline (difference of per-init scores).
  struct Comparison {
    std::string metric;
    int lead_week = 0;
    std::string region;
    std::string baseline;
    BootstrapResult result;
  };
  std::vector<Comparison> comparisons;

  const MetricRow& find(const std::string& metric, int lead_week, const std::string& region,
                        const std::string& forecast) const;

  /// Columns: metric,lead_week,region,forecast,score,ci_lower,ci_upper,n_samples
  void write_csv(std::ostream& os) const;
  nlohmann::json to_json() const;
};

}  // namespace qw
