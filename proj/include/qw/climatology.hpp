#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "qw/calendar.hpp"
#include "qw/quantiles.hpp"

namespace qw {

/// Consecutive daily fields for one variable, [day][cell].
struct DailyCube {
  Date start;
  std::size_t n_cells = 0;
  std::vector<double> data;

  std::size_t n_days() const { return n_cells == 0 ? 0 : data.size() / n_cells; }
  Date last() const { return start.plus_days(long(n_days()) - 1); }
  bool covers(const Date& d) const {
    return d >= start && d.days_since(start) < long(n_days());
  }
  /// Throws missing_data naming the date when outside the cube.
  std::span<const double> at(const Date& d) const;
  std::span<double> at(const Date& d);
};

/// Trailing 7-day mean: output[k] averages input[k .. k+6], so the output
/// series starts six days after the input and is six values shorter.
std::vector<double> rolling_weekly_mean(std::span<const double> series);
DailyCube rolling_weekly_mean(const DailyCube& daily);

/// Per-cell climatological samples, [cell][sample].
struct ClimSampleSet {
  std::size_t n_cells = 0;
  std::size_t n_samples = 0;
  std::vector<double> samples;

  std::span<const double> cell(std::size_t c) const {
    return {samples.data() + c * n_samples, n_samples};
  }
};

inline constexpr std::array<int, 5> kDefaultDayOffsets = {-4, -2, 0, 2, 4};

/// One sample per (year, offset): the target's calendar day in each year of
/// the range, shifted by the offset (wrapping across year boundaries).
ClimSampleSet collect_samples(const DailyCube& weekly, const Date& target,
                              const YearRange& years,
                              std::span<const int> offsets = kDefaultDayOffsets);

/// Linear interpolation between order statistics at rank 1 + p (n - 1).
/// `sorted` must be ascending and non-empty.
double empirical_quantile(std::span<const double> sorted, double p);

/// Boundaries at p = k / num_bins, k = 1..num_bins-1 (quintiles for 5 bins).
QuantileThresholds quantile_thresholds(const ClimSampleSet& samples,
                                       std::size_t num_bins = 5);

/// 0-based category of `value`: the smallest b with value <= bounds[b],
/// else the top bin. Bins are right-closed.
std::size_t discretize(double value, std::span<const double> bounds);

/// Categories for a whole field against per-cell thresholds.
std::vector<std::size_t> discretize_field(std::span<const double> values,
                                          const QuantileThresholds& thr);

/// Exact uniform reference forecast (1/K, ..., 1/K).
std::vector<double> climatological_reference(std::size_t num_bins);

/// Thresholds and climatological mean for each requested target date.
struct Climatology {
  YearRange years;
  std::size_t num_bins = 5;
  std::map<Date, QuantileThresholds> thresholds;
  std::map<Date, std::vector<double>> mean;

  const QuantileThresholds& thresholds_at(const Date& d) const;
  const std::vector<double>& mean_at(const Date& d) const;
};

/// Builds thresholds for every date in [first, last]. Dates sharing a
/// calendar day share one computation.
Climatology build_climatology(const DailyCube& weekly, const Date& first,
                              const Date& last, const YearRange& years,
                              std::size_t num_bins = 5,
                              std::span<const int> offsets = kDefaultDayOffsets);

}  // namespace qw
