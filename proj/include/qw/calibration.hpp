#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include "qw/climatology.hpp"
#include "qw/grid.hpp"

namespace qw {

/// M member fields for a single (init, lead), all on one grid.
struct EnsembleForecast {
  std::vector<std::vector<double>> members;

  std::size_t size() const { return members.size(); }
  std::size_t n_cells() const { return members.empty() ? 0 : members.front().size(); }
};

/// Historical forecasts for one lead, indexed by valid date: one weekly-mean
/// cube per member. Member cubes must share start date and length.
struct ReforecastArchive {
  std::vector<DailyCube> members;
};

/// Model-specific thresholds: every member of every (year, offset) sample is
/// pooled into one sample set per cell.
QuantileThresholds model_thresholds(const ReforecastArchive& archive,
                                    const Date& target, const YearRange& years,
                                    std::size_t num_bins = 5,
                                    std::span<const int> offsets = kDefaultDayOffsets);

/// The pooled sample set behind model_thresholds.
ClimSampleSet pooled_reforecast_samples(const ReforecastArchive& archive,
                                        const Date& target, const YearRange& years,
                                        std::span<const int> offsets = kDefaultDayOffsets);

/// Member-fraction probabilities, [bin][cell]. Each cell's entries are the
/// exact ratios count_k / M.
std::vector<double> ensemble_to_probabilities(const EnsembleForecast& ens,
                                              const QuantileThresholds& thr);

struct MismatchRow {
  double lat = 0.0;
  double lon = 0.0;
  Date date;
  double obs_q80 = 0.0;
  double model_q80 = 0.0;
};

struct MismatchTable {
  std::vector<MismatchRow> rows;
  std::size_t below = 0;  ///< rows with model < obs
  std::size_t ties = 0;   ///< rows with model == obs

  double below_fraction() const {
    return rows.empty() ? 0.0 : double(below) / double(rows.size());
  }
  /// Delimited text: lat,lon,date,obs_q80,model_q80
  void write_csv(std::ostream& os) const;
};

/// Pairs the top boundaries of model and observed thresholds over kept cells
/// for each date.
MismatchTable q80_mismatch_table(std::span<const QuantileThresholds> model_thr,
                                 std::span<const QuantileThresholds> obs_thr,
                                 std::span<const Date> dates, const LatLonGrid& grid,
                                 const SpatialMask& mask);

}  // namespace qw
