#include "qw/calibration.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

#include "qw/error.hpp"

namespace qw {

ClimSampleSet pooled_reforecast_samples(const ReforecastArchive& archive,
                                        const Date& target, const YearRange& years,
                                        std::span<const int> offsets) {
  require(!archive.members.empty(), ErrorKind::validation,
          "reforecast archive has no members");
  std::vector<ClimSampleSet> per_member;
  per_member.reserve(archive.members.size());
  for (const auto& cube : archive.members)
    per_member.push_back(collect_samples(cube, target, years, offsets));

  ClimSampleSet pooled;
  pooled.n_cells = per_member.front().n_cells;
  const std::size_t per = per_member.front().n_samples;
  pooled.n_samples = per * per_member.size();
  pooled.samples.resize(pooled.n_cells * pooled.n_samples);
  for (std::size_t c = 0; c < pooled.n_cells; ++c) {
    for (std::size_t m = 0; m < per_member.size(); ++m) {
      require(per_member[m].n_cells == pooled.n_cells, ErrorKind::shape_mismatch,
              "reforecast members differ in grid size");
      const auto src = per_member[m].cell(c);
      std::copy(src.begin(), src.end(),
                pooled.samples.begin() + long(c * pooled.n_samples + m * per));
    }
  }
  return pooled;
}

QuantileThresholds model_thresholds(const ReforecastArchive& archive,
                                    const Date& target, const YearRange& years,
                                    std::size_t num_bins,
                                    std::span<const int> offsets) {
  return quantile_thresholds(pooled_reforecast_samples(archive, target, years, offsets),
                             num_bins);
}

std::vector<double> ensemble_to_probabilities(const EnsembleForecast& ens,
                                              const QuantileThresholds& thr) {
  require(ens.size() >= 1, ErrorKind::validation, "ensemble has no members");
  const std::size_t n = ens.n_cells();
  require(n == thr.num_cells(), ErrorKind::shape_mismatch,
          "ensemble grid does not match thresholds");
  const std::size_t k = thr.num_bins();
  std::vector<std::size_t> counts(k * n, 0);
  for (const auto& member : ens.members) {
    require(member.size() == n, ErrorKind::shape_mismatch,
            "ensemble members are on different grids");
    const auto bins = discretize_field(member, thr);
    for (std::size_t c = 0; c < n; ++c) ++counts[bins[c] * n + c];
  }
  std::vector<double> probs(k * n);
  const double m = double(ens.size());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = double(counts[i]) / m;
  return probs;
}

void MismatchTable::write_csv(std::ostream& os) const {
  os << "lat,lon,date,obs_q80,model_q80\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%s,%.9g,%.9g\n", r.lat, r.lon,
                  r.date.iso().c_str(), r.obs_q80, r.model_q80);
    os << buf;
  }
}

MismatchTable q80_mismatch_table(std::span<const QuantileThresholds> model_thr,
                                 std::span<const QuantileThresholds> obs_thr,
                                 std::span<const Date> dates, const LatLonGrid& grid,
                                 const SpatialMask& mask) {
  require(model_thr.size() == obs_thr.size() && obs_thr.size() == dates.size(),
          ErrorKind::shape_mismatch, "mismatch table inputs differ in length");
  require(mask.n_cells() == grid.n_cells(), ErrorKind::shape_mismatch,
          "mask does not match grid");
  MismatchTable table;
  for (std::size_t d = 0; d < dates.size(); ++d) {
    const auto model = model_thr[d].highest();
    const auto obs = obs_thr[d].highest();
    require(model.size() == grid.n_cells() && obs.size() == grid.n_cells(),
            ErrorKind::shape_mismatch, "threshold fields do not match grid");
    for (std::size_t i = 0; i < grid.n_lat(); ++i) {
      for (std::size_t j = 0; j < grid.n_lon(); ++j) {
        const std::size_t c = i * grid.n_lon() + j;
        if (!mask.kept(c)) continue;
        table.rows.push_back({grid.latitudes()[i], grid.longitude(j), dates[d],
                              obs[c], model[c]});
        if (model[c] < obs[c]) ++table.below;
        if (model[c] == obs[c]) ++table.ties;
      }
    }
  }
  require(!table.rows.empty(), ErrorKind::empty_mask,
          "mismatch table: no kept cells/dates in common");
  return table;
}

}  // namespace qw
