#include "qw/climatology.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "qw/error.hpp"

namespace qw {

std::span<const double> DailyCube::at(const Date& d) const {
  require(covers(d), ErrorKind::missing_data,
          "no data for " + d.iso() + " (archive covers " + start.iso() + " to " +
              last().iso() + ")");
  return {data.data() + std::size_t(d.days_since(start)) * n_cells, n_cells};
}

std::span<double> DailyCube::at(const Date& d) {
  require(covers(d), ErrorKind::missing_data,
          "no data for " + d.iso() + " (archive covers " + start.iso() + " to " +
              last().iso() + ")");
  return {data.data() + std::size_t(d.days_since(start)) * n_cells, n_cells};
}

std::vector<double> rolling_weekly_mean(std::span<const double> series) {
  require(series.size() >= 7, ErrorKind::validation,
          "rolling weekly mean needs at least 7 values, got " +
              std::to_string(series.size()));
  std::vector<double> out(series.size() - 6);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double s = 0.0;
    for (std::size_t d = 0; d < 7; ++d) s += series[k + d];
    out[k] = s / 7.0;
  }
  return out;
}

DailyCube rolling_weekly_mean(const DailyCube& daily) {
  require(daily.n_days() >= 7, ErrorKind::validation,
          "rolling weekly mean needs at least 7 days");
  DailyCube out;
  out.start = daily.start.plus_days(6);
  out.n_cells = daily.n_cells;
  out.data.assign((daily.n_days() - 6) * daily.n_cells, 0.0);
  const std::size_t n = daily.n_cells;
  for (std::size_t k = 0; k + 6 < daily.n_days(); ++k) {
    double* dst = out.data.data() + k * n;
    for (std::size_t d = 0; d < 7; ++d) {
      const double* src = daily.data.data() + (k + d) * n;
      for (std::size_t c = 0; c < n; ++c) dst[c] += src[c];
    }
    for (std::size_t c = 0; c < n; ++c) dst[c] /= 7.0;
  }
  return out;
}

ClimSampleSet collect_samples(const DailyCube& weekly, const Date& target,
                              const YearRange& years,
                              std::span<const int> offsets) {
  require(years.count() >= 1 && !offsets.empty(), ErrorKind::validation,
          "collect_samples: empty year range or offset list");
  ClimSampleSet set;
  set.n_cells = weekly.n_cells;
  set.n_samples = std::size_t(years.count()) * offsets.size();
  set.samples.resize(set.n_cells * set.n_samples);
  std::size_t s = 0;
  for (int y = years.first; y <= years.last; ++y) {
    const Date anchor = target.with_year(y);
    for (int off : offsets) {
      const Date d = anchor.plus_days(off);
      if (!weekly.covers(d)) {
        fail(ErrorKind::missing_data,
             "climatology archive gap: missing " + d.iso() + " needed for target " +
                 target.iso() + " (year " + std::to_string(y) + ", offset " +
                 std::to_string(off) + ")");
      }
      const auto field = weekly.at(d);
      for (std::size_t c = 0; c < set.n_cells; ++c) {
        require(std::isfinite(field[c]), ErrorKind::non_finite,
                "non-finite climatology sample on " + d.iso());
        set.samples[c * set.n_samples + s] = field[c];
      }
      ++s;
    }
  }
  return set;
}

double empirical_quantile(std::span<const double> sorted, double p) {
  require(!sorted.empty(), ErrorKind::validation, "quantile of empty sample");
  const double pos = p * double(sorted.size() - 1);  // zero-based rank
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

QuantileThresholds quantile_thresholds(const ClimSampleSet& samples,
                                       std::size_t num_bins) {
  require(num_bins >= 2, ErrorKind::validation, "need at least two bins");
  require(samples.n_samples >= std::max<std::size_t>(5, num_bins),
          ErrorKind::validation,
          "quantile thresholds need at least 5 samples per cell, got " +
              std::to_string(samples.n_samples));
  QuantileThresholds thr;
  thr.bounds.assign(num_bins - 1, std::vector<double>(samples.n_cells));
  std::vector<double> buf(samples.n_samples);
  for (std::size_t c = 0; c < samples.n_cells; ++c) {
    const auto cell = samples.cell(c);
    std::copy(cell.begin(), cell.end(), buf.begin());
    std::sort(buf.begin(), buf.end());
    for (std::size_t b = 0; b + 1 < num_bins; ++b)
      thr.bounds[b][c] = empirical_quantile(buf, double(b + 1) / double(num_bins));
  }
  return thr;
}

std::size_t discretize(double value, std::span<const double> bounds) {
  require(std::isfinite(value), ErrorKind::non_finite, "discretize: non-finite value");
  for (std::size_t b = 1; b < bounds.size(); ++b) {
    require(bounds[b - 1] <= bounds[b], ErrorKind::validation,
            "discretize: thresholds are not monotone");
  }
  for (std::size_t b = 0; b < bounds.size(); ++b)
    if (value <= bounds[b]) return b;
  return bounds.size();
}

std::vector<std::size_t> discretize_field(std::span<const double> values,
                                          const QuantileThresholds& thr) {
  require(values.size() == thr.num_cells(), ErrorKind::shape_mismatch,
          "discretize_field: field and thresholds differ in size");
  std::vector<std::size_t> out(values.size());
  std::vector<double> cell_bounds(thr.bounds.size());
  for (std::size_t c = 0; c < values.size(); ++c) {
    for (std::size_t b = 0; b < thr.bounds.size(); ++b) cell_bounds[b] = thr.bounds[b][c];
    out[c] = discretize(values[c], cell_bounds);
  }
  return out;
}

std::vector<double> climatological_reference(std::size_t num_bins) {
  require(num_bins >= 2, ErrorKind::validation, "reference needs K >= 2");
  return std::vector<double>(num_bins, 1.0 / double(num_bins));
}

const QuantileThresholds& Climatology::thresholds_at(const Date& d) const {
  auto it = thresholds.find(d);
  require(it != thresholds.end(), ErrorKind::missing_data,
          "no climatological thresholds for " + d.iso());
  return it->second;
}

const std::vector<double>& Climatology::mean_at(const Date& d) const {
  auto it = mean.find(d);
  require(it != mean.end(), ErrorKind::missing_data,
          "no climatological mean for " + d.iso());
  return it->second;
}

Climatology build_climatology(const DailyCube& weekly, const Date& first,
                              const Date& last, const YearRange& years,
                              std::size_t num_bins, std::span<const int> offsets) {
  require(first <= last, ErrorKind::validation, "empty climatology date range");
  Climatology clim;
  clim.years = years;
  clim.num_bins = num_bins;
  std::map<std::pair<unsigned, unsigned>, Date> computed;
  for (Date d = first; d <= last; d = d.plus_days(1)) {
    const auto md = std::make_pair(d.month(), d.day());
    if (auto it = computed.find(md); it != computed.end()) {
      clim.thresholds.emplace(d, clim.thresholds.at(it->second));
      clim.mean.emplace(d, clim.mean.at(it->second));
      continue;
    }
    const ClimSampleSet set = collect_samples(weekly, d, years, offsets);
    clim.thresholds.emplace(d, quantile_thresholds(set, num_bins));
    std::vector<double> m(set.n_cells, 0.0);
    for (std::size_t c = 0; c < set.n_cells; ++c) {
      double s = 0.0;
      for (double v : set.cell(c)) s += v;
      m[c] = s / double(set.n_samples);
    }
    clim.mean.emplace(d, std::move(m));
    computed.emplace(md, d);
  }
  return clim;
}

}  // namespace qw
