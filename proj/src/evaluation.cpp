#include "qw/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "qw/climatology.hpp"
#include "qw/error.hpp"
#include "qw/rng.hpp"

namespace qw {

namespace {

void check_series(const FieldSeries& fc, const FieldSeries& obs, const SpatialMask& mask,
                  const char* who) {
  require(!fc.empty() && fc.size() == obs.size(), ErrorKind::shape_mismatch,
          std::string(who) + ": forecast and observation series differ in length");
  for (std::size_t s = 0; s < fc.size(); ++s)
    require(fc[s].size() == mask.n_cells() && obs[s].size() == mask.n_cells(),
            ErrorKind::shape_mismatch, std::string(who) + ": field size differs from mask");
  require(mask.kept() > 0, ErrorKind::empty_mask, std::string(who) + ": mask keeps no cells");
}

double row_weight(const LatWeights& w, const SpatialMask& mask, std::size_t cell) {
  return w.alpha[cell / mask.n_lon];
}

}  // namespace

std::vector<double> anomaly(std::span<const double> field, std::span<const double> clim_mean) {
  require(field.size() == clim_mean.size(), ErrorKind::shape_mismatch,
          "anomaly: field and climatological mean differ in size");
  std::vector<double> out(field.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = field[i] - clim_mean[i];
  return out;
}

double armse(const FieldSeries& fc, const FieldSeries& obs, const LatWeights& w,
             const SpatialMask& mask) {
  check_series(fc, obs, mask, "armse");
  std::vector<double> mse(mask.n_cells(), 0.0);
  for (std::size_t s = 0; s < fc.size(); ++s)
    for (std::size_t c = 0; c < mse.size(); ++c) {
      const double e = fc[s][c] - obs[s][c];
      mse[c] += e * e;
    }
  for (auto& v : mse) v /= double(fc.size());
  return std::sqrt(weighted_mean(mse, w, mask));
}

std::vector<double> acc_per_init(const FieldSeries& fc, const FieldSeries& obs,
                                 const LatWeights& w, const SpatialMask& mask) {
  check_series(fc, obs, mask, "acc");
  std::vector<double> out;
  for (std::size_t s = 0; s < fc.size(); ++s) {
    double xy = 0.0, xx = 0.0, yy = 0.0;
    for (std::size_t c = 0; c < mask.n_cells(); ++c) {
      if (!mask.kept(c)) continue;
      const double a = row_weight(w, mask, c);
      xy += a * fc[s][c] * obs[s][c];
      xx += a * fc[s][c] * fc[s][c];
      yy += a * obs[s][c] * obs[s][c];
    }
    require(xx > 0.0 && yy > 0.0, ErrorKind::validation,
            "acc: zero-norm anomaly field at init index " + std::to_string(s));
    out.push_back(xy / std::sqrt(xx * yy));
  }
  return out;
}

double acc(const FieldSeries& fc, const FieldSeries& obs, const LatWeights& w,
           const SpatialMask& mask) {
  const auto per = acc_per_init(fc, obs, w, mask);
  double s = 0.0;
  for (double v : per) s += v;
  return s / double(per.size());
}

TccResult tcc(const FieldSeries& fc, const FieldSeries& obs, const LatWeights& w,
              const SpatialMask& mask) {
  check_series(fc, obs, mask, "tcc");
  require(fc.size() >= 2, ErrorKind::validation, "tcc needs at least two initialisations");
  TccResult r;
  SpatialMask valid = mask;
  std::vector<double> corr(mask.n_cells(), 0.0);
  for (std::size_t c = 0; c < mask.n_cells(); ++c) {
    if (!mask.kept(c)) continue;
    double xy = 0.0, xx = 0.0, yy = 0.0;
    for (std::size_t s = 0; s < fc.size(); ++s) {
      xy += fc[s][c] * obs[s][c];
      xx += fc[s][c] * fc[s][c];
      yy += obs[s][c] * obs[s][c];
    }
    if (xx == 0.0 || yy == 0.0) {
      valid.keep[c] = 0;
      ++r.excluded;
      continue;
    }
    corr[c] = xy / std::sqrt(xx * yy);
  }
  require(valid.kept() > 0, ErrorKind::empty_mask, "tcc: no cell has temporal variance");
  r.value = weighted_mean(corr, w, valid);
  return r;
}

double rps_cell(std::span<const double> probs, std::size_t label) {
  double cp = 0.0, s = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    cp += probs[k];
    const double co = k >= label ? 1.0 : 0.0;
    s += (cp - co) * (cp - co);
  }
  return s;
}

std::vector<double> rps_per_init(const ProbSeries& probs, const LabelSeries& labels,
                                 std::size_t num_bins, const LatWeights& w,
                                 const SpatialMask& mask) {
  require(!probs.empty() && probs.size() == labels.size(), ErrorKind::shape_mismatch,
          "rps: forecast and label series differ in length");
  const std::size_t n = mask.n_cells();
  std::vector<double> out;
  std::vector<double> cell(n), p(num_bins);
  for (std::size_t s = 0; s < probs.size(); ++s) {
    require(probs[s].size() == num_bins * n && labels[s].size() == n,
            ErrorKind::shape_mismatch, "rps: field size differs from mask");
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t k = 0; k < num_bins; ++k) p[k] = probs[s][k * n + c];
      require(labels[s][c] < num_bins, ErrorKind::validation, "rps: label out of range");
      cell[c] = rps_cell(p, labels[s][c]);
    }
    out.push_back(weighted_mean(cell, w, mask));
  }
  return out;
}

std::vector<double> clim_rps_per_init(const LabelSeries& labels, std::size_t num_bins,
                                      const LatWeights& w, const SpatialMask& mask) {
  const auto ref = climatological_reference(num_bins);
  ProbSeries probs(labels.size(), std::vector<double>(num_bins * mask.n_cells()));
  for (auto& p : probs)
    for (std::size_t k = 0; k < num_bins; ++k)
      std::fill_n(p.begin() + std::ptrdiff_t(k * mask.n_cells()), mask.n_cells(), ref[k]);
  return rps_per_init(probs, labels, num_bins, w, mask);
}

namespace {

double sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

double rpss(const ProbSeries& probs, const LabelSeries& labels, std::size_t num_bins,
            const LatWeights& w, const SpatialMask& mask) {
  const auto model = rps_per_init(probs, labels, num_bins, w, mask);
  const auto ref = clim_rps_per_init(labels, num_bins, w, mask);
  return 1.0 - sum(model) / sum(ref);
}

FieldSeries event_probabilities(const ProbSeries& probs, std::size_t num_bins) {
  FieldSeries out;
  for (const auto& p : probs) {
    const std::size_t n = p.size() / num_bins;
    out.emplace_back(p.begin() + std::ptrdiff_t((num_bins - 1) * n), p.end());
  }
  return out;
}

FieldSeries event_outcomes(const LabelSeries& labels, std::size_t num_bins) {
  FieldSeries out;
  for (const auto& l : labels) {
    std::vector<double> o(l.size());
    for (std::size_t c = 0; c < l.size(); ++c) o[c] = l[c] == num_bins - 1 ? 1.0 : 0.0;
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<double> brier_per_init(const FieldSeries& p_event, const FieldSeries& outcome,
                                   const LatWeights& w, const SpatialMask& mask) {
  check_series(p_event, outcome, mask, "brier");
  std::vector<double> out, cell(mask.n_cells());
  for (std::size_t s = 0; s < p_event.size(); ++s) {
    for (std::size_t c = 0; c < cell.size(); ++c) {
      const double d = p_event[s][c] - outcome[s][c];
      cell[c] = d * d;
    }
    out.push_back(weighted_mean(cell, w, mask));
  }
  return out;
}

double bss(const FieldSeries& p_event, const FieldSeries& outcome, const LatWeights& w,
           const SpatialMask& mask) {
  const auto model = brier_per_init(p_event, outcome, w, mask);
  FieldSeries ref(p_event.size(), std::vector<double>(mask.n_cells(), kEventReference));
  const auto clim = brier_per_init(ref, outcome, w, mask);
  return 1.0 - sum(model) / sum(clim);
}

BootstrapResult bootstrap_statistic(std::size_t n_dates,
                                    const std::function<double(std::span<const std::size_t>)>& stat,
                                    std::size_t n_resamples, double level, std::uint64_t seed) {
  require(n_dates >= 2, ErrorKind::validation, "bootstrap needs at least two dates");
  require(n_resamples >= 1 && level > 0.0 && level < 1.0, ErrorKind::validation,
          "bootstrap needs >= 1 resample and a level in (0, 1)");
  std::vector<std::size_t> idx(n_dates);
  for (std::size_t i = 0; i < n_dates; ++i) idx[i] = i;
  BootstrapResult r;
  r.point = stat(idx);
  r.resamples = n_resamples;
  r.level = level;
  Rng rng(derive_seed(seed, {0xB007}));
  std::vector<double> vals(n_resamples);
  for (std::size_t b = 0; b < n_resamples; ++b) {
    for (auto& i : idx) i = rng.below(n_dates);
    vals[b] = stat(idx);
  }
  std::sort(vals.begin(), vals.end());
  const double tail = (1.0 - level) / 2.0;
  r.lower = std::min(empirical_quantile(vals, tail), r.point);
  r.upper = std::max(empirical_quantile(vals, 1.0 - tail), r.point);
  r.significant = r.lower > 0.0 || r.upper < 0.0;
  return r;
}

BootstrapResult bootstrap_difference(std::span<const double> a, std::span<const double> b,
                                     std::size_t n_resamples, double level, std::uint64_t seed) {
  require(a.size() == b.size(), ErrorKind::shape_mismatch,
          "bootstrap: score series differ in length");
  return bootstrap_statistic(
      a.size(),
      [&](std::span<const std::size_t> idx) {
        double s = 0.0;
        for (auto i : idx) s += a[i] - b[i];
        return s / double(idx.size());
      },
      n_resamples, level, seed);
}

BootstrapResult bootstrap_skill(std::span<const double> a, std::span<const double> b,
                                std::size_t n_resamples, double level, std::uint64_t seed) {
  require(a.size() == b.size(), ErrorKind::shape_mismatch,
          "bootstrap: score series differ in length");
  return bootstrap_statistic(
      a.size(),
      [&](std::span<const std::size_t> idx) {
        double sa = 0.0, sb = 0.0;
        for (auto i : idx) {
          sa += a[i];
          sb += b[i];
        }
        return 1.0 - sa / sb;
      },
      n_resamples, level, seed);
}

const MetricRow& MetricReport::find(const std::string& metric, int lead_week,
                                    const std::string& region,
                                    const std::string& forecast) const {
  for (const auto& r : rows)
    if (r.metric == metric && r.lead_week == lead_week && r.region == region &&
        r.forecast == forecast)
      return r;
  fail(ErrorKind::missing_data, "report has no " + metric + " row for week " +
                                    std::to_string(lead_week) + ", " + region + ", " + forecast);
}

void MetricReport::write_csv(std::ostream& os) const {
  os << "metric,lead_week,region,forecast,score,ci_lower,ci_upper,n_samples\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%zu", r.score, r.ci_lower, r.ci_upper,
                  r.n_samples);
    os << r.metric << ',' << r.lead_week << ',' << r.region << ',' << r.forecast << ',' << buf
       << '\n';
  }
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"metric", r.metric},
                         {"lead_week", r.lead_week},
                         {"region", r.region},
                         {"forecast", r.forecast},
                         {"score", r.score},
                         {"ci_lower", r.ci_lower},
                         {"ci_upper", r.ci_upper},
                         {"n_samples", r.n_samples}});
  j["comparisons"] = nlohmann::json::array();
  for (const auto& c : comparisons)
    j["comparisons"].push_back({{"metric", c.metric},
                                {"lead_week", c.lead_week},
                                {"region", c.region},
                                {"baseline", c.baseline},
                                {"mean_difference", c.result.point},
                                {"ci_lower", c.result.lower},
                                {"ci_upper", c.result.upper},
                                {"resamples", c.result.resamples},
                                {"level", c.result.level},
                                {"significant", c.result.significant}});
  return j;
}

}  // namespace qw
