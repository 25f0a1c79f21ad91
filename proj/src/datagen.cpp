#include "qw/datagen.hpp"

#include <cmath>
#include <numbers>
#include <optional>

#include "qw/error.hpp"
#include "qw/rng.hpp"

namespace qw {

void SynthWorldConfig::validate() const {
  require(n_lat >= 1 && n_lon >= 1 && channels >= 1, ErrorKind::validation,
          "synthetic world needs a non-empty grid and at least one channel");
  require(noise_sd > 0.0, ErrorKind::validation, "noise sd must be positive");
  require(bias > 0.0, ErrorKind::validation, "forecaster bias must be positive");
  require(ar_coeff > -1.0 && ar_coeff < 1.0, ErrorKind::validation,
          "AR coefficient must lie in (-1, 1)");
}

LatLonGrid synth_grid(const SynthWorldConfig& cfg) {
  return LatLonGrid::regular(cfg.n_lat, cfg.n_lon, false);
}

SpatialMask synth_land_mask(const SynthWorldConfig& cfg) {
  auto m = SpatialMask::full(cfg.n_lat, cfg.n_lon);
  for (std::size_t i = 0; i < cfg.n_lat; ++i)
    for (std::size_t j = 0; j < cfg.n_lon; ++j) {
      const bool land = (j < cfg.n_lon / 2 && i >= cfg.n_lat / 4) ||
                        (j >= 3 * cfg.n_lon / 4 && i < cfg.n_lat / 2);
      m.keep[i * cfg.n_lon + j] = land ? 1 : 0;
    }
  return m;
}

namespace {

bool arid_cell(const SynthWorldConfig& cfg, std::size_t i, std::size_t j) {
  return i >= cfg.n_lat / 2 && j < std::max<std::size_t>(1, cfg.n_lon / 5);
}

double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

// Periodic shift along longitude with linear interpolation.
void advect(const std::vector<double>& in, std::vector<double>& out, std::size_t n_lat,
            std::size_t n_lon, double shift) {
  const double s = std::fmod(std::fmod(shift, double(n_lon)) + double(n_lon), double(n_lon));
  const auto whole = std::size_t(s);
  const double frac = s - double(whole);
  for (std::size_t i = 0; i < n_lat; ++i)
    for (std::size_t j = 0; j < n_lon; ++j) {
      const std::size_t a = (j + n_lon - whole % n_lon) % n_lon;
      const std::size_t b = (a + n_lon - 1) % n_lon;
      out[i * n_lon + j] = (1.0 - frac) * in[i * n_lon + a] + frac * in[i * n_lon + b];
    }
}

// Linear operator for `passes` 3x3 box passes (periodic in longitude), rows
// rescaled so each output cell has unit variance under white input.
std::vector<double> smoothing_operator(std::size_t n_lat, std::size_t n_lon,
                                       std::size_t passes) {
  const std::size_t n = n_lat * n_lon;
  std::vector<double> op(n * n, 0.0);
  for (std::size_t c = 0; c < n; ++c) op[c * n + c] = 1.0;
  std::vector<double> next(n * n);
  for (std::size_t p = 0; p < passes; ++p) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n_lat; ++i)
      for (std::size_t j = 0; j < n_lon; ++j) {
        const std::size_t row = i * n_lon + j;
        int cnt = 0;
        for (int di = -1; di <= 1; ++di) {
          const long ii = long(i) + di;
          if (ii < 0 || ii >= long(n_lat)) continue;
          for (int dj = -1; dj <= 1; ++dj) {
            const std::size_t src = std::size_t(ii) * n_lon + (j + n_lon + std::size_t(dj + 1) - 1) % n_lon;
            for (std::size_t k = 0; k < n; ++k) next[row * n + k] += op[src * n + k];
            ++cnt;
          }
        }
        for (std::size_t k = 0; k < n; ++k) next[row * n + k] /= double(cnt);
      }
    op.swap(next);
  }
  for (std::size_t r = 0; r < n; ++r) {
    double ss = 0.0;
    for (std::size_t k = 0; k < n; ++k) ss += op[r * n + k] * op[r * n + k];
    const double inv = 1.0 / std::sqrt(ss);
    for (std::size_t k = 0; k < n; ++k) op[r * n + k] *= inv;
  }
  return op;
}

void smooth_noise(Rng& rng, const std::vector<double>& op, std::vector<double>& raw,
                  std::vector<double>& out) {
  const std::size_t n = out.size();
  for (auto& v : raw) v = rng.normal();
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += op[r * n + k] * raw[k];
    out[r] = s;
  }
}

double seasonal_phase(const Date& d) {
  const double days = is_leap_year(d.year()) ? 366.0 : 365.0;
  return 2.0 * std::numbers::pi * double(d.day_of_year() - 1) / days;
}

}  // namespace

SynthTruth generate_truth(const SynthWorldConfig& cfg, const Date& first, const Date& last) {
  cfg.validate();
  require(last >= first, ErrorKind::validation, "generate_truth: empty date range");
  const std::size_t h = cfg.n_lat, w = cfg.n_lon, n = h * w;
  const std::size_t days = std::size_t(last.days_since(first)) + 1;
  SynthTruth out;
  out.grid = synth_grid(cfg);
  out.land = synth_land_mask(cfg);
  out.channels.assign(cfg.channels, DailyCube{first, n, std::vector<double>(days * n)});
  out.latent = DailyCube{first, n, std::vector<double>(days * n)};

  std::vector<double> base(n), lat_phase(n);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      const double lat = out.grid.latitudes()[i];
      base[i * w + j] = 0.3 + 0.4 * std::cos(2.0 * std::numbers::pi * double(j) / double(w)) +
                        (arid_cell(cfg, i, j) ? cfg.arid_offset : 0.0);
      lat_phase[i * w + j] = lat >= 0.0 ? 0.0 : std::numbers::pi;
    }

  Rng rng(derive_seed(cfg.seed, {0xDA7A}));
  const double innov = cfg.noise_sd * std::sqrt(1.0 - cfg.ar_coeff * cfg.ar_coeff);
  const auto op = smoothing_operator(h, w, cfg.smoothing_passes);
  std::vector<double> anom(n, 0.0), moved(n), eta(n), raw(n);
  smooth_noise(rng, op, raw, eta);
  for (std::size_t c = 0; c < n; ++c) anom[c] = cfg.noise_sd * eta[c];
  for (std::size_t t = 0; t < days; ++t) {
    const Date d = first.plus_days(long(t));
    if (t > 0) {
      advect(anom, moved, h, w, cfg.advection);
      smooth_noise(rng, op, raw, eta);
      for (std::size_t c = 0; c < n; ++c) anom[c] = cfg.ar_coeff * moved[c] + innov * eta[c];
    }
    const double phase = seasonal_phase(d);
    double* precip = out.channels[0].data.data() + t * n;
    double* lat_out = out.latent.data.data() + t * n;
    for (std::size_t c = 0; c < n; ++c) {
      lat_out[c] = anom[c];
      const double jitter = cfg.noise_sd * cfg.daily_noise_ratio * rng.normal();
      const double seasonal = cfg.seasonal_amplitude * std::sin(phase + lat_phase[c]);
      precip[c] = softplus(base[c] + seasonal + anom[c] + jitter);
    }
    for (std::size_t ch = 1; ch < cfg.channels; ++ch) {
      double* drv = out.channels[ch].data.data() + t * n;
      for (std::size_t c = 0; c < n; ++c) {
        const double seasonal = 0.5 * std::cos(phase + lat_phase[c] + double(ch));
        drv[c] = anom[c] + seasonal + cfg.noise_sd * cfg.driver_noise_ratio * rng.normal();
      }
    }
  }
  return out;
}

std::vector<DailyCube> generate_biased_forecaster(const SynthWorldConfig& cfg,
                                                  const DailyCube& truth_precip,
                                                  std::size_t members, double bias) {
  require(members >= 1, ErrorKind::validation, "forecaster needs at least one member");
  require(bias > 0.0, ErrorKind::validation, "forecaster bias must be positive");
  std::vector<DailyCube> out;
  out.reserve(members);
  for (std::size_t m = 0; m < members; ++m) {
    Rng rng(derive_seed(cfg.seed, {0xF0CA, m}));
    DailyCube cube{truth_precip.start, truth_precip.n_cells,
                   std::vector<double>(truth_precip.data.size())};
    for (std::size_t k = 0; k < cube.data.size(); ++k) {
      const double noise = cfg.forecast_noise > 0.0 ? cfg.forecast_noise * rng.normal() : 0.0;
      cube.data[k] = std::max(0.0, bias * truth_precip.data[k] + noise);
    }
    out.push_back(std::move(cube));
  }
  return out;
}

ReforecastArchive weekly_reforecast(const std::vector<DailyCube>& daily_members) {
  ReforecastArchive a;
  for (const auto& m : daily_members) a.members.push_back(rolling_weekly_mean(m));
  return a;
}

std::string channel_name(std::size_t channel) {
  return channel == 0 ? "precip" : "driver" + std::to_string(channel);
}

FieldArchive truth_to_archive(const SynthTruth& truth) {
  FieldArchive a;
  for (std::size_t ch = 0; ch < truth.channels.size(); ++ch) {
    const auto& cube = truth.channels[ch];
    for (std::size_t t = 0; t < cube.n_days(); ++t) {
      GridField f;
      f.variable = channel_name(ch);
      f.units = ch == 0 ? "mm" : "1";
      f.grid = truth.grid;
      f.date = cube.start.plus_days(long(t));
      const auto v = cube.at(f.date);
      f.values.assign(v.begin(), v.end());
      a.put(std::move(f));
    }
  }
  return a;
}

SynthTruth truth_from_archive(const FieldArchive& archive, const SynthWorldConfig& cfg) {
  SynthTruth t;
  t.land = synth_land_mask(cfg);
  for (std::size_t ch = 0; ch < cfg.channels; ++ch) {
    const std::string var = channel_name(ch);
    std::optional<Date> first, last;
    for (const auto& [key, f] : archive.fields()) {
      if (key.variable != var || key.lead != 0) continue;
      if (!first) {
        first = key.date;
        t.grid = f.grid;
      }
      last = key.date;
    }
    require(first.has_value(), ErrorKind::missing_data, "archive has no '" + var + "' fields");
    require(t.grid.n_cells() == t.land.n_cells(), ErrorKind::dim_mismatch,
            "archive grid does not match the configured world grid");
    DailyCube cube;
    cube.start = *first;
    cube.n_cells = t.grid.n_cells();
    for (Date d = *first; d <= *last; d = d.plus_days(1)) {
      require(archive.contains({var, d, 0}), ErrorKind::missing_data,
              "archive gap: " + var + " on " + d.iso());
      const auto& f = archive.get(var, d);
      require(f.grid == t.grid, ErrorKind::dim_mismatch, "grid changes within archive at " + d.iso());
      cube.data.insert(cube.data.end(), f.values.begin(), f.values.end());
    }
    t.channels.push_back(std::move(cube));
  }
  require(t.channels.front().start == t.channels.back().start &&
              t.channels.front().n_days() == t.channels.back().n_days(),
          ErrorKind::missing_data, "channels cover different date ranges");
  return t;
}

}  // namespace qw
