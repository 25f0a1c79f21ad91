#include "qw/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include "qw/error.hpp"
#include "qw/rng.hpp"

namespace qw {

Climatology world_climatology(const RunConfig& config, const DailyCube& weekly_precip,
                              const Date& first, const Date& last) {
  return build_climatology(weekly_precip, first, last, config.clim_years,
                           config.model.num_bins);
}

World build_world(const RunConfig& config) {
  return build_world(config, generate_truth(config.world, config.data_start, config.data_end));
}

World build_world(const RunConfig& config, SynthTruth truth) {
  config.validate();
  World w;
  w.config = config;
  w.truth = std::move(truth);
  w.weekly_precip = rolling_weekly_mean(w.truth.channels[0]);

  const Date first(std::min(config.train_years.first, config.test_years.first), 1, 1);
  const Date last = w.weekly_precip.last();
  w.clim = world_climatology(config, w.weekly_precip, first, last);

  std::vector<Tensor> fit_states;
  const std::size_t n = w.truth.grid.n_cells(), c = w.truth.channels.size();
  for (Date d(config.train_years.first, 1, 1); d.year() <= config.train_years.last;
       d = d.plus_days(1)) {
    Tensor raw({c, w.truth.grid.n_lat(), w.truth.grid.n_lon()});
    for (std::size_t ch = 0; ch < c; ++ch) {
      const auto v = w.truth.channels[ch].at(d);
      std::copy(v.begin(), v.end(), raw.data().begin() + std::ptrdiff_t(ch * n));
    }
    fit_states.push_back(std::move(raw));
  }
  const Normalizer norm = Normalizer::fit(fit_states, config.model.precip_channel);
  w.data = make_dataset(w.truth.grid, w.truth.channels, norm, w.clim, config.model.num_bins);
  return w;
}

Forecaster make_model(const RunConfig& config, const ForecastDataset& data) {
  return Forecaster(config.model, data.grid.n_lat(), data.grid.n_lon(),
                    derive_seed(config.seed, {0x30DE1}));
}

EnsembleOutput infer_ensemble(Forecaster& model, const ForecastDataset& data, const Date& init,
                              std::size_t members, std::size_t n_steps, std::uint64_t seed) {
  require(members >= 1, ErrorKind::validation, "inference needs M >= 1");
  const StateWindow win = data.window(init);
  const auto day = std::uint64_t(init.days_since(Date(1970, 1, 1)));
  EnsembleOutput out;
  Tape none(false);
  for (std::size_t m = 0; m < members; ++m) {
    const Tensor noise = noise_field(derive_seed(seed, {day, m}), win.current.shape());
    RolloutRequest r;
    r.window = &win;
    r.n_steps = n_steps;
    r.mode = RolloutMode::infer;
    r.init_date = init;
    r.noise = &noise;
    r.grad_to = 0;
    RolloutResult res = rollout(model, none, r);
    std::vector<Tensor> reg, prob;
    for (const auto& s : res.steps) {
      reg.push_back(s.regression.value());
      prob.push_back(s.probs.value());
    }
    out.regression.push_back(std::move(reg));
    out.probs.push_back(std::move(prob));
  }
  return out;
}

void add_member_weekly(LeadForecasts& lf, const std::vector<std::vector<double>>& member_weekly,
                       const QuantileThresholds& obs_thr) {
  EnsembleForecast ens{member_weekly};
  lf.raw_probs.push_back(ensemble_to_probabilities(ens, obs_thr));
  std::vector<double> mean(ens.n_cells(), 0.0);
  for (const auto& m : member_weekly)
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += m[c];
  for (auto& v : mean) v /= double(member_weekly.size());
  lf.fc_weekly.push_back(std::move(mean));
}

std::vector<LeadForecasts> collect_forecasts(Forecaster& model, const World& world,
                                             const std::vector<Date>& inits, std::size_t members,
                                             const std::vector<int>& weeks, std::uint64_t seed) {
  const auto& data = world.data;
  const std::size_t n = data.grid.n_cells(), k = data.num_bins;
  const std::size_t pc = data.norm.precip_channel;
  const int max_week = *std::max_element(weeks.begin(), weeks.end());
  std::vector<LeadForecasts> out;
  for (int w : weeks) out.push_back(LeadForecasts{w, {}, {}, {}, {}});
  for (const Date& init : inits) {
    const EnsembleOutput ens = infer_ensemble(model, data, init, members,
                                              std::size_t(7 * max_week), seed);
    for (auto& lf : out) {
      const std::size_t lead = std::size_t(7 * lf.week);
      const Date valid = init.plus_days(long(lead));
      std::vector<double> mean_p(k * n, 0.0);
      std::vector<std::vector<double>> weekly(members, std::vector<double>(n, 0.0));
      for (std::size_t m = 0; m < members; ++m) {
        const auto p = ens.probs[m][lead - 1].data();
        for (std::size_t i = 0; i < k * n; ++i) mean_p[i] += p[i];
        for (std::size_t s = lead - 6; s <= lead; ++s) {
          const auto r = ens.regression[m][s - 1].data();
          for (std::size_t c = 0; c < n; ++c)
            weekly[m][c] += data.norm.invert_value(pc, r[pc * n + c]) / 7.0;
        }
      }
      for (auto& v : mean_p) v /= double(members);
      lf.inits.push_back(init);
      lf.model_probs.push_back(std::move(mean_p));
      add_member_weekly(lf, weekly, world.clim.thresholds_at(valid));
    }
  }
  return out;
}

namespace {

template <typename T>
std::vector<T> pick(const std::vector<T>& v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace

Evaluation evaluate_forecasts(const std::vector<LeadForecasts>& forecasts, const World& world,
                              const EvalOptions& opts) {
  require(!forecasts.empty(), ErrorKind::validation, "nothing to evaluate");
  const auto& grid = world.data.grid;
  const std::size_t k = world.data.num_bins;
  const LatWeights wts = latitude_weights(grid);

  std::vector<QuantileThresholds> thr_seq;
  for (const auto& lf : forecasts)
    for (const Date& init : lf.inits)
      thr_seq.push_back(world.clim.thresholds_at(init.plus_days(7 * lf.week)));
  Evaluation ev;
  ev.rpss_mask = build_arid_mask(thr_seq, grid.n_lat(), grid.n_lon(), MetricKind::rpss);
  ev.bss_mask = build_arid_mask(thr_seq, grid.n_lat(), grid.n_lon(), MetricKind::bss);

  std::vector<std::pair<std::string, SpatialMask>> regions{{"global", SpatialMask::full(grid)}};
  if (opts.land) {
    regions.emplace_back("land", *opts.land);
    regions.emplace_back("sea", opts.land->complement());
  }

  std::uint64_t stream = 0;
  auto next_seed = [&] { return derive_seed(opts.seed, {stream++}); };

  for (const auto& lf : forecasts) {
    const std::size_t ns = lf.inits.size();
    require(lf.model_probs.size() == ns && lf.raw_probs.size() == ns && lf.fc_weekly.size() == ns,
            ErrorKind::shape_mismatch, "forecast series lengths differ");
    LabelSeries labels;
    FieldSeries fc_anom, obs_anom;
    for (std::size_t s = 0; s < ns; ++s) {
      const Date valid = lf.inits[s].plus_days(7 * lf.week);
      require(world.weekly_precip.covers(valid), ErrorKind::missing_data,
              "no verifying observation for init " + lf.inits[s].iso() + " week " +
                  std::to_string(lf.week));
      labels.push_back(discretize_field(world.weekly_precip.at(valid),
                                        world.clim.thresholds_at(valid)));
      const auto& cm = world.clim.mean_at(valid);
      fc_anom.push_back(anomaly(lf.fc_weekly[s], cm));
      obs_anom.push_back(anomaly(world.weekly_precip.at(valid), cm));
    }
    const auto events = event_outcomes(labels, k);

    for (const auto& [region, rmask] : regions) {
      const SpatialMask pm = rmask & ev.rpss_mask;
      const SpatialMask bm = rmask & ev.bss_mask;
      const auto clim_rps = clim_rps_per_init(labels, k, wts, pm);
      const FieldSeries ref_p(ns, std::vector<double>(grid.n_cells(), kEventReference));
      const auto clim_bs = brier_per_init(ref_p, events, wts, bm);

      std::vector<double> model_rps;
      for (const auto& [name, probs] :
           {std::pair{std::string("model"), &lf.model_probs},
            std::pair{std::string("raw_ensemble"), &lf.raw_probs}}) {
        const auto rps = rps_per_init(*probs, labels, k, wts, pm);
        const auto b1 = bootstrap_skill(rps, clim_rps, opts.resamples, opts.level, next_seed());
        ev.report.rows.push_back({"rpss", lf.week, region, name, b1.point, b1.lower, b1.upper, ns});
        const auto bs = brier_per_init(event_probabilities(*probs, k), events, wts, bm);
        const auto b2 = bootstrap_skill(bs, clim_bs, opts.resamples, opts.level, next_seed());
        ev.report.rows.push_back({"bss", lf.week, region, name, b2.point, b2.lower, b2.upper, ns});
        if (name == "model") {
          model_rps = rps;
          if (region == "global") {
            ev.per_init.push_back({lf.week, rps, {}, clim_rps, b1});
          }
        } else {
          MetricReport::Comparison cmp{"rps", lf.week, region, name,
                                       bootstrap_difference(rps, model_rps, opts.resamples,
                                                            opts.level, next_seed())};
          ev.report.comparisons.push_back(cmp);
          if (region == "global") ev.per_init.back().raw_rps = rps;
        }
      }

      auto det = [&](const std::string& metric,
                     const std::function<double(const FieldSeries&, const FieldSeries&)>& f) {
        const auto b = bootstrap_statistic(
            ns,
            [&](std::span<const std::size_t> idx) {
              return f(pick(fc_anom, idx), pick(obs_anom, idx));
            },
            opts.resamples, opts.level, next_seed());
        ev.report.rows.push_back({metric, lf.week, region, "model", b.point, b.lower, b.upper, ns});
      };
      det("armse", [&](const FieldSeries& a, const FieldSeries& b) { return armse(a, b, wts, rmask); });
      det("acc", [&](const FieldSeries& a, const FieldSeries& b) { return acc(a, b, wts, rmask); });
      det("tcc", [&](const FieldSeries& a, const FieldSeries& b) { return tcc(a, b, wts, rmask).value; });
    }
  }
  return ev;
}

namespace {

std::string member_var(const char* kind, std::size_t m, const std::string& suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_m%02zu_%s", kind, m, suffix.c_str());
  return buf;
}

GridField make_field(const ForecastDataset& data, std::string var, const Date& init, int lead,
                     std::span<const double> v) {
  GridField f;
  f.variable = std::move(var);
  f.units = "1";
  f.grid = data.grid;
  f.date = init;
  f.lead = lead;
  f.values.assign(v.begin(), v.end());
  return f;
}

}  // namespace

FieldArchive forecast_archive(const Forecaster& model, const ForecastDataset& data,
                              const Date& init, const EnsembleOutput& ens) {
  const std::size_t n = data.grid.n_cells(), k = data.num_bins;
  const std::size_t members = ens.regression.size();
  const std::size_t channels = model.config().channels;
  FieldArchive a;
  for (std::size_t s = 0; s < ens.regression.front().size(); ++s) {
    const int lead = int(s + 1);
    std::vector<double> mean_p(k * n, 0.0);
    for (std::size_t m = 0; m < members; ++m) {
      const Tensor phys = data.norm.invert(ens.regression[m][s]);
      for (std::size_t ch = 0; ch < channels; ++ch) {
        auto f = make_field(data, member_var("reg", m, channel_name(ch)), init, lead,
                            phys.data().subspan(ch * n, n));
        if (ch == 0) f.units = "mm";
        a.put(std::move(f));
      }
      const auto p = ens.probs[m][s].data();
      for (std::size_t b = 0; b < k; ++b)
        a.put(make_field(data, member_var("prob", m, "bin" + std::to_string(b + 1)), init, lead,
                         p.subspan(b * n, n)));
      for (std::size_t i = 0; i < k * n; ++i) mean_p[i] += p[i];
    }
    for (auto& v : mean_p) v /= double(members);
    for (std::size_t b = 0; b < k; ++b)
      a.put(make_field(data, "prob_mean_bin" + std::to_string(b + 1), init, lead,
                       std::span<const double>(mean_p).subspan(b * n, n)));
  }
  return a;
}

std::vector<LeadForecasts> forecasts_from_archive(const FieldArchive& archive, const World& world,
                                                  const std::vector<Date>& inits,
                                                  const std::vector<int>& weeks,
                                                  std::size_t num_bins) {
  const std::size_t n = world.data.grid.n_cells();
  std::vector<LeadForecasts> out;
  for (int w : weeks) out.push_back(LeadForecasts{w, {}, {}, {}, {}});
  std::vector<std::string> missing;
  for (const Date& init : inits) {
    std::size_t members = 0;
    while (archive.contains({member_var("reg", members, "precip"), init, 1})) ++members;
    if (members == 0) {
      missing.push_back(init.iso());
      continue;
    }
    for (auto& lf : out) {
      const int lead = 7 * lf.week;
      std::vector<double> p(num_bins * n);
      for (std::size_t b = 0; b < num_bins; ++b) {
        const auto& f = archive.get("prob_mean_bin" + std::to_string(b + 1), init, lead);
        std::copy(f.values.begin(), f.values.end(), p.begin() + std::ptrdiff_t(b * n));
      }
      std::vector<std::vector<double>> weekly(members, std::vector<double>(n, 0.0));
      for (std::size_t m = 0; m < members; ++m)
        for (int s = lead - 6; s <= lead; ++s) {
          const auto& f = archive.get(member_var("reg", m, "precip"), init, s);
          for (std::size_t c = 0; c < n; ++c) weekly[m][c] += f.values[c] / 7.0;
        }
      lf.inits.push_back(init);
      lf.model_probs.push_back(std::move(p));
      add_member_weekly(lf, weekly, world.clim.thresholds_at(init.plus_days(lead)));
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 10) list += ", ...";
    fail(ErrorKind::missing_data, "forecast archive lacks " + std::to_string(missing.size()) +
                                      " initialisation(s): " + list);
  }
  return out;
}

CalibrationStudy run_calibration_study(const World& world, std::size_t members, double bias,
                                       int lead_days) {
  const auto& cfg = world.config;
  const auto daily = generate_biased_forecaster(cfg.world, world.truth.channels[0], members, bias);
  const ReforecastArchive archive = weekly_reforecast(daily);
  const auto& grid = world.data.grid;
  const std::size_t n = grid.n_cells(), k = cfg.model.num_bins;

  std::vector<Date> valid;
  std::vector<QuantileThresholds> obs_thr, model_thr;
  for (int y = cfg.test_years.first; y <= cfg.test_years.last; ++y)
    for (const Date& init : monday_thursday_inits(y)) {
      const Date v = init.plus_days(lead_days);
      valid.push_back(v);
      obs_thr.push_back(world.clim.thresholds_at(v));
      model_thr.push_back(model_thresholds(archive, v, cfg.clim_years, k));
    }
  CalibrationStudy st;
  st.mask = build_arid_mask(obs_thr, grid.n_lat(), grid.n_lon(), MetricKind::rpss) &
            build_arid_mask(obs_thr, grid.n_lat(), grid.n_lon(), MetricKind::bss);
  st.mismatch = q80_mismatch_table(model_thr, obs_thr, valid, grid, st.mask);
  st.calibrated_freq.assign(k, 0.0);
  st.raw_freq.assign(k, 0.0);
  double count = 0.0;
  for (std::size_t d = 0; d < valid.size(); ++d) {
    EnsembleForecast ens;
    for (const auto& m : archive.members) {
      const auto v = m.at(valid[d]);
      ens.members.emplace_back(v.begin(), v.end());
    }
    const auto pc = ensemble_to_probabilities(ens, model_thr[d]);
    const auto pr = ensemble_to_probabilities(ens, obs_thr[d]);
    for (std::size_t c = 0; c < n; ++c) {
      if (!st.mask.kept(c)) continue;
      for (std::size_t b = 0; b < k; ++b) {
        st.calibrated_freq[b] += pc[b * n + c];
        st.raw_freq[b] += pr[b * n + c];
      }
      count += 1.0;
    }
  }
  for (auto& v : st.calibrated_freq) v /= count;
  for (auto& v : st.raw_freq) v /= count;
  return st;
}

}  // namespace qw
