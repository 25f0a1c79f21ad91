// Acceptance checks. Prints one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qw/gradsuite.hpp"
#include "qw/ops.hpp"
#include "qw/pipeline.hpp"
#include "qw/rng.hpp"

namespace fs = std::filesystem;
using namespace qw;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ------------------------------------------------------------------ shared

const World& desk_world() {
  static const World w = build_world(desk_config());
  return w;
}

double brute_rps(const std::vector<double>& p, std::size_t obs) {
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    double a = 0.0, b = 0.0;
    for (std::size_t l = 0; l <= k; ++l) {
      a += p[l];
      b += l == obs ? 1.0 : 0.0;
    }
    total += (a - b) * (a - b);
  }
  return total;
}

double sort_interp_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double r = 1.0 + p * double(v.size() - 1);
  const auto lo = static_cast<std::size_t>(r);
  if (lo >= v.size()) return v.back();
  return v[lo - 1] + (r - double(lo)) * (v[lo] - v[lo - 1]);
}

std::vector<Date> held_out_inits(const RunConfig& c) {
  std::vector<Date> out;
  for (int y = c.test_years.first; y <= c.test_years.last; ++y)
    for (const Date& d : monday_thursday_inits(y)) out.push_back(d);
  return out;
}

// Held-out skill of a model at every configured lead week.
struct Skill {
  int week = 0;
  BootstrapResult model;
  double raw_rpss = 0.0;
  BootstrapResult vs_raw;  ///< mean per-init RPS(raw) - RPS(model)
};

std::vector<Skill> held_out_skill(Forecaster& model, const World& w, std::uint64_t seed) {
  const auto inits = held_out_inits(w.config);
  const auto fc = collect_forecasts(model, w, inits, w.config.members, w.config.lead_weeks, seed);
  EvalOptions o;
  o.resamples = w.config.bootstrap_resamples;
  o.level = w.config.bootstrap_level;
  o.seed = seed;
  const Evaluation ev = evaluate_forecasts(fc, w, o);
  std::vector<Skill> out;
  for (const auto& pi : ev.per_init) {
    Skill s;
    s.week = pi.week;
    s.model = pi.model_skill;
    const double raw = std::accumulate(pi.raw_rps.begin(), pi.raw_rps.end(), 0.0);
    const double clim = std::accumulate(pi.clim_rps.begin(), pi.clim_rps.end(), 0.0);
    s.raw_rpss = 1.0 - raw / clim;
    s.vs_raw = bootstrap_difference(pi.raw_rps, pi.model_rps, o.resamples, o.level,
                                    derive_seed(seed, {0xC0DE, std::uint64_t(pi.week)}));
    out.push_back(s);
  }
  return out;
}

const Skill& at_week(const std::vector<Skill>& s, int week) {
  for (const auto& x : s)
    if (x.week == week) return x;
  throw std::runtime_error("lead week missing from evaluation");
}

// Lead week judged for skill: the first week whose verifying day lies inside
// the phase-2 rollout range.
int judged_week(const RunConfig& c) {
  for (int wk : c.lead_weeks)
    if (std::size_t(7 * wk) >= c.phase2.first && std::size_t(7 * wk) <= c.phase2.last) return wk;
  return c.lead_weeks.back();
}

struct EcctRun {
  std::vector<Skill> phase1, full;
  double phase1_seconds = 0.0, total_seconds = 0.0;
};

EcctRun run_ecct(std::uint64_t seed) {
  const auto t0 = Clock::now();
  const World& base = desk_world();
  World w = base;
  w.config.seed = seed;
  Forecaster model = make_model(w.config, w.data);
  Trainer tr(w.config, model, w.data);
  EcctRun r;
  TrainerOptions o1;
  o1.stop_after = tr.schedule().phase1_iters();
  tr.run(o1);
  r.phase1_seconds = seconds_since(t0);
  const auto te = Clock::now();
  r.phase1 = held_out_skill(model, w, derive_seed(seed, {0xE7A1}));
  const double eval_seconds = seconds_since(te);
  tr.run(TrainerOptions{});
  r.full = held_out_skill(model, w, derive_seed(seed, {0xE7A1}));
  // phase-1 evaluation is bookkeeping for the ablation, not part of the run
  r.total_seconds = seconds_since(t0) - eval_seconds;
  for (const auto* tag : {"phase 1", "full"}) {
    const auto& s = std::string(tag) == "phase 1" ? r.phase1 : r.full;
    for (const auto& k : s)
      std::printf("  seed %llu %-7s week %d  RPSS %+.4f [%+.4f, %+.4f]  raw M=%zu RPSS %+.4f\n",
                  (unsigned long long)seed, tag, k.week, k.model.point, k.model.lower,
                  k.model.upper, w.config.members, k.raw_rpss);
  }
  std::printf("  seed %llu training+inference %.0f s\n", (unsigned long long)seed, r.total_seconds);
  std::fflush(stdout);
  return r;
}

std::map<std::uint64_t, EcctRun>& ecct_cache() {
  static std::map<std::uint64_t, EcctRun> cache;
  return cache;
}

const EcctRun& ecct(std::uint64_t seed) {
  auto& c = ecct_cache();
  auto it = c.find(seed);
  if (it == c.end()) it = c.emplace(seed, run_ecct(seed)).first;
  return it->second;
}

// --------------------------------------------------------------- criteria

Outcome c1_gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  std::size_t checks = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    for (const auto& e : run_gradient_suite(seed)) {
      ++checks;
      if (e.result.max_rel_error > worst) {
        worst = e.result.max_rel_error;
        where = e.name + " seed " + std::to_string(seed);
      }
    }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 120.0,
          fmt("%zu checks over 10 seeds, worst relative error %.2e (%s), %.1f s", checks, worst,
              where.c_str(), secs)};
}

Outcome c2_losses() {
  Rng rng(20220103);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> p(5);
    double s = 0.0;
    for (auto& v : p) s += (v = -std::log(rng.uniform()));
    for (auto& v : p) v /= s;
    const std::size_t obs = rng.below(5);
    Tape t(false);
    const std::size_t lab[] = {obs};
    const double r = rps_loss(t.constant(Tensor({5, 1, 1}, p)), one_hot(lab, 5, 1, 1),
                              LatWeights::uniform(1)).item();
    worst = std::max(worst, std::abs(r - brute_rps(p, obs)));
  }
  auto uniform = [](std::size_t obs, bool ce) {
    Tape t(false);
    const std::size_t lab[] = {obs};
    const Var q = t.constant(Tensor({5, 1, 1}, 0.2));
    const Tensor oh = one_hot(lab, 5, 1, 1);
    return ce ? ce_loss(q, oh, LatWeights::uniform(1)).item()
              : rps_loss(q, oh, LatWeights::uniform(1)).item();
  };
  const double r3 = uniform(2, false), r1 = uniform(0, false), ce = uniform(2, true);
  const double ref3 = 0.04 + 0.16 + 0.16 + 0.04, ref1 = 0.64 + 0.36 + 0.16 + 0.04;
  const bool ok = worst <= 1e-12 && r3 == ref3 && r1 == ref1 &&
                  std::abs(ce - std::log(5.0)) <= 1e-9;
  return {ok, fmt("brute-force max diff %.1e over 1e4 cases; uniform RPS %.17g (bin 3), %.17g "
                  "(bin 1); CE - ln5 = %.1e",
                  worst, r3, r1, ce - std::log(5.0))};
}

Outcome c3_zero_init() {
  const World& w = desk_world();
  std::size_t reg_nonzero = 0, prob_off = 0, values = 0;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    RunConfig c = w.config;
    c.seed = seed;
    Forecaster m = make_model(c, w.data);
    for (const Date& init : {Date(2022, 1, 3), Date(2022, 7, 14)}) {
      const auto ens = infer_ensemble(m, w.data, init, 2, 3, seed);
      for (std::size_t mem = 0; mem < ens.regression.size(); ++mem)
        for (std::size_t s = 0; s < ens.regression[mem].size(); ++s) {
          for (double v : ens.regression[mem][s].storage()) reg_nonzero += v != 0.0, ++values;
          for (double v : ens.probs[mem][s].storage()) prob_off += v != 0.2, ++values;
        }
    }
  }
  return {reg_nonzero == 0 && prob_off == 0,
          fmt("%zu values checked on the 8x16 world: %zu nonzero regression, %zu probabilities "
              "differing from 0.2",
              values, reg_nonzero, prob_off)};
}

Outcome c4_quantiles() {
  Rng rng(404);
  double worst = 0.0;
  bool monotone = true;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 5 + rng.below(200);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform() < 0.3 ? 0.0 : std::exp(1.5 * rng.normal());
    const auto t = quantile_thresholds(ClimSampleSet{1, n, v});
    for (std::size_t b = 0; b < 4; ++b) {
      worst = std::max(worst, std::abs(t.bounds[b][0] - sort_interp_quantile(v, 0.2 * double(b + 1))));
      if (b && t.bounds[b][0] < t.bounds[b - 1][0]) monotone = false;
    }
  }
  std::vector<double> seq(100);
  std::iota(seq.begin(), seq.end(), 1.0);
  const double q20 = quantile_thresholds(ClimSampleSet{1, 100, seq}).bounds[0][0];
  // every threshold of the desk climatology
  for (const auto& [d, thr] : desk_world().clim.thresholds)
    for (std::size_t b = 1; b < thr.bounds.size(); ++b)
      for (std::size_t c = 0; c < thr.num_cells(); ++c)
        if (thr.bounds[b][c] < thr.bounds[b - 1][c]) monotone = false;
  return {worst <= 1e-12 && q20 == 20.8 && monotone,
          fmt("oracle max diff %.1e over 1e3 sets; q20{1..100} = %.17g; monotone %s", worst, q20,
              monotone ? "yes" : "no")};
}

Outcome c5_calibration() {
  const auto t0 = Clock::now();
  const World& w = desk_world();
  const int lead = 14;
  const auto st = run_calibration_study(w, 11, 0.7, lead);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string freq, observed;
  for (double f : st.calibrated_freq) {
    worst = std::max(worst, std::abs(f - 0.2));
    freq += fmt(" %.3f", f);
  }
  // observed category frequencies over the same cells and dates
  std::vector<double> obs(st.calibrated_freq.size(), 0.0);
  double count = 0.0;
  for (int y = w.config.test_years.first; y <= w.config.test_years.last; ++y)
    for (const Date& init : monday_thursday_inits(y)) {
      const Date v = init.plus_days(lead);
      const auto lab = discretize_field(w.weekly_precip.at(v), w.clim.thresholds_at(v));
      for (std::size_t c = 0; c < lab.size(); ++c)
        if (st.mask.kept(c)) obs[lab[c]] += 1.0, count += 1.0;
    }
  for (double f : obs) observed += fmt(" %.3f", f / count);
  const double below = st.mismatch.below_fraction();
  return {below > 0.95 && worst <= 0.05 && secs < 300.0,
          fmt("model q80 < observed q80 in %.4f of %zu cell-dates; calibrated bin frequencies%s "
              "(max |f-0.2| %.3f; observed categories in the same year%s); %.1f s",
              below, st.mismatch.rows.size(), freq.c_str(), worst, observed.c_str(), secs)};
}

Outcome c6_skill() {
  const auto& r = ecct(0);
  const int wk = judged_week(desk_world().config);
  const Skill& s = at_week(r.full, wk);
  const bool ok = s.model.point > 0.0 && s.model.lower > 0.0 && s.model.point > s.raw_rpss &&
                  r.total_seconds < 900.0;
  return {ok, fmt("week %d held-out RPSS %+.4f, 97.5%% CI [%+.4f, %+.4f]; raw M=8 ensemble RPSS "
                  "%+.4f (paired RPS gain %+.4f [%+.4f, %+.4f]); %.0f s",
                  wk, s.model.point, s.model.lower, s.model.upper, s.raw_rpss, s.vs_raw.point,
                  s.vs_raw.lower, s.vs_raw.upper, r.total_seconds)};
}

Outcome c7_metrics() {
  Rng rng(77);
  const std::size_t n = 12, ns = 20;
  const LatWeights w = latitude_weights(LatLonGrid::regular(3, 4));
  const SpatialMask m = SpatialMask::full(3, 4);
  LabelSeries labels(ns, std::vector<std::size_t>(n));
  for (auto& row : labels)
    for (auto& v : row) v = rng.below(5);
  ProbSeries uni(ns, std::vector<double>(5 * n, 0.2)), perfect(ns, std::vector<double>(5 * n, 0.0));
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t c = 0; c < n; ++c) perfect[s][labels[s][c] * n + c] = 1.0;
  const double r0 = rpss(uni, labels, 5, w, m), r1 = rpss(perfect, labels, 5, w, m);
  const auto events = event_outcomes(labels, 5);
  const double b0 = bss(FieldSeries(ns, std::vector<double>(n, 0.2)), events, w, m);
  FieldSeries f(ns, std::vector<double>(n)), o(ns, std::vector<double>(n)), f3 = f;
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t c = 0; c < n; ++c) {
      f[s][c] = rng.normal();
      o[s][c] = rng.normal();
      f3[s][c] = 3.7 * f[s][c];
    }
  const double a1 = acc(f, o, w, m), a2 = acc(f3, o, w, m);
  const double rm = armse({{0.0}, {2.0}}, {{0.0}, {0.0}}, latitude_weights(LatLonGrid({0.0}, 1)),
                          SpatialMask::full(1, 1));
  const bool ok = std::abs(r0) <= 1e-12 && r1 == 1.0 && std::abs(b0) <= 1e-12 &&
                  std::abs(a1 - a2) <= 1e-12 && std::abs(rm - std::sqrt(2.0)) <= 1e-15;
  return {ok, fmt("RPSS uniform %.1e, perfect %.17g; BSS(0.2) %.1e; ACC %.15f vs scaled %.15f; "
                  "aRMSE %.17g",
                  r0, r1, b0, a1, a2, rm)};
}

Outcome c8_bootstrap() {
  Rng rng(88);
  int covered = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(100), b(100, 0.0);
    for (auto& v : a) v = 1.0 + rng.normal();
    const auto r = bootstrap_difference(a, b, 1000, 0.975, derive_seed(88, {std::uint64_t(trial)}));
    covered += r.lower <= 1.0 && 1.0 <= r.upper;
  }
  return {covered >= 92, fmt("97.5%% interval covered the true shift in %d/100 trials", covered)};
}

std::string slurp_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& p : files) {
    std::ifstream in(p, std::ios::binary);
    all += fs::relative(p, dir).string() + '\n';
    all.append(std::istreambuf_iterator<char>(in), {});
  }
  return all;
}

Outcome c9_determinism() {
  const World& base = desk_world();
  RunConfig c = base.config;
  c.iters_per_step = 2;
  c.batch = 4;
  c.groups_per_update = 2;
  World w = base;
  w.config = c;
  const auto root = fs::temp_directory_path() / "qw_acceptance_determinism";
  fs::remove_all(root);

  struct Result {
    std::string log, archive, report;
    std::vector<std::vector<double>> params;
  };
  auto run = [&](int tag) {
    Result r;
    Forecaster m = make_model(c, w.data);
    Trainer tr(c, m, w.data);
    std::ostringstream log;
    TrainerOptions o;
    o.log = &log;
    tr.run(o);
    r.log = log.str();
    for (const auto& p : m.parameters()) r.params.push_back(p.value.storage());
    const auto dir = root / ("fc" + std::to_string(tag));
    const std::vector<Date> inits{Date(2022, 1, 3), Date(2022, 1, 6), Date(2022, 6, 2)};
    for (const Date& d : inits) {
      const auto ens = infer_ensemble(m, w.data, d, 3, 14, 5);
      forecast_archive(m, w.data, d, ens).save(dir);
    }
    r.archive = slurp_dir(dir);
    const auto fc = forecasts_from_archive(FieldArchive::load(dir), w, inits, c.lead_weeks,
                                           c.model.num_bins);
    EvalOptions eo;
    eo.resamples = 200;
    eo.seed = 9;
    eo.land = w.truth.land;
    const auto ev = evaluate_forecasts(fc, w, eo);
    std::ostringstream csv;
    ev.report.write_csv(csv);
    r.report = ev.report.to_json().dump() + csv.str();
    return r;
  };
  const Result a = run(0), b = run(1);
  const bool same = a.log == b.log && a.params == b.params && a.archive == b.archive &&
                    a.report == b.report;

  // interrupted mid phase 2, resumed from the file
  const std::size_t stop = ECCTSchedule::from(c).phase1_iters() + 3;
  {
    Forecaster m = make_model(c, w.data);
    Trainer tr(c, m, w.data);
    TrainerOptions o;
    o.checkpoint_dir = root / "ck";
    o.stop_after = stop;
    tr.run(o);
  }
  Forecaster m = make_model(c, w.data);
  Trainer tr(c, m, w.data);
  tr.resume(Checkpoint::load(root / "ck" / ("ckpt_iter" + std::to_string(stop) + ".qwck")));
  tr.run(TrainerOptions{});
  std::vector<std::vector<double>> resumed;
  for (const auto& p : m.parameters()) resumed.push_back(p.value.storage());
  const bool resume_ok = resumed == a.params;
  fs::remove_all(root);
  return {same && resume_ok,
          fmt("two runs: logs %s, parameters %s, archives %s (%zu bytes), reports %s; resume "
              "at iteration %zu %s",
              a.log == b.log ? "identical" : "differ", a.params == b.params ? "identical" : "differ",
              a.archive == b.archive ? "identical" : "differ", a.archive.size(),
              a.report == b.report ? "identical" : "differ", stop,
              resume_ok ? "matches the uninterrupted run" : "differs")};
}

Outcome c10_calendar() {
  const World& w = desk_world();
  const auto inits = monday_thursday_inits(2022);
  bool weekdays = true;
  for (const Date& d : inits) weekdays = weekdays && (d.weekday() == 1 || d.weekday() == 4);
  std::set<std::size_t> counts;
  for (const Date& d : inits)
    counts.insert(collect_samples(w.weekly_precip, d.plus_days(14), w.config.clim_years).n_samples);
  const bool ok = inits.size() == 104 && weekdays && counts == std::set<std::size_t>{100};
  return {ok, fmt("2022 has %zu Monday/Thursday inits (all Mon/Thu: %s); samples per date: %zu "
                  "distinct value(s), first %zu",
                  inits.size(), weekdays ? "yes" : "no", counts.size(),
                  counts.empty() ? 0 : *counts.begin())};
}

Outcome c11_ablation() {
  const int wk = judged_week(desk_world().config);
  std::vector<double> with, without;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto& r = ecct(seed);
    without.push_back(at_week(r.phase1, wk).model.point);
    with.push_back(at_week(r.full, wk).model.point);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  std::string detail = fmt("week %d held-out RPSS per seed (phase 1 -> with phase 2):", wk);
  for (std::size_t i = 0; i < with.size(); ++i) detail += fmt(" %+.3f->%+.3f", without[i], with[i]);
  const double mw = median(with), mo = median(without);
  detail += fmt("; medians %+.4f with, %+.4f without", mw, mo);
  return {mw >= mo, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<int, std::function<Outcome()>>> all{
      {1, c1_gradients}, {2, c2_losses},       {3, c3_zero_init}, {4, c4_quantiles},
      {5, c5_calibration}, {6, c6_skill},      {7, c7_metrics},   {8, c8_bootstrap},
      {9, c9_determinism}, {10, c10_calendar}, {11, c11_ablation}};
  int failed = 0;
  for (const auto& [id, fn] : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
