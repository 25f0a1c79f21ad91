#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qw/checkpoint.hpp"
#include "qw/config.hpp"
#include "qw/error.hpp"
#include "qw/gradsuite.hpp"
#include "qw/pipeline.hpp"
#include "qw/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kWorldFile = "world.json";

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
};

qw::RunConfig read_config(const std::string& path) {
  return path.empty() ? qw::desk_config() : qw::load_config(path);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  qw::require(static_cast<bool>(os), qw::ErrorKind::io, "cannot write " + path.string());
  os << text;
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  qw::require(static_cast<bool>(is), qw::ErrorKind::io, "cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    qw::fail(qw::ErrorKind::validation, path.string() + ": " + e.what());
  }
}

void parse_grid(const std::string& spec, qw::RunConfig& c) {
  unsigned h = 0, w = 0;
  char x = 0;
  std::istringstream is(spec);
  is >> h >> x >> w;
  qw::require(is && !is.rdbuf()->in_avail() && (x == 'x' || x == 'X') && h > 0 && w > 0,
              qw::ErrorKind::validation, "--grid expects HxW, got '" + spec + "'");
  c.world.n_lat = h;
  c.world.n_lon = w;
}

// World rebuilt from a truth archive written by gen-data.
qw::World load_world(qw::RunConfig config, const std::string& data_dir) {
  const fs::path root(data_dir);
  const fs::path wf = root / kWorldFile;
  if (fs::exists(wf)) {
    json j = qw::to_json(config);
    j["world"] = read_json(wf).at("world");
    config = qw::config_from_json(j);
  }
  const auto archive = qw::FieldArchive::load(root / "truth");
  auto truth = qw::truth_from_archive(archive, config.world);
  config.data_start = truth.start();
  config.data_end = truth.last();
  return qw::build_world(config, std::move(truth));
}

std::vector<qw::Date> test_inits(const qw::RunConfig& c) {
  std::vector<qw::Date> out;
  for (int y = c.test_years.first; y <= c.test_years.last; ++y)
    for (const auto& d : qw::monday_thursday_inits(y)) out.push_back(d);
  return out;
}

std::vector<qw::Date> parse_dates(const std::vector<std::string>& items) {
  std::vector<qw::Date> out;
  for (const auto& s : items) out.push_back(qw::Date::parse(s));
  return out;
}

// ---------------------------------------------------------------- commands

int cmd_gen_data(const Common& co, const std::string& grid) {
  qw::RunConfig c = read_config(co.config);
  c.world.seed = co.seed;
  if (!grid.empty()) parse_grid(grid, c);
  c.world.validate();
  const auto truth = qw::generate_truth(c.world, c.data_start, c.data_end);
  const fs::path out(co.out);
  qw::truth_to_archive(truth).save(out / "truth");
  json w = qw::to_json(c);
  write_text(out / kWorldFile, json{{"world", w["world"]}}.dump(2) + "\n");
  std::printf("wrote %zu days x %zu channels on %zux%zu to %s\n", truth.channels[0].n_days(),
              truth.channels.size(), truth.grid.n_lat(), truth.grid.n_lon(), co.out.c_str());
  return 0;
}

int cmd_climatology(const Common& co, const std::string& data) {
  const qw::RunConfig c = read_config(co.config);
  const qw::World world = load_world(c, data);
  qw::FieldArchive a;
  const std::size_t k = world.clim.num_bins;
  for (const auto& [date, thr] : world.clim.thresholds) {
    if (!world.config.test_years.contains(date.year())) continue;
    for (std::size_t b = 0; b + 1 < k; ++b) {
      qw::GridField f;
      f.variable = "clim_q" + std::to_string((b + 1) * 100 / k);
      f.units = "mm";
      f.grid = world.data.grid;
      f.date = date;
      f.values = thr.bounds[b];
      a.put(std::move(f));
    }
    qw::GridField m;
    m.variable = "clim_mean";
    m.units = "mm";
    m.grid = world.data.grid;
    m.date = date;
    m.values = world.clim.mean_at(date);
    a.put(std::move(m));
  }
  a.save(co.out);
  std::printf("wrote %zu climatology fields to %s\n", a.size(), co.out.c_str());
  return 0;
}

int cmd_train(const Common& co, const std::string& data, const std::string& phase,
              std::size_t iters, const std::string& resume) {
  qw::RunConfig c = read_config(co.config);
  c.seed = co.seed;
  if (iters) c.iters_per_step = iters;
  const qw::World world = load_world(c, data);
  qw::Forecaster model = qw::make_model(world.config, world.data);
  qw::Trainer trainer(world.config, model, world.data);
  if (!resume.empty()) trainer.resume(qw::Checkpoint::load(resume));

  const auto& sched = trainer.schedule();
  qw::TrainerOptions opts;
  opts.checkpoint_dir = co.out;
  if (phase == "1") {
    opts.stop_after = sched.phase1_iters();
  } else if (phase == "2") {
    qw::require(trainer.iteration() >= sched.phase1_iters(), qw::ErrorKind::validation,
                "--phase 2 needs --resume with a checkpoint from the end of phase 1");
  }
  fs::create_directories(co.out);
  std::ofstream log(fs::path(co.out) / "train_log.jsonl",
                    trainer.iteration() ? std::ios::app : std::ios::trunc);
  opts.log = &log;
  const auto prog = trainer.run(opts);
  const auto& last = prog.history.empty() ? qw::LossComponents{} : prog.history.back();
  std::printf("iteration %zu/%zu  total %.6f  reg %.6f  rps %.6f  ce %.6f  kl %.6f\n",
              prog.iteration, sched.total_iters(), last.total, last.reg, last.rps, last.ce,
              last.kl);
  return 0;
}

// Model rebuilt from a checkpoint written by train.
struct LoadedModel {
  qw::RunConfig config;
  std::optional<qw::Forecaster> model;
};

LoadedModel load_model(const qw::Checkpoint& ck, const qw::RunConfig& fallback,
                       const qw::ForecastDataset& data) {
  LoadedModel lm;
  lm.config = ck.meta.contains("config") ? qw::config_from_json(ck.meta["config"]) : fallback;
  lm.model.emplace(lm.config.model, data.grid.n_lat(), data.grid.n_lon(), 0);
  qw::restore_model(ck, *lm.model);
  return lm;
}

int cmd_infer(const Common& co, const std::string& data, const std::string& ckpt,
              std::size_t members, const std::vector<std::string>& inits, std::size_t steps) {
  const qw::Checkpoint ck = qw::Checkpoint::load(ckpt);
  qw::RunConfig c = ck.meta.contains("config") ? qw::config_from_json(ck.meta["config"])
                                               : read_config(co.config);
  const qw::World world = load_world(c, data);
  if (ck.meta.contains("normalizer")) {
    const auto trained = qw::normalizer_from_json(ck.meta["normalizer"]);
    qw::require(trained.mean == world.data.norm.mean && trained.stddev == world.data.norm.stddev,
                qw::ErrorKind::checkpoint_mismatch,
                "checkpoint was trained on different data (normalisation differs)");
  }
  LoadedModel lm = load_model(ck, c, world.data);
  const std::size_t m = members ? members : c.members;
  qw::require(m >= 1, qw::ErrorKind::validation, "--members must be >= 1");
  const auto dates = inits.empty() ? test_inits(c) : parse_dates(inits);
  const int max_week = *std::max_element(c.lead_weeks.begin(), c.lead_weeks.end());
  const std::size_t n_steps = steps ? steps : std::size_t(7 * max_week);
  std::vector<std::string> missing;
  for (const auto& d : dates)
    if (!world.data.covers(d) || !world.data.covers(d.plus_days(-1))) missing.push_back(d.iso());
  if (!missing.empty())
    qw::fail(qw::ErrorKind::missing_data,
             "no initial state for " + std::to_string(missing.size()) + " date(s), first " +
                 missing.front());
  std::size_t written = 0;
  for (const auto& d : dates) {
    const auto ens = qw::infer_ensemble(*lm.model, world.data, d, m, n_steps, co.seed);
    const auto a = qw::forecast_archive(*lm.model, world.data, d, ens);
    a.save(co.out);
    written += a.size();
  }
  std::printf("wrote %zu fields for %zu initialisations (M=%zu, %zu steps) to %s\n", written,
              dates.size(), m, n_steps, co.out.c_str());
  return 0;
}

int cmd_calibrate(const Common& co, const std::string& data, std::size_t members,
                  std::optional<double> bias, int lead_days) {
  qw::RunConfig c = read_config(co.config);
  const qw::World world = load_world(c, data);
  qw::World w2 = world;
  w2.config.world.seed = co.seed;
  const double b = bias.value_or(world.config.world.bias);
  const auto st = qw::run_calibration_study(w2, members ? members : c.members, b, lead_days);
  fs::create_directories(co.out);
  std::ostringstream csv;
  st.mismatch.write_csv(csv);
  write_text(fs::path(co.out) / "q80_mismatch.csv", csv.str());
  json j = {{"bias", b},
            {"lead_days", lead_days},
            {"kept_cells", st.mask.kept()},
            {"rows", st.mismatch.rows.size()},
            {"below_fraction", st.mismatch.below_fraction()},
            {"ties", st.mismatch.ties},
            {"calibrated_bin_frequency", st.calibrated_freq},
            {"raw_bin_frequency", st.raw_freq}};
  write_text(fs::path(co.out) / "calibration.json", j.dump(2) + "\n");
  std::printf("model q80 below observed q80 at %.4f of %zu rows\n", st.mismatch.below_fraction(),
              st.mismatch.rows.size());
  std::printf("calibrated bin frequencies:");
  for (double v : st.calibrated_freq) std::printf(" %.4f", v);
  std::printf("\nraw bin frequencies:       ");
  for (double v : st.raw_freq) std::printf(" %.4f", v);
  std::printf("\n");
  return 0;
}

int cmd_evaluate(const Common& co, const std::string& data, const std::string& forecast,
                 const std::string& baseline, const std::string& mask) {
  qw::RunConfig c = read_config(co.config);
  const qw::World world = load_world(c, data);
  const auto inits = test_inits(world.config);
  const auto fa = qw::FieldArchive::load(forecast);
  const auto fc = qw::forecasts_from_archive(fa, world, inits, world.config.lead_weeks,
                                             world.config.model.num_bins);
  qw::EvalOptions opts;
  opts.resamples = world.config.bootstrap_resamples;
  opts.level = world.config.bootstrap_level;
  opts.seed = co.seed;
  if (mask != "global") opts.land = world.truth.land;
  qw::Evaluation ev = qw::evaluate_forecasts(fc, world, opts);

  if (!baseline.empty()) {
    const auto ba = qw::FieldArchive::load(baseline);
    const auto bf = qw::forecasts_from_archive(ba, world, inits, world.config.lead_weeks,
                                               world.config.model.num_bins);
    const qw::Evaluation bev = qw::evaluate_forecasts(bf, world, opts);
    for (std::size_t i = 0; i < ev.per_init.size(); ++i) {
      const auto& mp = ev.per_init[i];
      const auto& bp = bev.per_init[i];
      ev.report.comparisons.push_back(
          {"rps", mp.week, "global", "baseline",
           qw::bootstrap_difference(bp.model_rps, mp.model_rps, opts.resamples, opts.level,
                                    qw::derive_seed(co.seed, {0xBA5E, std::uint64_t(i)}))});
      for (const auto& row : bev.report.rows)
        if (row.lead_week == mp.week && row.forecast == "model") {
          auto r = row;
          r.forecast = "baseline";
          ev.report.rows.push_back(r);
        }
    }
  }
  if (mask != "global" && mask != "all") {
    qw::require(mask == "land" || mask == "sea", qw::ErrorKind::validation,
                "--mask must be global, land, sea or all");
    auto& rows = ev.report.rows;
    rows.erase(std::remove_if(rows.begin(), rows.end(),
                              [&](const qw::MetricRow& r) { return r.region != mask; }),
               rows.end());
    auto& cmp = ev.report.comparisons;
    cmp.erase(std::remove_if(cmp.begin(), cmp.end(),
                             [&](const auto& r) { return r.region != mask; }),
              cmp.end());
  }
  fs::create_directories(co.out);
  std::ostringstream csv;
  ev.report.write_csv(csv);
  write_text(fs::path(co.out) / "metrics.csv", csv.str());
  write_text(fs::path(co.out) / "metrics.json", ev.report.to_json().dump(2) + "\n");
  for (const auto& r : ev.report.rows)
    if (r.metric == "rpss" && (r.region == "global" || r.region == mask))
      std::printf("rpss week %d %-6s %-12s %+.4f [%+.4f, %+.4f]\n", r.lead_week, r.region.c_str(),
                  r.forecast.c_str(), r.score, r.ci_lower, r.ci_upper);
  return 0;
}

// ---------------------------------------------------------------- report

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string svg_chart(const json& rows, const std::string& metric, const std::string& region) {
  std::vector<std::string> forecasts;
  std::vector<int> weeks;
  std::map<std::pair<int, std::string>, json> cell;
  for (const auto& r : rows) {
    if (r["metric"] != metric || r["region"] != region) continue;
    const int wk = r["lead_week"];
    const std::string f = r["forecast"];
    if (std::find(forecasts.begin(), forecasts.end(), f) == forecasts.end()) forecasts.push_back(f);
    if (std::find(weeks.begin(), weeks.end(), wk) == weeks.end()) weeks.push_back(wk);
    cell[{wk, f}] = r;
  }
  std::sort(weeks.begin(), weeks.end());
  double lo = 0.0, hi = 0.0;
  for (const auto& [_, r] : cell) {
    lo = std::min({lo, r["ci_lower"].get<double>(), r["score"].get<double>()});
    hi = std::max({hi, r["ci_upper"].get<double>(), r["score"].get<double>()});
  }
  if (hi - lo < 1e-9) hi = lo + 1.0;
  const double W = 640, H = 360, left = 60, right = 150, top = 40, bottom = 50;
  const double plot_h = H - top - bottom, plot_w = W - left - right;
  auto y = [&](double v) { return top + (hi - v) / (hi - lo) * plot_h; };
  const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">"
    << metric << " (" << region << ") by lead week</text>\n";
  s << "<line x1=\"" << left << "\" x2=\"" << left + plot_w << "\" y1=\"" << y(0) << "\" y2=\""
    << y(0) << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    s << "<text x=\"" << left - 6 << "\" y=\"" << y(v) + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(v, "%.2f")
      << "</text>\n";
  }
  const double group_w = weeks.empty() ? plot_w : plot_w / double(weeks.size());
  const double bar_w = forecasts.empty() ? 0 : group_w * 0.7 / double(forecasts.size());
  for (std::size_t wi = 0; wi < weeks.size(); ++wi) {
    const double gx = left + group_w * double(wi) + group_w * 0.15;
    s << "<text x=\"" << gx + group_w * 0.35 << "\" y=\"" << H - bottom + 20
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">week "
      << weeks[wi] << "</text>\n";
    for (std::size_t fi = 0; fi < forecasts.size(); ++fi) {
      auto it = cell.find({weeks[wi], forecasts[fi]});
      if (it == cell.end()) continue;
      const double v = it->second["score"], l = it->second["ci_lower"], u = it->second["ci_upper"];
      const double x = gx + bar_w * double(fi);
      s << "<rect x=\"" << x << "\" y=\"" << std::min(y(v), y(0)) << "\" width=\"" << bar_w * 0.9
        << "\" height=\"" << std::abs(y(v) - y(0)) << "\" fill=\"" << colours[fi % 5] << "\"/>\n";
      const double cx = x + bar_w * 0.45;
      s << "<line x1=\"" << cx << "\" x2=\"" << cx << "\" y1=\"" << y(l) << "\" y2=\"" << y(u)
        << "\" stroke=\"black\"/>\n";
    }
  }
  for (std::size_t fi = 0; fi < forecasts.size(); ++fi) {
    const double ly = top + 18.0 * double(fi);
    s << "<rect x=\"" << W - right + 12 << "\" y=\"" << ly << "\" width=\"12\" height=\"12\" fill=\""
      << colours[fi % 5] << "\"/>\n";
    s << "<text x=\"" << W - right + 30 << "\" y=\"" << ly + 10
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << forecasts[fi] << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

int cmd_report(const std::string& in, const std::string& out) {
  fs::path src(in);
  if (fs::is_directory(src)) src /= "metrics.json";
  const json rep = read_json(src);
  const json& rows = rep.at("rows");
  std::ostringstream md, csv;
  md << "| metric | week | region | forecast | score | CI lower | CI upper | n |\n"
     << "|---|---|---|---|---|---|---|---|\n";
  csv << "metric\tlead_week\tregion\tforecast\tscore\tci_lower\tci_upper\tn_samples\n";
  std::vector<std::string> regions;
  for (const auto& r : rows) {
    const std::string region = r["region"];
    if (std::find(regions.begin(), regions.end(), region) == regions.end()) regions.push_back(region);
    md << "| " << r["metric"].get<std::string>() << " | " << r["lead_week"].get<int>() << " | "
       << region << " | " << r["forecast"].get<std::string>() << " | " << fmt(r["score"]) << " | "
       << fmt(r["ci_lower"]) << " | " << fmt(r["ci_upper"]) << " | "
       << r["n_samples"].get<std::size_t>() << " |\n";
    csv << r["metric"].get<std::string>() << '\t' << r["lead_week"].get<int>() << '\t' << region
        << '\t' << r["forecast"].get<std::string>() << '\t' << fmt(r["score"], "%.6f") << '\t'
        << fmt(r["ci_lower"], "%.6f") << '\t' << fmt(r["ci_upper"], "%.6f") << '\t'
        << r["n_samples"].get<std::size_t>() << '\n';
  }
  if (rep.contains("comparisons") && !rep["comparisons"].empty()) {
    md << "\n| comparison | week | region | baseline | mean difference | CI lower | CI upper | "
          "significant |\n|---|---|---|---|---|---|---|---|\n";
    for (const auto& c : rep["comparisons"]) {
      md << "| " << c["metric"].get<std::string>() << " | " << c["lead_week"].get<int>() << " | "
         << c["region"].get<std::string>() << " | " << c["baseline"].get<std::string>() << " | "
         << fmt(c["mean_difference"]) << " | " << fmt(c["ci_lower"]) << " | " << fmt(c["ci_upper"])
         << " | "
         << (c["significant"].get<bool>() ? "yes" : "no") << " |\n";
    }
  }
  const fs::path o(out);
  write_text(o / "report.md", md.str());
  write_text(o / "report.tsv", csv.str());
  for (const auto& region : regions)
    for (const char* metric : {"rpss", "bss"})
      write_text(o / (std::string(metric) + "_" + region + ".svg"), svg_chart(rows, metric, region));
  std::printf("wrote report for %zu rows to %s\n", rows.size(), out.c_str());
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t n_seeds, double tol) {
  bool ok = true;
  std::map<std::string, qw::GradSuiteEntry> worst;
  for (std::size_t s = 0; s < n_seeds; ++s)
    for (auto& e : qw::run_gradient_suite(seed + s)) {
      auto it = worst.find(e.name);
      if (it == worst.end() || e.result.max_rel_error > it->second.result.max_rel_error)
        worst[e.name] = e;
    }
  for (const auto& [name, e] : worst) {
    const bool pass = e.result.max_rel_error <= tol;
    ok = ok && pass;
    std::printf("%-18s max rel error %.3e  seed %llu  %s[%zu]  analytic %.6e  numeric %.6e  %s\n",
                name.c_str(), e.result.max_rel_error, static_cast<unsigned long long>(e.seed),
                e.result.worst_param.c_str(), e.result.worst_index, e.result.analytic,
                e.result.numeric, pass ? "ok" : "FAILED");
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantile-bin probabilistic precipitation forecasting toolkit"};
  app.require_subcommand(1);

  Common co;
  std::string data, grid, phase = "all", checkpoint, resume, forecast, baseline, mask = "all", in;
  std::size_t members = 0, iters = 0, steps = 0, n_seeds = 10;
  int lead_days = 14;
  double tol = 1e-4;
  std::optional<double> bias;
  std::vector<std::string> inits;

  auto add_common = [&](CLI::App* sub, bool with_config, bool with_seed, bool with_out) {
    if (with_config) sub->add_option("--config", co.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    if (with_seed) sub->add_option("--seed", co.seed, "Random seed")->required();
    if (with_out) sub->add_option("--out", co.out, "Output directory")->required();
  };

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic truth archive");
  add_common(gen, true, true, true);
  gen->add_option("--grid", grid, "Grid size HxW, e.g. 8x16");

  auto* clim = app.add_subcommand("climatology", "Write quintile thresholds for the test years");
  add_common(clim, true, false, true);
  clim->add_option("--data", data, "Truth directory from gen-data")->required();

  auto* train = app.add_subcommand("train", "Run the two-phase training curriculum");
  add_common(train, true, true, true);
  train->add_option("--data", data, "Truth directory from gen-data")->required();
  train->add_option("--phase", phase, "1, 2 or all")->check(CLI::IsMember({"1", "2", "all"}));
  train->add_option("--iters-per-step", iters, "Iterations per rollout step");
  train->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);

  auto* infer = app.add_subcommand("infer", "Write an ensemble forecast archive");
  add_common(infer, true, true, true);
  infer->add_option("--data", data, "Truth directory from gen-data")->required();
  infer->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--members", members, "Ensemble size M (default from config)");
  infer->add_option("--init", inits, "Initialisation dates (default: Mondays and Thursdays of the test years)");
  infer->add_option("--steps", steps, "Rollout steps (default: 7 x last lead week)");

  auto* cal = app.add_subcommand("calibrate", "Reforecast calibration of a biased forecaster");
  add_common(cal, true, true, true);
  cal->add_option("--data", data, "Truth directory from gen-data")->required();
  cal->add_option("--members", members, "Reforecast members");
  cal->add_option("--bias", bias, "Multiplicative bias b");
  cal->add_option("--lead-days", lead_days, "Lead in days");

  auto* eval = app.add_subcommand("evaluate", "Verify a forecast archive");
  add_common(eval, true, true, true);
  eval->add_option("--data", data, "Truth directory from gen-data")->required();
  eval->add_option("--forecast", forecast, "Forecast archive from infer")->required();
  eval->add_option("--baseline", baseline, "Baseline forecast archive for paired comparison");
  eval->add_option("--mask", mask, "Region: global, land, sea or all")
      ->check(CLI::IsMember({"global", "land", "sea", "all"}));

  auto* rep = app.add_subcommand("report", "Render metrics as tables and SVG charts");
  rep->add_option("--in", in, "metrics.json or its directory")->required();
  rep->add_option("--out", co.out, "Output directory")->required();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gc->add_option("--seed", co.seed, "First seed")->required();
  gc->add_option("--seeds", n_seeds, "Number of seeds");
  gc->add_option("--tolerance", tol, "Maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_data(co, grid);
    if (*clim) return cmd_climatology(co, data);
    if (*train) return cmd_train(co, data, phase, iters, resume);
    if (*infer) return cmd_infer(co, data, checkpoint, members, inits, steps);
    if (*cal) return cmd_calibrate(co, data, members, bias, lead_days);
    if (*eval) return cmd_evaluate(co, data, forecast, baseline, mask);
    if (*rep) return cmd_report(in, co.out);
    if (*gc) return cmd_gradcheck(co.seed, n_seeds, tol);
  } catch (const qw::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.is_numeric() ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
