#include "qw/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "qw/checkpoint.hpp"
#include "qw/error.hpp"

namespace qw {

void RunConfig::validate() const {
  world.validate();
  model.validate();
  loss.validate();
  require(!clim_years.overlaps(test_years), ErrorKind::validation,
          "climatology period " + std::to_string(clim_years.first) + "-" +
              std::to_string(clim_years.last) + " overlaps test period " +
              std::to_string(test_years.first) + "-" + std::to_string(test_years.last));
  require(!train_years.overlaps(test_years), ErrorKind::validation,
          "training period overlaps test period");
  for (const YearRange& y : {train_years, test_years, clim_years})
    require(y.first <= y.last, ErrorKind::validation, "empty year range");
  require(model.num_bins >= 2, ErrorKind::validation, "K must be >= 2");
  require(members >= 1, ErrorKind::validation, "M must be >= 1");
  require(phase1.first >= 1 && phase1.first <= phase1.last && phase2.first >= 1 &&
              phase2.first <= phase2.last,
          ErrorKind::validation, "rollout phase ranges must be nonempty and 1-based");
  require(phase2_supervise_from == 0 || phase2_supervise_from <= phase2.first,
          ErrorKind::validation, "phase-2 supervision must start at or before phase2.first");
  require(iters_per_step >= 1 && batch >= 1 && groups_per_update >= 1, ErrorKind::validation,
          "iterations per step and batch sizes must be positive");
  require(group >= 2, ErrorKind::validation, "phase-2 group size must be >= 2");
  require(lr > 0.0 && weight_decay >= 0.0, ErrorKind::validation,
          "learning rate must be positive and weight decay nonnegative");
  require(!lead_weeks.empty(), ErrorKind::validation, "no lead weeks to evaluate");
  for (int w : lead_weeks) require(w >= 1, ErrorKind::validation, "lead weeks start at 1");
  require(bootstrap_resamples >= 1 && bootstrap_level > 0.0 && bootstrap_level < 1.0,
          ErrorKind::validation, "bad bootstrap settings");
  require(world.channels == model.channels, ErrorKind::validation,
          "world and model channel counts differ");
  require(data_start < data_end, ErrorKind::validation, "empty data range");
}

namespace {

using nlohmann::json;

YearRange years_from(const json& j) {
  if (j.is_number_integer()) return {j.get<int>(), j.get<int>()};
  require(j.is_array() && j.size() == 2, ErrorKind::validation,
          "year range must be an integer or [first, last]");
  return {j[0].get<int>(), j[1].get<int>()};
}

StepRange steps_from(const json& j) {
  require(j.is_array() && j.size() == 2, ErrorKind::validation,
          "step range must be [first, last]");
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    (void)v;
    require(ok.count(k) != 0, ErrorKind::validation,
            std::string("unknown key '") + k + "' in " + where);
  }
}

}  // namespace

RunConfig desk_config() {
  RunConfig c;
  c.iters_per_step = 50;
  c.lr = 1e-3;
  c.model.hidden = 16;
  c.model.encoder_hidden = 8;
  c.batch = 16;
  c.group = 4;
  c.groups_per_update = 4;
  return c;
}

RunConfig config_from_json(const json& j) {
  require(j.is_object(), ErrorKind::validation, "run config must be a JSON object");
  check_keys(j,
             {"grid", "world", "data_start", "data_end", "train_years", "test_years",
              "clim_years", "lambda_rps", "lambda_ce", "lambda_kl", "charbonnier_eps", "lr",
              "weight_decay", "tau_init", "num_bins", "members", "model", "phase1", "phase2",
              "iters_per_step", "batch", "group", "groups_per_update", "phase2_supervise_from", "detach_rollout", "lead_weeks", "bootstrap_resamples",
              "bootstrap_level", "seed"},
             "run config");
  RunConfig c;
  try {
    if (j.contains("grid")) {
      c.world.n_lat = j["grid"].at(0).get<std::size_t>();
      c.world.n_lon = j["grid"].at(1).get<std::size_t>();
    }
    if (j.contains("world")) {
      const auto& w = j["world"];
      check_keys(w,
                 {"channels", "ar_coeff", "seasonal_amplitude", "advection", "noise_sd",
                  "daily_noise_ratio", "driver_noise_ratio", "smoothing_passes", "arid_offset", "bias",
                  "forecast_noise"},
                 "world");
      c.world.channels = w.value("channels", c.world.channels);
      c.world.ar_coeff = w.value("ar_coeff", c.world.ar_coeff);
      c.world.seasonal_amplitude = w.value("seasonal_amplitude", c.world.seasonal_amplitude);
      c.world.advection = w.value("advection", c.world.advection);
      c.world.noise_sd = w.value("noise_sd", c.world.noise_sd);
      c.world.daily_noise_ratio = w.value("daily_noise_ratio", c.world.daily_noise_ratio);
      c.world.driver_noise_ratio = w.value("driver_noise_ratio", c.world.driver_noise_ratio);
      c.world.smoothing_passes = w.value("smoothing_passes", c.world.smoothing_passes);
      c.world.arid_offset = w.value("arid_offset", c.world.arid_offset);
      c.world.bias = w.value("bias", c.world.bias);
      c.world.forecast_noise = w.value("forecast_noise", c.world.forecast_noise);
    }
    if (j.contains("data_start")) c.data_start = Date::parse(j["data_start"].get<std::string>());
    if (j.contains("data_end")) c.data_end = Date::parse(j["data_end"].get<std::string>());
    if (j.contains("train_years")) c.train_years = years_from(j["train_years"]);
    if (j.contains("test_years")) c.test_years = years_from(j["test_years"]);
    if (j.contains("clim_years")) c.clim_years = years_from(j["clim_years"]);
    c.loss.lambda_rps = j.value("lambda_rps", c.loss.lambda_rps);
    c.loss.lambda_ce = j.value("lambda_ce", c.loss.lambda_ce);
    c.loss.lambda_kl = j.value("lambda_kl", c.loss.lambda_kl);
    c.loss.charbonnier_eps = j.value("charbonnier_eps", c.loss.charbonnier_eps);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    if (j.contains("model")) c.model = model_config_from_json(j["model"]);
    c.model.tau_init = j.value("tau_init", c.model.tau_init);
    c.model.num_bins = j.value("num_bins", c.model.num_bins);
    c.members = j.value("members", c.members);
    if (j.contains("phase1")) c.phase1 = steps_from(j["phase1"]);
    if (j.contains("phase2")) c.phase2 = steps_from(j["phase2"]);
    c.iters_per_step = j.value("iters_per_step", c.iters_per_step);
    c.batch = j.value("batch", c.batch);
    c.group = j.value("group", c.group);
    c.groups_per_update = j.value("groups_per_update", c.groups_per_update);
    c.phase2_supervise_from = j.value("phase2_supervise_from", c.phase2_supervise_from);
    c.detach_rollout = j.value("detach_rollout", c.detach_rollout);
    if (j.contains("lead_weeks")) c.lead_weeks = j["lead_weeks"].get<std::vector<int>>();
    c.bootstrap_resamples = j.value("bootstrap_resamples", c.bootstrap_resamples);
    c.bootstrap_level = j.value("bootstrap_level", c.bootstrap_level);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::validation, std::string("malformed run config: ") + e.what());
  }
  c.model.channels = c.world.channels;
  c.validate();
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  const auto& w = c.world;
  json j;
  j["grid"] = {w.n_lat, w.n_lon};
  j["world"] = {{"channels", w.channels},
                {"ar_coeff", w.ar_coeff},
                {"seasonal_amplitude", w.seasonal_amplitude},
                {"advection", w.advection},
                {"noise_sd", w.noise_sd},
                {"daily_noise_ratio", w.daily_noise_ratio},
                {"driver_noise_ratio", w.driver_noise_ratio},
                {"smoothing_passes", w.smoothing_passes},
                {"arid_offset", w.arid_offset},
                {"bias", w.bias},
                {"forecast_noise", w.forecast_noise}};
  j["data_start"] = c.data_start.iso();
  j["data_end"] = c.data_end.iso();
  j["train_years"] = {c.train_years.first, c.train_years.last};
  j["test_years"] = {c.test_years.first, c.test_years.last};
  j["clim_years"] = {c.clim_years.first, c.clim_years.last};
  j["lambda_rps"] = c.loss.lambda_rps;
  j["lambda_ce"] = c.loss.lambda_ce;
  j["lambda_kl"] = c.loss.lambda_kl;
  j["charbonnier_eps"] = c.loss.charbonnier_eps;
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["model"] = to_json(c.model);
  j["members"] = c.members;
  j["phase1"] = {c.phase1.first, c.phase1.last};
  j["phase2"] = {c.phase2.first, c.phase2.last};
  j["iters_per_step"] = c.iters_per_step;
  j["batch"] = c.batch;
  j["group"] = c.group;
  j["groups_per_update"] = c.groups_per_update;
  j["phase2_supervise_from"] = c.phase2_supervise_from;
  j["detach_rollout"] = c.detach_rollout;
  j["lead_weeks"] = c.lead_weeks;
  j["bootstrap_resamples"] = c.bootstrap_resamples;
  j["bootstrap_level"] = c.bootstrap_level;
  j["seed"] = c.seed;
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  require(bool(f), ErrorKind::io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  json j = json::object();
  if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::validation, "config " + path.string() + ": " + e.what());
    }
  }
  return config_from_json(j);
}

std::uint64_t training_fingerprint(const RunConfig& c) {
  json j = to_json(c);
  j.erase("members");
  j.erase("lead_weeks");
  j.erase("bootstrap_resamples");
  j.erase("bootstrap_level");
  j.erase("test_years");
  // FNV-1a over the canonical dump.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace qw
