#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "qw/calendar.hpp"
#include "qw/datagen.hpp"
#include "qw/losses.hpp"
#include "qw/model.hpp"

namespace qw {

struct StepRange {
  std::size_t first = 1;
  std::size_t last = 1;
  std::size_t count() const { return last - first + 1; }
};

struct RunConfig {
  SynthWorldConfig world;
  Date data_start{2001, 11, 1};
  Date data_end{2023, 1, 31};
  YearRange train_years{2017, 2021};
  YearRange test_years{2022, 2022};
  YearRange clim_years{2002, 2021};

  LossWeights loss;
  double lr = 2e-4;
  double weight_decay = 0.01;
  ModelConfig model;
  std::size_t members = 8;  ///< M at inference
  StepRange phase1{1, 6};
  StepRange phase2{12, 18};
  std::size_t iters_per_step = 1000;
  std::size_t batch = 4;       ///< phase-1 samples per update
  std::size_t group = 4;       ///< phase-2 group size G
  std::size_t groups_per_update = 1;  ///< phase-2 groups averaged per update
  std::size_t phase2_supervise_from = 0;  ///< first supervised phase-2 step; 0 = phase2.first
  bool detach_rollout = false;            ///< cut gradients between rollout steps
  std::vector<int> lead_weeks{1, 2};
  std::size_t bootstrap_resamples = 1000;
  double bootstrap_level = 0.975;
  std::uint64_t seed = 0;

  /// Throws validation on any violated invariant.
  void validate() const;
};

/// Single-core settings for the 8x16 world: 50 iterations per rollout step,
/// a narrower network, larger batches and a higher learning rate.
RunConfig desk_config();

/// Missing keys keep their defaults. Unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

/// Stable hash of the settings that affect a training trajectory.
std::uint64_t training_fingerprint(const RunConfig& c);

}  // namespace qw
