#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qw/gradcheck.hpp"

namespace qw {

struct GradSuiteEntry {
  std::string name;
  std::uint64_t seed = 0;
  GradCheckResult result;
};

struct GradSuiteOptions {
  std::size_t n_lat = 4;
  std::size_t n_lon = 8;
  std::size_t channels = 2;
  std::size_t num_bins = 5;
  /// Elements probed per model parameter in the end-to-end check (0 = all).
  std::size_t max_per_param = 24;
};

/// Finite-difference checks of every loss and of the full group objective
/// (two-member, two-step rollout, all parameters randomised) for one seed.
std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed,
                                               const GradSuiteOptions& opts = {});

}  // namespace qw
