#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qw {

/// Per-cell category boundaries for one date. For K bins there are K-1
/// boundaries; with K = 5 these are q20, q40, q60, q80.
struct QuantileThresholds {
  /// bounds[b][cell], b = 0..K-2, nondecreasing in b for every cell.
  std::vector<std::vector<double>> bounds;

  std::size_t num_bins() const { return bounds.size() + 1; }
  std::size_t num_cells() const {
    return bounds.empty() ? 0 : bounds.front().size();
  }
  std::span<const double> lowest() const { return bounds.front(); }
  std::span<const double> highest() const { return bounds.back(); }

  /// Boundaries of a single cell, lowest first.
  std::vector<double> at_cell(std::size_t cell) const {
    std::vector<double> out(bounds.size());
    for (std::size_t b = 0; b < bounds.size(); ++b) out[b] = bounds[b][cell];
    return out;
  }
};

}  // namespace qw
