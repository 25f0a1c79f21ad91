#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qw/quantiles.hpp"

namespace qw {

/// Regular latitude-longitude grid. Latitudes must be strictly monotone;
/// files on disk always store them north-to-south.
class LatLonGrid {
 public:
  LatLonGrid() = default;
  LatLonGrid(std::vector<double> latitudes, std::size_t n_lon,
             double lon_start = 0.0, double lon_step = 0.0);

  /// Cell-centred grid from north to south. With include_poles the first and
  /// last rows sit exactly on +90 / -90.
  static LatLonGrid regular(std::size_t n_lat, std::size_t n_lon,
                            bool include_poles = false);

  std::size_t n_lat() const { return latitudes_.size(); }
  std::size_t n_lon() const { return n_lon_; }
  std::size_t n_cells() const { return n_lat() * n_lon_; }
  const std::vector<double>& latitudes() const { return latitudes_; }
  double lon_start() const { return lon_start_; }
  double lon_step() const { return lon_step_; }
  double longitude(std::size_t j) const { return lon_start_ + lon_step_ * double(j); }
  bool north_to_south() const;

  bool operator==(const LatLonGrid&) const = default;

 private:
  std::vector<double> latitudes_;
  std::size_t n_lon_ = 0;
  double lon_start_ = 0.0;
  double lon_step_ = 0.0;
};

/// Per-row latitude weights, normalised so that they sum to n_lat.
struct LatWeights {
  std::vector<double> alpha;

  std::size_t n_lat() const { return alpha.size(); }
  static LatWeights uniform(std::size_t n_lat) {
    return LatWeights{std::vector<double>(n_lat, 1.0)};
  }
};

struct SpatialMask {
  std::size_t n_lat = 0;
  std::size_t n_lon = 0;
  std::vector<std::uint8_t> keep;

  static SpatialMask full(std::size_t n_lat, std::size_t n_lon) {
    return {n_lat, n_lon, std::vector<std::uint8_t>(n_lat * n_lon, 1)};
  }
  static SpatialMask full(const LatLonGrid& g) { return full(g.n_lat(), g.n_lon()); }

  std::size_t n_cells() const { return keep.size(); }
  std::size_t kept() const;
  bool kept(std::size_t cell) const { return keep[cell] != 0; }
  SpatialMask operator&(const SpatialMask& other) const;
  SpatialMask complement() const;

  bool operator==(const SpatialMask&) const = default;
};

/// alpha_i = n_lat cos(lat_i) / sum_k cos(lat_k); rows exactly at a pole get 0.
LatWeights latitude_weights(const LatLonGrid& grid);

/// Latitude-weighted mean over the kept cells, reduced in row-major order.
double weighted_mean(std::span<const double> values, const LatWeights& weights,
                     const SpatialMask& mask);

/// Sum of alpha_i over kept cells.
double kept_weight(const LatWeights& weights, const SpatialMask& mask);

enum class MetricKind { rpss, bss };

inline constexpr double kAridCutoffMm = 0.005;

/// Static dry-region mask. RPSS screens on the lowest boundary, BSS on the
/// highest; a cell is dropped if its boundary is <= cutoff on any of the
/// supplied dates/leads.
SpatialMask build_arid_mask(std::span<const QuantileThresholds> thresholds,
                            std::size_t n_lat, std::size_t n_lon,
                            MetricKind kind, double cutoff = kAridCutoffMm);

}  // namespace qw
