#include "qw/grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "qw/error.hpp"

namespace qw {

LatLonGrid::LatLonGrid(std::vector<double> latitudes, std::size_t n_lon,
                       double lon_start, double lon_step)
    : latitudes_(std::move(latitudes)),
      n_lon_(n_lon),
      lon_start_(lon_start),
      lon_step_(lon_step) {
  require(!latitudes_.empty() && n_lon_ > 0, ErrorKind::validation,
          "grid needs at least one latitude row and one longitude column");
  if (lon_step_ == 0.0) lon_step_ = 360.0 / double(n_lon_);
  for (double lat : latitudes_) {
    require(std::isfinite(lat) && std::abs(lat) <= 90.0, ErrorKind::validation,
            "latitude outside [-90, 90]: " + std::to_string(lat));
  }
  if (latitudes_.size() > 1) {
    const bool desc = latitudes_[0] > latitudes_[1];
    for (std::size_t i = 1; i < latitudes_.size(); ++i) {
      const bool ok = desc ? latitudes_[i - 1] > latitudes_[i]
                           : latitudes_[i - 1] < latitudes_[i];
      require(ok, ErrorKind::validation, "latitudes must be strictly monotone");
    }
  }
}

LatLonGrid LatLonGrid::regular(std::size_t n_lat, std::size_t n_lon,
                               bool include_poles) {
  require(n_lat > 0 && n_lon > 0, ErrorKind::validation, "empty grid");
  std::vector<double> lats(n_lat);
  if (include_poles) {
    require(n_lat >= 2, ErrorKind::validation, "pole grid needs >= 2 rows");
    const double step = 180.0 / double(n_lat - 1);
    for (std::size_t i = 0; i < n_lat; ++i) lats[i] = 90.0 - step * double(i);
    lats.back() = -90.0;
  } else {
    const double step = 180.0 / double(n_lat);
    for (std::size_t i = 0; i < n_lat; ++i)
      lats[i] = 90.0 - step * (double(i) + 0.5);
  }
  const double dlon = 360.0 / double(n_lon);
  return LatLonGrid(std::move(lats), n_lon, -180.0 + 0.5 * dlon, dlon);
}

bool LatLonGrid::north_to_south() const {
  return latitudes_.size() < 2 || latitudes_[0] > latitudes_[1];
}

std::size_t SpatialMask::kept() const {
  std::size_t n = 0;
  for (auto k : keep) n += k != 0;
  return n;
}

SpatialMask SpatialMask::operator&(const SpatialMask& other) const {
  require(n_lat == other.n_lat && n_lon == other.n_lon, ErrorKind::shape_mismatch,
          "mask shapes differ");
  SpatialMask out = *this;
  for (std::size_t c = 0; c < keep.size(); ++c)
    out.keep[c] = (keep[c] && other.keep[c]) ? 1 : 0;
  return out;
}

SpatialMask SpatialMask::complement() const {
  SpatialMask out = *this;
  for (auto& k : out.keep) k = k ? 0 : 1;
  return out;
}

LatWeights latitude_weights(const LatLonGrid& grid) {
  const auto& lats = grid.latitudes();
  std::vector<double> cosines(lats.size());
  double total = 0.0;
  for (std::size_t i = 0; i < lats.size(); ++i) {
    cosines[i] = std::abs(lats[i]) == 90.0
                     ? 0.0
                     : std::cos(lats[i] * std::numbers::pi / 180.0);
    total += cosines[i];
  }
  require(total > 0.0, ErrorKind::degenerate_grid,
          "latitude cosines sum to zero (pole-only grid)");
  LatWeights w;
  w.alpha.resize(lats.size());
  const double n = double(lats.size());
  for (std::size_t i = 0; i < lats.size(); ++i) w.alpha[i] = n * cosines[i] / total;
  return w;
}

double kept_weight(const LatWeights& weights, const SpatialMask& mask) {
  require(mask.n_lat == weights.n_lat(), ErrorKind::shape_mismatch,
          "mask rows do not match weights");
  double total = 0.0;
  for (std::size_t i = 0; i < mask.n_lat; ++i)
    for (std::size_t j = 0; j < mask.n_lon; ++j)
      if (mask.keep[i * mask.n_lon + j]) total += weights.alpha[i];
  return total;
}

double weighted_mean(std::span<const double> values, const LatWeights& weights,
                     const SpatialMask& mask) {
  require(values.size() == mask.n_cells() && mask.n_lat == weights.n_lat(),
          ErrorKind::shape_mismatch, "weighted_mean: shapes disagree");
  require(mask.kept() > 0, ErrorKind::empty_mask, "weighted_mean: empty mask");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < mask.n_lat; ++i) {
    const double a = weights.alpha[i];
    for (std::size_t j = 0; j < mask.n_lon; ++j) {
      const std::size_t c = i * mask.n_lon + j;
      if (!mask.keep[c]) continue;
      require(std::isfinite(values[c]), ErrorKind::non_finite,
              "weighted_mean: non-finite value at cell " + std::to_string(c));
      num += a * values[c];
      den += a;
    }
  }
  require(den > 0.0, ErrorKind::empty_mask,
          "weighted_mean: kept cells carry zero weight");
  return num / den;
}

SpatialMask build_arid_mask(std::span<const QuantileThresholds> thresholds,
                            std::size_t n_lat, std::size_t n_lon,
                            MetricKind kind, double cutoff) {
  require(!thresholds.empty(), ErrorKind::validation,
          "build_arid_mask: no thresholds supplied");
  SpatialMask mask = SpatialMask::full(n_lat, n_lon);
  for (const auto& thr : thresholds) {
    require(thr.num_cells() == mask.n_cells(), ErrorKind::shape_mismatch,
            "build_arid_mask: threshold field does not match grid");
    const auto bound = kind == MetricKind::rpss ? thr.lowest() : thr.highest();
    for (std::size_t c = 0; c < bound.size(); ++c)
      if (bound[c] <= cutoff) mask.keep[c] = 0;
  }
  return mask;
}

}  // namespace qw
