#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "qw/calendar.hpp"
#include "qw/calibration.hpp"
#include "qw/climatology.hpp"
#include "qw/fieldio.hpp"
#include "qw/grid.hpp"

namespace qw {

struct SynthWorldConfig {
  std::size_t n_lat = 8;
  std::size_t n_lon = 16;
  std::size_t channels = 2;        ///< channel 0 precipitation, the rest drivers
  double ar_coeff = 0.97;          ///< lag-1 coefficient of the latent anomaly
  double seasonal_amplitude = 1.0;
  double advection = 0.25;         ///< eastward drift, cells per day
  double noise_sd = 0.6;           ///< stationary sd of the latent anomaly
  double daily_noise_ratio = 0.6;  ///< unpredictable daily jitter, relative to noise_sd
  double driver_noise_ratio = 0.15;
  std::size_t smoothing_passes = 1;  ///< 3x3 box passes applied to the forcing noise
  double arid_offset = -9.0;       ///< latent shift in the dry region
  double bias = 0.7;               ///< forecaster multiplicative bias b
  double forecast_noise = 0.02;    ///< forecaster additive noise sd (precip units)
  std::uint64_t seed = 0;

  void validate() const;
};

/// Daily truth, one cube per channel, plus the latent AR anomaly.
struct SynthTruth {
  LatLonGrid grid;
  std::vector<DailyCube> channels;
  DailyCube latent;
  SpatialMask land;

  Date start() const { return channels.front().start; }
  Date last() const { return channels.front().last(); }
};

LatLonGrid synth_grid(const SynthWorldConfig& cfg);
/// Declared land region of the synthetic world.
SpatialMask synth_land_mask(const SynthWorldConfig& cfg);

SynthTruth generate_truth(const SynthWorldConfig& cfg, const Date& first, const Date& last);

/// Daily precipitation members b * truth + noise (floored at 0), one cube
/// per member, each member with its own noise stream.
std::vector<DailyCube> generate_biased_forecaster(const SynthWorldConfig& cfg,
                                                  const DailyCube& truth_precip,
                                                  std::size_t members, double bias);

/// Weekly-mean reforecast archive built from biased daily members.
ReforecastArchive weekly_reforecast(const std::vector<DailyCube>& daily_members);

/// Field files for every channel and day ("precip", "driver1", ...).
FieldArchive truth_to_archive(const SynthTruth& truth);
std::string channel_name(std::size_t channel);
/// Inverse of truth_to_archive for `channels` channels (latent left empty).
/// Throws missing_data on a gap in any channel.
SynthTruth truth_from_archive(const FieldArchive& archive, const SynthWorldConfig& cfg);

}  // namespace qw
