#pragma once

#include "qw/pipeline.hpp"

namespace fixtures {

// 4x8 world with a short record: climatology 2010-2015, training 2016,
// testing 2017.
inline qw::RunConfig tiny_config() {
  qw::RunConfig c;
  c.world.n_lat = 4;
  c.world.n_lon = 8;
  c.data_start = qw::Date(2009, 11, 1);
  c.data_end = qw::Date(2018, 1, 31);
  c.clim_years = {2010, 2015};
  c.train_years = {2016, 2016};
  c.test_years = {2017, 2017};
  c.model.hidden = 4;
  c.model.blocks = 1;
  c.model.encoder_hidden = 4;
  c.phase1 = {1, 2};
  c.phase2 = {3, 4};
  c.iters_per_step = 2;
  c.batch = 2;
  c.group = 2;
  c.members = 3;
  c.lr = 1e-3;
  c.bootstrap_resamples = 200;
  return c;
}

inline const qw::World& tiny_world() {
  static const qw::World w = qw::build_world(tiny_config());
  return w;
}

}  // namespace fixtures
