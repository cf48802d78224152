#pragma once

#include "pursuit/maddpg.hpp"
#include "pursuit/pmc_filter.hpp"
#include "pursuit/terrain_world.hpp"

namespace pursuit {

// Run-size bundle shared by the CLI and the acceptance suite.
struct Preset {
  world::EnvConfig env;
  marl::TrainConfig marl;
  filter::FilterHyper filter;
  int collect_episodes = 60;
  int eval_episodes = 50;
};

// Sized to finish a full pipeline on one desktop core: smaller map and
// shorter episodes, with MARL batches thinned to keep updates affordable.
inline Preset desk_preset() {
  Preset p;
  p.env = world::EnvConfig::defaults();
  p.env.grid = 64;
  p.env.t_max = 300;
  p.marl.episodes = 300;
  p.marl.batch = 128;
  p.marl.update_interval = 16;
  p.collect_episodes = 60;
  p.eval_episodes = 50;
  return p;
}

// Full-size shapes; no runtime promise on a single core.
inline Preset paper_shape_preset() {
  Preset p;
  p.env = world::EnvConfig::defaults();
  p.env.grid = 128;
  p.env.t_max = 500;
  p.marl.episodes = 1000;
  p.collect_episodes = 300;
  p.eval_episodes = 50;
  return p;
}

}  // namespace pursuit
