#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pursuit/evader.hpp"
#include "pursuit/terrain_world.hpp"

namespace pursuit::world {

struct StepResult {
  std::vector<double> rewards;          // one per learnable agent
  std::vector<Detection> detections;    // emitted this step
  bool done = false;
  Outcome outcome = Outcome::Running;
};

// One pursuit-evasion episode instance. Owns its state and RNG stream;
// run many instances in parallel for collection, one thread each.
class Environment {
 public:
  Environment(EnvConfig cfg, std::uint64_t episode_seed);

  void reset(std::uint64_t episode_seed);

  // One action (desired velocity) per learnable agent, roster order.
  StepResult step(const std::vector<Vec2>& actions);

  const TerrainWorldState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  const TerrainMap& terrain() const { return terrain_; }
  const evader::EvaderController& evader_controller() const { return evader_; }
  Vec2 evader_start() const { return evader_start_; }
  int num_learnable() const { return cfg_.num_learnable(); }

  std::vector<double> observe(int agent_index) const {
    return observe_base(state_, cfg_, agent_index);
  }

 private:
  EnvConfig cfg_;
  TerrainMap terrain_;
  TerrainWorldState state_;
  evader::EvaderController evader_;
  Vec2 evader_start_;
  Vec2 goal_;
};

}  // namespace pursuit::world
