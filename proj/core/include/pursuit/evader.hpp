#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <vector>

#include "pursuit/terrain_world.hpp"

namespace pursuit::evader {

// Cost-optimal 8-connected path on the terrain grid. Edge cost is the
// euclidean step length times (1 + w_v * visibility(destination cell)), so
// dark forest is cheap and open ground expensive. Euclidean distance stays
// admissible because the multiplier is >= 1. Waypoints are cell centers in
// normalized coordinates, start cell excluded, goal cell last.
std::vector<Vec2> astar_plan(const world::TerrainMap& terrain, Vec2 start,
                             Vec2 goal, double w_v);

// Dijkstra over the same grid; test oracle for astar_plan.
double dijkstra_cost(const world::TerrainMap& terrain, Vec2 start, Vec2 goal,
                     double w_v);
double path_cost(const world::TerrainMap& terrain, Vec2 start,
                 const std::vector<Vec2>& waypoints, double w_v);

world::Hideout choose_goal(const std::vector<world::Hideout>& hideouts,
                           Vec2 start, std::uint64_t seed);

enum class EvaderMode { Follow, Evade };

// What the evader can see of the world each step.
struct PursuerView {
  Vec2 pos;
  double speed = 0;      // current speed, normalized units/step
  double max_speed = 0;
};

class EvaderController {
 public:
  EvaderController() = default;
  EvaderController(const world::TerrainMap* terrain,
                   const world::EvaderParams& params, Vec2 start, Vec2 goal,
                   const world::DetectionParams& det);

  // Desired velocity for this step (norm <= max_speed).
  Vec2 step(Vec2 own_pos, const std::vector<PursuerView>& pursuers);

  EvaderMode mode() const { return mode_; }
  Vec2 goal() const { return goal_; }
  const std::deque<Vec2>& waypoints() const { return waypoints_; }
  bool observes_pursuer(Vec2 own_pos, const PursuerView& p) const;

 private:
  void replan(Vec2 from);
  Vec2 nearest_dark_cell(Vec2 from) const;

  const world::TerrainMap* terrain_ = nullptr;
  world::EvaderParams params_;
  world::DetectionParams det_;
  Vec2 goal_;
  std::deque<Vec2> waypoints_;
  EvaderMode mode_ = EvaderMode::Follow;
  int consecutive_observed_ = 0;
  int evade_timer_ = 0;
};

}  // namespace pursuit::evader
