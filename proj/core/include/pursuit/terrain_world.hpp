#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pursuit/geometry.hpp"

namespace pursuit::world {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Visibility field on a G x G grid over [0,1]^2. 1 = open ground,
// values below the dark threshold read as dense forest. Immutable after
// generation.
class TerrainMap {
 public:
  TerrainMap() = default;
  TerrainMap(int grid, std::vector<double> visibility, std::uint64_t seed);

  int grid() const { return grid_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<double>& visibility() const { return vis_; }
  double at_cell(int ix, int iy) const { return vis_[iy * grid_ + ix]; }
  double at(Vec2 p) const;
  Vec2 cell_center(int ix, int iy) const;
  int cell_x(double x) const;
  int cell_y(double y) const;

  void write_csv(const std::string& path) const;

 private:
  int grid_ = 0;
  std::vector<double> vis_;
  std::uint64_t seed_ = 0;
};

// Smoothed seeded random field, rank-remapped so ~forest_fraction of cells
// fall below visibility 0.3.
TerrainMap generate_terrain(std::uint64_t seed, int grid, double forest_fraction);

enum class AgentKind { Camera, SearchParty, Helicopter };

struct AgentSpec {
  AgentKind kind = AgentKind::SearchParty;
  double max_speed = 20.0 / 2428.0;
  double base_detect_radius = 0.06;
  bool learnable = true;
  Vec2 start{0.5, 0.5};
};

struct Hideout {
  Vec2 pos;
  bool known_to_pursuers = false;
};

// Accurate detection: position/velocity are the evader's true values.
struct Detection {
  int timestep = 0;
  Vec2 pos;
  Vec2 vel;
  int agent = -1;
};

struct DetectionParams {
  double v_min = 0.25;   // radius floor in zero-visibility terrain
  double kappa = 0.5;    // speed bonus factor
};

// radius = base * (v_min + (1-v_min)*visibility) * (1 + kappa*speed/max_speed);
// monotone non-decreasing in visibility and in target speed.
double detection_radius(double base_radius, double target_speed,
                        double target_max_speed, double visibility,
                        const DetectionParams& p = {});
double detection_radius(const AgentSpec& observer, double target_speed,
                        double target_max_speed, double visibility,
                        const DetectionParams& p = {});

struct RewardParams {
  double c_det = 1.0;
  double c_team = 0.5;
  double c_dist = 0.5;
};

double reward(Vec2 agent_pos, Vec2 evader_pos, bool self_detected,
              bool any_detected, const RewardParams& p = {});

enum class Outcome { Running, HideoutReached, Timeout };

struct TerrainWorldState {
  int t = 0;
  Vec2 evader_pos;
  Vec2 evader_vel;
  std::vector<Vec2> agent_pos;
  std::vector<Vec2> agent_vel;
  std::vector<Detection> detection_log;
  bool done = false;
  Outcome outcome = Outcome::Running;
};

struct EvaderParams {
  double max_speed = 15.0 / 2428.0;
  double base_detect_radius = 0.08;  // evader observing pursuers
  double w_v = 2.0;                  // planner visibility penalty weight
  int n_trigger = 3;                 // consecutive observed steps before EVADE
  int t_evade = 30;                  // EVADE duration cap
  double dark_threshold = 0.3;
  Vec2 start{0.05, 0.5};
  bool randomize_start = true;
};

struct EnvConfig {
  int grid = 64;
  double forest_fraction = 0.4;
  std::uint64_t terrain_seed = 1;
  std::vector<AgentSpec> agents;
  std::vector<Hideout> hideouts;
  EvaderParams evader;
  int t_max = 500;
  DetectionParams detection;
  RewardParams rewards;
  double hideout_eps = 1e-3;

  static EnvConfig defaults();
  int num_learnable() const;
  std::vector<Vec2> known_hideouts() const;
};

// Per-step summary of a finished episode, for metric aggregation.
struct StepLog {
  bool any_detection = false;
  double min_agent_dist = 0;
  double team_reward = 0;
};

struct EpisodeMetrics {
  double detection_rate = 0;
  double closest_distance = 0;
  double mean_reward = 0;
};

EpisodeMetrics episode_metrics(const std::vector<StepLog>& trajectory);

// o_b layout: own pos (2), t/T_max (1), other learnable agents' pos in roster
// order (2 each), known hideout pos (2 each).
std::vector<double> observe_base(const TerrainWorldState& st,
                                 const EnvConfig& cfg, int agent_index);

}  // namespace pursuit::world
