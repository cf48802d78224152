#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "pursuit/pmc_filter.hpp"
#include "pursuit/terrain_world.hpp"

namespace pursuit::policies {

// Uniform random direction at full speed.
Vec2 random_policy(std::mt19937_64& rng, double max_speed);

// Smallest T > 0 with ||x_p + T u_p - x_s|| = T v_max; the classical
// pursuit quadratic. nullopt when the target outruns the pursuer.
std::optional<Vec2> intercept_point(Vec2 x_s, double v_max, Vec2 x_p, Vec2 u_p);

// Archimedean spiral r = a + b*theta, sampled so consecutive waypoints are
// at most v_max apart. Step 0 sits at center + (a, 0).
Vec2 spiral_waypoint(Vec2 center, int step_index, double a, double b,
                     double v_max);

enum class HeuristicMode { Chase, Intercept, Spiral, RandomSpiral };

struct HeuristicParams {
  int t_spiral = 50;
  double spiral_a = 0.01;
  double spiral_b = 0.02 / (2 * 3.14159265358979323846);  // +0.02 per turn
};

// Shared detection reference plus one mode machine per agent.
struct HeuristicState {
  struct PerAgent {
    HeuristicMode mode = HeuristicMode::RandomSpiral;
    Vec2 spiral_center;
    int spiral_step = 0;
    int steps_since_detection = 0;
    bool has_spiral_center = false;
  };
  std::vector<PerAgent> agents;
  std::optional<world::Detection> last_detection;
  std::mt19937_64 rng{12345};
  HeuristicParams params;

  explicit HeuristicState(int n_agents, std::uint64_t seed = 12345,
                          HeuristicParams p = {})
      : agents(n_agents), rng(seed), params(p) {}
};

struct AgentView {
  Vec2 pos;
  double max_speed;
};

// One velocity per agent. detected_now carries this step's detection, if any.
std::vector<Vec2> heuristic_policy(
    const std::vector<AgentView>& agents,
    const std::optional<world::Detection>& detected_now, HeuristicState& state);

// Everyone heads for the mean of the highest-weight component.
std::vector<Vec2> pmc_highest_prob_policy(const filter::MixturePrediction& pred,
                                          const std::vector<AgentView>& agents);

// Agents split round-robin across components sorted by weight.
std::vector<Vec2> pmc_search_policy(const filter::MixturePrediction& pred,
                                    const std::vector<AgentView>& agents);

}  // namespace pursuit::policies
