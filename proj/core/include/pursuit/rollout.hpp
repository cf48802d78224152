#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "pursuit/environment.hpp"
#include "pursuit/maddpg.hpp"
#include "pursuit/search_policies.hpp"

namespace pursuit::marl {

// Uniform per-step interface for learned and scripted pursuit teams.
class TeamPolicy {
 public:
  virtual ~TeamPolicy() = default;
  virtual void reset(const world::Environment& env, std::uint64_t seed) = 0;
  virtual std::vector<Vec2> act(
      const world::Environment& env,
      const std::vector<world::Detection>& last_detections) = 0;
};

std::unique_ptr<TeamPolicy> make_random_policy();
std::unique_ptr<TeamPolicy> make_heuristic_policy(
    policies::HeuristicParams params = {});
// The two hand-crafted filter-driven policies.
std::unique_ptr<TeamPolicy> make_pmc_highest_prob_policy(
    filter::FilterModel& model);
std::unique_ptr<TeamPolicy> make_pmc_search_policy(filter::FilterModel& model);
// Learned actors; noise_scale 0 gives deterministic evaluation actions.
std::unique_ptr<TeamPolicy> make_learned_policy(PolicySet& ps,
                                                AugmentMode mode,
                                                filter::FilterModel* model,
                                                double noise_scale = 0);

struct EpisodeRollout {
  std::vector<world::StepLog> steps;
  world::EpisodeMetrics metrics;
  double total_team_reward = 0;
  world::Outcome outcome = world::Outcome::Running;
};

EpisodeRollout run_episode(world::Environment& env, TeamPolicy& policy,
                           std::uint64_t seed);

struct EvalReport {
  world::EpisodeMetrics mean;
  world::EpisodeMetrics stddev;
  double episode_reward_mean = 0;
  double episode_reward_std = 0;
  std::vector<EpisodeRollout> episodes;
};

EvalReport evaluate_policy(const world::EnvConfig& cfg, TeamPolicy& policy,
                           int n_episodes, std::uint64_t base_seed);

}  // namespace pursuit::marl
