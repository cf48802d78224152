#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pursuit/environment.hpp"
#include "pursuit/ndgrad.hpp"
#include "pursuit/pmc_filter.hpp"

namespace pursuit::marl {

enum class AugmentMode { Base, Detections, Filter };

// base: o_b unchanged. detections: append the two FilterInput detection
// slots (+10). filter: append (lambda_j, mu_j - x_s, sigma_j) per component
// (+40), means made relative to the agent.
std::vector<double> augment_observation(
    const std::vector<double>& o_b, AugmentMode mode,
    const filter::MixturePrediction* pred, Vec2 x_s,
    const std::vector<world::Detection>& detection_log, int t,
    Vec2 evader_start, int t_max);

int augmented_dim(int base_dim, AugmentMode mode);

struct Transition {
  std::vector<double> obs;       // concatenated per-agent o_i
  std::vector<double> act;       // 2 per agent
  std::vector<double> rewards;   // per agent
  std::vector<double> next_obs;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}
  void push(Transition t);
  std::size_t size() const { return store_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return store_[i]; }
  std::vector<std::size_t> sample_indices(std::size_t batch,
                                          std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;  // overwrite cursor once full
  std::vector<Transition> store_;
};

struct TrainConfig {
  double gamma = 0.95;
  double tau = 0.01;
  double lr_actor = 1e-4;
  double lr_critic = 1e-3;
  double noise_scale = 0.3;   // fraction of max speed, decays per episode
  double noise_decay = 0.999;
  std::size_t buffer_capacity = 100000;
  int batch = 256;
  int update_interval = 4;
  int episodes = 300;
  int actor_hidden = 128;
  int critic_hidden1 = 256;
  int critic_hidden2 = 128;
};

class Actor {
 public:
  Actor() = default;
  Actor(int obs_dim, int hidden, double max_speed, std::uint64_t seed);
  grad::Value forward(grad::Tape& t, grad::Value obs);  // B x 2, |row| <= max
  Vec2 act(const std::vector<double>& obs, double noise_scale,
           std::mt19937_64& rng);
  grad::ParamStore& params() { return params_; }
  double max_speed() const { return max_speed_; }
  int obs_dim() const { return obs_dim_; }

 private:
  grad::ParamStore params_;
  grad::Linear l1_, l2_, l3_;
  double max_speed_ = 0;
  int obs_dim_ = 0;
};

class Critic {
 public:
  Critic() = default;
  Critic(int joint_dim, int h1, int h2, std::uint64_t seed);
  grad::Value forward(grad::Tape& t, grad::Value joint);  // B x 1
  grad::ParamStore& params() { return params_; }

 private:
  grad::ParamStore params_;
  grad::Linear l1_, l2_, l3_;
};

double td_target(double r, double gamma, double q_next, bool done);
void soft_update(grad::ParamStore& target, const grad::ParamStore& online,
                 double tau);

struct AgentLearner {
  Actor actor, actor_target;
  Critic critic, critic_target;
  grad::AdamState opt_actor, opt_critic;
};

struct PolicySet {
  std::vector<AgentLearner> agents;
  int obs_dim = 0;

  void save(const std::string& path) const;
  void load(const std::string& path);
};

PolicySet make_policy_set(int n_agents, int obs_dim,
                          const std::vector<double>& max_speeds,
                          const TrainConfig& cfg, std::uint64_t seed);

// One gradient step on agent i's critic; returns the TD loss.
double critic_update(PolicySet& ps, const ReplayBuffer& buf,
                     const std::vector<std::size_t>& idx, int agent,
                     const TrainConfig& cfg);
// One ascent step on agent i's actor through the frozen critic; returns the
// pre-step mean Q. Critic parameters are not modified.
double actor_update(PolicySet& ps, const ReplayBuffer& buf,
                    const std::vector<std::size_t>& idx, int agent,
                    const TrainConfig& cfg);

struct MarlResult {
  std::vector<double> episode_reward;  // per-episode summed team reward
  std::uint64_t filter_checksum_before = 0;
  std::uint64_t filter_checksum_after = 0;
};

MarlResult train_marl(const world::EnvConfig& env_cfg,
                      filter::FilterModel* filter_model, AugmentMode mode,
                      const TrainConfig& cfg, std::uint64_t seed,
                      PolicySet& out);

}  // namespace pursuit::marl
