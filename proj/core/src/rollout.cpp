#include "pursuit/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pursuit::marl {

namespace {

std::vector<policies::AgentView> learnable_views(
    const world::Environment& env) {
  std::vector<policies::AgentView> v;
  const auto& cfg = env.config();
  for (int i = 0; i < static_cast<int>(cfg.agents.size()); ++i)
    if (cfg.agents[i].learnable)
      v.push_back({env.state().agent_pos[i], cfg.agents[i].max_speed});
  return v;
}

class RandomTeam : public TeamPolicy {
 public:
  void reset(const world::Environment&, std::uint64_t seed) override {
    rng_.seed(seed);
  }
  std::vector<Vec2> act(const world::Environment& env,
                        const std::vector<world::Detection>&) override {
    std::vector<Vec2> out;
    for (const auto& a : env.config().agents)
      if (a.learnable) out.push_back(policies::random_policy(rng_, a.max_speed));
    return out;
  }

 private:
  std::mt19937_64 rng_;
};

class HeuristicTeam : public TeamPolicy {
 public:
  explicit HeuristicTeam(policies::HeuristicParams p) : params_(p) {}
  void reset(const world::Environment& env, std::uint64_t seed) override {
    state_.emplace(env.config().num_learnable(), seed, params_);
  }
  std::vector<Vec2> act(
      const world::Environment& env,
      const std::vector<world::Detection>& last_detections) override {
    std::optional<world::Detection> det;
    if (!last_detections.empty()) det = last_detections.front();
    return policies::heuristic_policy(learnable_views(env), det, *state_);
  }

 private:
  policies::HeuristicParams params_;
  std::optional<policies::HeuristicState> state_;
};

class FilterHandTeam : public TeamPolicy {
 public:
  FilterHandTeam(filter::FilterModel& m, bool split) : model_(m), split_(split) {}
  void reset(const world::Environment&, std::uint64_t) override {}
  std::vector<Vec2> act(const world::Environment& env,
                        const std::vector<world::Detection>&) override {
    filter::FilterInput in = filter::build_filter_input(
        env.state().detection_log, env.state().t, env.evader_start(),
        env.config().t_max);
    filter::MixturePrediction pred = model_.predict(in);
    auto views = learnable_views(env);
    return split_ ? policies::pmc_search_policy(pred, views)
                  : policies::pmc_highest_prob_policy(pred, views);
  }

 private:
  filter::FilterModel& model_;
  bool split_;
};

class LearnedTeam : public TeamPolicy {
 public:
  LearnedTeam(PolicySet& ps, AugmentMode mode, filter::FilterModel* model,
              double noise)
      : ps_(ps), mode_(mode), model_(model), noise_(noise) {}
  void reset(const world::Environment&, std::uint64_t seed) override {
    rng_.seed(seed);
  }
  std::vector<Vec2> act(const world::Environment& env,
                        const std::vector<world::Detection>&) override {
    filter::MixturePrediction pred;
    bool has_pred = false;
    if (mode_ == AugmentMode::Filter) {
      filter::FilterInput in = filter::build_filter_input(
          env.state().detection_log, env.state().t, env.evader_start(),
          env.config().t_max);
      pred = model_->predict(in);
      has_pred = true;
    }
    std::vector<Vec2> out;
    int li = 0;
    const auto& cfg = env.config();
    for (int i = 0; i < static_cast<int>(cfg.agents.size()); ++i) {
      if (!cfg.agents[i].learnable) continue;
      auto o = augment_observation(env.observe(i), mode_,
                                   has_pred ? &pred : nullptr,
                                   env.state().agent_pos[i],
                                   env.state().detection_log, env.state().t,
                                   env.evader_start(), cfg.t_max);
      out.push_back(ps_.agents[li].actor.act(o, noise_, rng_));
      ++li;
    }
    return out;
  }

 private:
  PolicySet& ps_;
  AugmentMode mode_;
  filter::FilterModel* model_;
  double noise_;
  std::mt19937_64 rng_;
};

}  // namespace

std::unique_ptr<TeamPolicy> make_random_policy() {
  return std::make_unique<RandomTeam>();
}
std::unique_ptr<TeamPolicy> make_heuristic_policy(
    policies::HeuristicParams params) {
  return std::make_unique<HeuristicTeam>(params);
}
std::unique_ptr<TeamPolicy> make_pmc_highest_prob_policy(
    filter::FilterModel& model) {
  return std::make_unique<FilterHandTeam>(model, false);
}
std::unique_ptr<TeamPolicy> make_pmc_search_policy(filter::FilterModel& model) {
  return std::make_unique<FilterHandTeam>(model, true);
}
std::unique_ptr<TeamPolicy> make_learned_policy(PolicySet& ps,
                                                AugmentMode mode,
                                                filter::FilterModel* model,
                                                double noise_scale) {
  return std::make_unique<LearnedTeam>(ps, mode, model, noise_scale);
}

EpisodeRollout run_episode(world::Environment& env, TeamPolicy& policy,
                           std::uint64_t seed) {
  policy.reset(env, seed);
  EpisodeRollout out;
  std::vector<world::Detection> last;
  const auto& cfg = env.config();
  while (!env.state().done) {
    auto actions = policy.act(env, last);
    world::StepResult sr = env.step(actions);
    last = sr.detections;

    world::StepLog log;
    log.any_detection = !sr.detections.empty();
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(cfg.agents.size()); ++i)
      if (cfg.agents[i].learnable)
        best = std::min(best,
                        dist(env.state().agent_pos[i], env.state().evader_pos));
    log.min_agent_dist = best;
    double team = 0;
    for (double r : sr.rewards) team += r;
    log.team_reward = team / std::max<std::size_t>(sr.rewards.size(), 1);
    out.total_team_reward += log.team_reward;
    out.steps.push_back(log);
    out.outcome = sr.outcome;
  }
  out.metrics = world::episode_metrics(out.steps);
  return out;
}

EvalReport evaluate_policy(const world::EnvConfig& cfg, TeamPolicy& policy,
                           int n_episodes, std::uint64_t base_seed) {
  EvalReport rep;
  std::vector<world::EpisodeMetrics> all;
  std::vector<double> rewards;
  for (int e = 0; e < n_episodes; ++e) {
    world::Environment env(cfg, base_seed + e);
    EpisodeRollout r = run_episode(env, policy, base_seed + e);
    all.push_back(r.metrics);
    rewards.push_back(r.total_team_reward);
    rep.episodes.push_back(std::move(r));
  }
  auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = 0;
    for (double x : v) mean += x;
    mean /= v.size();
    sd = 0;
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / v.size());
  };
  std::vector<double> dr, cd, mr;
  for (const auto& m : all) {
    dr.push_back(m.detection_rate);
    cd.push_back(m.closest_distance);
    mr.push_back(m.mean_reward);
  }
  mean_std(dr, rep.mean.detection_rate, rep.stddev.detection_rate);
  mean_std(cd, rep.mean.closest_distance, rep.stddev.closest_distance);
  mean_std(mr, rep.mean.mean_reward, rep.stddev.mean_reward);
  mean_std(rewards, rep.episode_reward_mean, rep.episode_reward_std);
  return rep;
}

}  // namespace pursuit::marl
