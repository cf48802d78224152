#include "pursuit/terrain_world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "pursuit/environment.hpp"

namespace pursuit::world {

TerrainMap::TerrainMap(int grid, std::vector<double> visibility,
                       std::uint64_t seed)
    : grid_(grid), vis_(std::move(visibility)), seed_(seed) {
  if (vis_.size() != static_cast<std::size_t>(grid) * grid)
    throw ConfigError("terrain size does not match grid");
}

int TerrainMap::cell_x(double x) const {
  int ix = static_cast<int>(x * grid_);
  return std::clamp(ix, 0, grid_ - 1);
}

int TerrainMap::cell_y(double y) const {
  int iy = static_cast<int>(y * grid_);
  return std::clamp(iy, 0, grid_ - 1);
}

double TerrainMap::at(Vec2 p) const { return at_cell(cell_x(p.x), cell_y(p.y)); }

Vec2 TerrainMap::cell_center(int ix, int iy) const {
  return {(ix + 0.5) / grid_, (iy + 0.5) / grid_};
}

void TerrainMap::write_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("cannot open terrain csv for write: " + path);
  f.precision(17);
  for (int iy = 0; iy < grid_; ++iy) {
    for (int ix = 0; ix < grid_; ++ix) {
      if (ix) f << ',';
      f << at_cell(ix, iy);
    }
    f << '\n';
  }
}

TerrainMap generate_terrain(std::uint64_t seed, int grid,
                            double forest_fraction) {
  if (grid < 8) throw ConfigError("terrain grid must be >= 8");
  if (forest_fraction < 0 || forest_fraction > 1)
    throw ConfigError("forest_fraction must be in [0,1]");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> field(static_cast<std::size_t>(grid) * grid);
  for (double& v : field) v = uni(rng);

  // Box blur a few passes to get connected patches.
  std::vector<double> tmp(field.size());
  const int radius = std::max(1, grid / 16);
  for (int pass = 0; pass < 3; ++pass) {
    for (int y = 0; y < grid; ++y)
      for (int x = 0; x < grid; ++x) {
        double s = 0;
        int n = 0;
        for (int dy = -radius; dy <= radius; ++dy)
          for (int dx = -radius; dx <= radius; ++dx) {
            int xx = x + dx, yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= grid || yy >= grid) continue;
            s += field[yy * grid + xx];
            ++n;
          }
        tmp[y * grid + x] = s / n;
      }
    field.swap(tmp);
  }

  // Rank remap: the lowest forest_fraction of cells land in [0, 0.3), the
  // rest in [0.3, 1].
  std::vector<double> sorted = field;
  std::sort(sorted.begin(), sorted.end());
  const double kDark = 0.3;
  double lo = sorted.front(), hi = sorted.back();
  double span = std::max(hi - lo, 1e-12);
  std::vector<double> vis(field.size());
  if (forest_fraction <= 0) {
    for (std::size_t i = 0; i < field.size(); ++i)
      vis[i] = kDark + (1 - kDark) * (field[i] - lo) / span;
  } else if (forest_fraction >= 1) {
    for (std::size_t i = 0; i < field.size(); ++i)
      vis[i] = kDark * 0.999 * (field[i] - lo) / span;
  } else {
    std::size_t qi = static_cast<std::size_t>(forest_fraction * field.size());
    qi = std::min(qi, field.size() - 1);
    double q = sorted[qi];
    double lo_span = std::max(q - lo, 1e-12);
    double hi_span = std::max(hi - q, 1e-12);
    for (std::size_t i = 0; i < field.size(); ++i) {
      if (field[i] < q)
        vis[i] = kDark * (field[i] - lo) / lo_span;
      else
        vis[i] = kDark + (1 - kDark) * (field[i] - q) / hi_span;
    }
  }
  return TerrainMap(grid, std::move(vis), seed);
}

double detection_radius(double base_radius, double target_speed,
                        double target_max_speed, double visibility,
                        const DetectionParams& p) {
  double speed_ratio =
      target_max_speed > 0 ? target_speed / target_max_speed : 0.0;
  return base_radius * (p.v_min + (1 - p.v_min) * visibility) *
         (1 + p.kappa * speed_ratio);
}

double detection_radius(const AgentSpec& observer, double target_speed,
                        double target_max_speed, double visibility,
                        const DetectionParams& p) {
  return detection_radius(observer.base_detect_radius, target_speed,
                          target_max_speed, visibility, p);
}

double reward(Vec2 agent_pos, Vec2 evader_pos, bool self_detected,
              bool any_detected, const RewardParams& p) {
  return p.c_det * (self_detected ? 1.0 : 0.0) +
         p.c_team * (any_detected ? 1.0 : 0.0) -
         p.c_dist * dist(agent_pos, evader_pos);
}

EpisodeMetrics episode_metrics(const std::vector<StepLog>& trajectory) {
  if (trajectory.empty())
    throw ContractError("episode_metrics on empty trajectory");
  EpisodeMetrics m;
  for (const StepLog& s : trajectory) {
    m.detection_rate += s.any_detection ? 1.0 : 0.0;
    m.closest_distance += s.min_agent_dist;
    m.mean_reward += s.team_reward;
  }
  double n = static_cast<double>(trajectory.size());
  m.detection_rate /= n;
  m.closest_distance /= n;
  m.mean_reward /= n;
  return m;
}

EnvConfig EnvConfig::defaults() {
  EnvConfig c;
  c.agents = {
      {AgentKind::SearchParty, 20.0 / 2428.0, 0.06, true, {0.75, 0.3}},
      {AgentKind::SearchParty, 20.0 / 2428.0, 0.06, true, {0.75, 0.7}},
      {AgentKind::Helicopter, 127.0 / 2428.0, 0.09, true, {0.85, 0.5}},
      {AgentKind::Camera, 0.0, 0.05, false, {0.35, 0.35}},
      {AgentKind::Camera, 0.0, 0.05, false, {0.6, 0.65}},
  };
  c.hideouts = {
      {{0.9, 0.15}, true},
      {{0.92, 0.85}, false},
      {{0.55, 0.95}, false},
  };
  return c;
}

int EnvConfig::num_learnable() const {
  int n = 0;
  for (const auto& a : agents)
    if (a.learnable) ++n;
  return n;
}

std::vector<Vec2> EnvConfig::known_hideouts() const {
  std::vector<Vec2> out;
  for (const auto& h : hideouts)
    if (h.known_to_pursuers) out.push_back(h.pos);
  return out;
}

std::vector<double> observe_base(const TerrainWorldState& st,
                                 const EnvConfig& cfg, int agent_index) {
  if (agent_index < 0 ||
      agent_index >= static_cast<int>(cfg.agents.size()) ||
      !cfg.agents[agent_index].learnable)
    throw ContractError("observe_base: invalid learnable agent index");
  std::vector<double> o;
  o.push_back(st.agent_pos[agent_index].x);
  o.push_back(st.agent_pos[agent_index].y);
  o.push_back(static_cast<double>(st.t) / cfg.t_max);
  for (int i = 0; i < static_cast<int>(cfg.agents.size()); ++i) {
    if (i == agent_index || !cfg.agents[i].learnable) continue;
    o.push_back(st.agent_pos[i].x);
    o.push_back(st.agent_pos[i].y);
  }
  for (Vec2 h : cfg.known_hideouts()) {
    o.push_back(h.x);
    o.push_back(h.y);
  }
  return o;
}

// ---------------------------------------------------------------------------
// Environment

Environment::Environment(EnvConfig cfg, std::uint64_t episode_seed)
    : cfg_(std::move(cfg)),
      terrain_(generate_terrain(cfg_.terrain_seed, cfg_.grid,
                                cfg_.forest_fraction)) {
  if (cfg_.hideouts.empty()) throw ConfigError("at least one hideout required");
  reset(episode_seed);
}

void Environment::reset(std::uint64_t episode_seed) {
  std::mt19937_64 rng(episode_seed);
  state_ = TerrainWorldState{};
  state_.agent_pos.reserve(cfg_.agents.size());
  for (const auto& a : cfg_.agents) state_.agent_pos.push_back(a.start);
  state_.agent_vel.assign(cfg_.agents.size(), Vec2{});

  evader_start_ = cfg_.evader.start;
  if (cfg_.evader.randomize_start) {
    std::uniform_real_distribution<double> uni(0.05, 0.95);
    evader_start_ = {uni(rng), uni(rng)};
  }
  state_.evader_pos = evader_start_;
  goal_ = evader::choose_goal(cfg_.hideouts, evader_start_, rng()).pos;
  evader_ = evader::EvaderController(&terrain_, cfg_.evader, evader_start_,
                                     goal_, cfg_.detection);
}

StepResult Environment::step(const std::vector<Vec2>& actions) {
  if (state_.done) throw ContractError("step on finished episode");
  if (static_cast<int>(actions.size()) != num_learnable())
    throw ContractError("one action per learnable agent required");

  int ai = 0;
  for (int i = 0; i < static_cast<int>(cfg_.agents.size()); ++i) {
    if (!cfg_.agents[i].learnable) {
      state_.agent_vel[i] = Vec2{};
      continue;
    }
    Vec2 v = clip_norm(actions[ai++], cfg_.agents[i].max_speed);
    state_.agent_vel[i] = v;
    state_.agent_pos[i] = clamp01(state_.agent_pos[i] + v);
  }

  std::vector<evader::PursuerView> views;
  views.reserve(cfg_.agents.size());
  for (int i = 0; i < static_cast<int>(cfg_.agents.size()); ++i)
    views.push_back({state_.agent_pos[i], state_.agent_vel[i].norm(),
                     cfg_.agents[i].max_speed});
  Vec2 ev = clip_norm(evader_.step(state_.evader_pos, views),
                      cfg_.evader.max_speed);
  state_.evader_vel = ev;
  state_.evader_pos = clamp01(state_.evader_pos + ev);

  state_.t += 1;

  StepResult res;
  double vis = terrain_.at(state_.evader_pos);
  double espeed = ev.norm();
  for (int i = 0; i < static_cast<int>(cfg_.agents.size()); ++i) {
    double r = detection_radius(cfg_.agents[i], espeed, cfg_.evader.max_speed,
                                vis, cfg_.detection);
    if (dist(state_.agent_pos[i], state_.evader_pos) <= r) {
      Detection d{state_.t, state_.evader_pos, ev, i};
      res.detections.push_back(d);
      state_.detection_log.push_back(d);
    }
  }

  bool any = !res.detections.empty();
  for (int i = 0; i < static_cast<int>(cfg_.agents.size()); ++i) {
    if (!cfg_.agents[i].learnable) continue;
    bool self = false;
    for (const auto& d : res.detections) self |= d.agent == i;
    res.rewards.push_back(reward(state_.agent_pos[i], state_.evader_pos, self,
                                 any, cfg_.rewards));
  }

  if (dist(state_.evader_pos, goal_) <= cfg_.hideout_eps) {
    state_.done = true;
    state_.outcome = Outcome::HideoutReached;
  } else if (state_.t >= cfg_.t_max) {
    state_.done = true;
    state_.outcome = Outcome::Timeout;
  }
  res.done = state_.done;
  res.outcome = state_.outcome;
  return res;
}

}  // namespace pursuit::world
