#include "pursuit/evader.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

namespace pursuit::evader {

namespace {

constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDy[8] = {0, 1, 1, 1, 0, -1, -1, -1};

double edge_cost(const world::TerrainMap& t, int nx, int ny, int dir,
                 double w_v) {
  double step = (dir % 2 == 0 ? 1.0 : std::numbers::sqrt2) / t.grid();
  return step * (1.0 + w_v * t.at_cell(nx, ny));
}

struct QEntry {
  double f;
  double g;
  int node;
  bool operator>(const QEntry& o) const {
    if (f != o.f) return f > o.f;
    return node > o.node;  // deterministic tie break
  }
};

}  // namespace

std::vector<Vec2> astar_plan(const world::TerrainMap& terrain, Vec2 start,
                             Vec2 goal, double w_v) {
  if (w_v < 0) throw world::ConfigError("w_v must be >= 0");
  const int G = terrain.grid();
  const int sx = terrain.cell_x(start.x), sy = terrain.cell_y(start.y);
  const int gx = terrain.cell_x(goal.x), gy = terrain.cell_y(goal.y);
  const int n = G * G;
  const int goal_node = gy * G + gx;

  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> prev(n, -1);
  std::vector<char> closed(n, 0);
  auto heuristic = [&](int node) {
    int x = node % G, y = node / G;
    return std::hypot(double(x - gx), double(y - gy)) / G;
  };
  std::priority_queue<QEntry, std::vector<QEntry>, std::greater<QEntry>> open;
  int start_node = sy * G + sx;
  dist[start_node] = 0;
  open.push({heuristic(start_node), 0, start_node});

  while (!open.empty()) {
    QEntry e = open.top();
    open.pop();
    if (closed[e.node]) continue;
    closed[e.node] = 1;
    if (e.node == goal_node) break;
    int x = e.node % G, y = e.node / G;
    for (int d = 0; d < 8; ++d) {
      int nx = x + kDx[d], ny = y + kDy[d];
      if (nx < 0 || ny < 0 || nx >= G || ny >= G) continue;
      int nn = ny * G + nx;
      if (closed[nn]) continue;
      double ng = e.g + edge_cost(terrain, nx, ny, d, w_v);
      if (ng < dist[nn]) {
        dist[nn] = ng;
        prev[nn] = e.node;
        open.push({ng + heuristic(nn), ng, nn});
      }
    }
  }
  if (!closed[goal_node] && goal_node != start_node)
    throw world::ConfigError("astar: goal unreachable");

  std::vector<Vec2> path;
  for (int node = goal_node; node != start_node; node = prev[node])
    path.push_back(terrain.cell_center(node % G, node / G));
  std::reverse(path.begin(), path.end());
  return path;
}

double dijkstra_cost(const world::TerrainMap& terrain, Vec2 start, Vec2 goal,
                     double w_v) {
  const int G = terrain.grid();
  const int n = G * G;
  const int start_node =
      terrain.cell_y(start.y) * G + terrain.cell_x(start.x);
  const int goal_node = terrain.cell_y(goal.y) * G + terrain.cell_x(goal.x);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<char> closed(n, 0);
  std::priority_queue<QEntry, std::vector<QEntry>, std::greater<QEntry>> open;
  dist[start_node] = 0;
  open.push({0, 0, start_node});
  while (!open.empty()) {
    QEntry e = open.top();
    open.pop();
    if (closed[e.node]) continue;
    closed[e.node] = 1;
    int x = e.node % G, y = e.node / G;
    for (int d = 0; d < 8; ++d) {
      int nx = x + kDx[d], ny = y + kDy[d];
      if (nx < 0 || ny < 0 || nx >= G || ny >= G) continue;
      int nn = ny * G + nx;
      if (closed[nn]) continue;
      double ng = e.g + edge_cost(terrain, nx, ny, d, w_v);
      if (ng < dist[nn]) {
        dist[nn] = ng;
        open.push({ng, ng, nn});
      }
    }
  }
  return dist[goal_node];
}

double path_cost(const world::TerrainMap& terrain, Vec2 start,
                 const std::vector<Vec2>& waypoints, double w_v) {
  const int G = terrain.grid();
  double total = 0;
  int px = terrain.cell_x(start.x), py = terrain.cell_y(start.y);
  for (Vec2 wp : waypoints) {
    int x = terrain.cell_x(wp.x), y = terrain.cell_y(wp.y);
    int dx = std::abs(x - px), dy = std::abs(y - py);
    if (std::max(dx, dy) != 1)
      throw world::ContractError("path_cost: waypoints not 8-adjacent");
    double step = ((dx + dy) == 1 ? 1.0 : std::numbers::sqrt2) / G;
    total += step * (1.0 + w_v * terrain.at_cell(x, y));
    px = x;
    py = y;
  }
  return total;
}

world::Hideout choose_goal(const std::vector<world::Hideout>& hideouts,
                           Vec2 /*start*/, std::uint64_t seed) {
  if (hideouts.empty()) throw world::ConfigError("no hideouts to choose from");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, hideouts.size() - 1);
  return hideouts[pick(rng)];
}

// ---------------------------------------------------------------------------

EvaderController::EvaderController(const world::TerrainMap* terrain,
                                   const world::EvaderParams& params,
                                   Vec2 start, Vec2 goal,
                                   const world::DetectionParams& det)
    : terrain_(terrain), params_(params), det_(det), goal_(goal) {
  replan(start);
}

void EvaderController::replan(Vec2 from) {
  auto path = astar_plan(*terrain_, from, goal_, params_.w_v);
  waypoints_.assign(path.begin(), path.end());
  mode_ = EvaderMode::Follow;
  consecutive_observed_ = 0;
  evade_timer_ = 0;
}

bool EvaderController::observes_pursuer(Vec2 own_pos,
                                        const PursuerView& p) const {
  double r = world::detection_radius(params_.base_detect_radius, p.speed,
                                     p.max_speed, terrain_->at(p.pos), det_);
  return dist(own_pos, p.pos) <= r;
}

Vec2 EvaderController::nearest_dark_cell(Vec2 from) const {
  const int G = terrain_->grid();
  double best = std::numeric_limits<double>::infinity();
  Vec2 best_pos{};
  bool found = false;
  for (int y = 0; y < G; ++y)
    for (int x = 0; x < G; ++x) {
      if (terrain_->at_cell(x, y) >= params_.dark_threshold) continue;
      Vec2 c = terrain_->cell_center(x, y);
      double d = dist(from, c);
      if (d < best) {
        best = d;
        best_pos = c;
        found = true;
      }
    }
  return found ? best_pos : from;
}

Vec2 EvaderController::step(Vec2 own_pos,
                            const std::vector<PursuerView>& pursuers) {
  bool observed = false;
  for (const auto& p : pursuers)
    observed |= observes_pursuer(own_pos, p);

  if (mode_ == EvaderMode::Follow) {
    consecutive_observed_ = observed ? consecutive_observed_ + 1 : 0;
    if (consecutive_observed_ >= params_.n_trigger) {
      mode_ = EvaderMode::Evade;
      evade_timer_ = 0;
    }
  }

  if (mode_ == EvaderMode::Evade) {
    evade_timer_ += 1;
    if (evade_timer_ > params_.t_evade || !observed) {
      replan(own_pos);  // recover to the A* route
    } else {
      Vec2 target = nearest_dark_cell(own_pos);
      if (target == own_pos) {
        // No dark forest anywhere: run from the nearest pursuer instead.
        double best = std::numeric_limits<double>::infinity();
        Vec2 away{params_.max_speed, 0};
        for (const auto& p : pursuers) {
          double d = dist(own_pos, p.pos);
          if (d < best && d > 0) {
            best = d;
            away = (own_pos - p.pos) * (params_.max_speed / d);
          }
        }
        return away;
      }
      return clip_norm(target - own_pos, params_.max_speed);
    }
  }

  // FOLLOW: pop waypoints within one step's reach, head for the next one,
  // finish on the exact hideout location. A goal within one step wins over
  // any remaining cell-center waypoints.
  if (dist(own_pos, goal_) <= params_.max_speed) waypoints_.clear();
  while (!waypoints_.empty() &&
         dist(own_pos, waypoints_.front()) <= params_.max_speed)
    waypoints_.pop_front();
  Vec2 target = waypoints_.empty() ? goal_ : waypoints_.front();
  return clip_norm(target - own_pos, params_.max_speed);
}

}  // namespace pursuit::evader
