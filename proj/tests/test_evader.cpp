#include <doctest.h>

#include <cmath>
#include <random>

#include "pursuit/evader.hpp"

using namespace pursuit;
using namespace pursuit::evader;

TEST_CASE("astar matches dijkstra on random terrains") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uni(0.02, 0.98);
  std::uniform_real_distribution<double> wv(0.0, 4.0);
  for (int it = 0; it < 20; ++it) {
    world::TerrainMap m = world::generate_terrain(100 + it, 32, 0.4);
    Vec2 s{uni(rng), uni(rng)}, g{uni(rng), uni(rng)};
    double w = wv(rng);
    auto path = astar_plan(m, s, g, w);
    double astar_cost = path_cost(m, s, path, w);
    double oracle = dijkstra_cost(m, s, g, w);
    CHECK(std::abs(astar_cost - oracle) < 1e-12);
  }
}

TEST_CASE("uniform terrain with w_v=0 gives the straight geodesic") {
  world::TerrainMap m(32, std::vector<double>(32 * 32, 1.0), 0);
  Vec2 s = m.cell_center(2, 3), g = m.cell_center(12, 9);
  auto path = astar_plan(m, s, g, 0.0);
  // 8-connected geodesic: diagonal moves for min(dx,dy), straight for rest
  int dx = 10, dy = 6;
  double expect = (dy * std::sqrt(2.0) + (dx - dy)) / 32.0;
  CHECK(path_cost(m, s, path, 0.0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("planner prefers the dark route when weighted cost is lower") {
  // bright corridor straight ahead, dark detour below
  const int G = 16;
  std::vector<double> vis(G * G, 1.0);
  for (int x = 0; x < G; ++x) vis[12 * G + x] = 0.05;  // dark row y=12
  world::TerrainMap m(G, std::move(vis), 0);
  Vec2 s = m.cell_center(0, 8), g = m.cell_center(15, 8);
  double w = 8.0;
  auto path = astar_plan(m, s, g, w);
  CHECK(std::abs(path_cost(m, s, path, w) - dijkstra_cost(m, s, g, w)) <
        1e-12);
  bool used_dark = false;
  for (Vec2 p : path) used_dark |= m.at(p) < 0.3;
  CHECK(used_dark);
}

TEST_CASE("choose_goal") {
  std::vector<world::Hideout> one = {{{0.5, 0.5}, true}};
  CHECK(choose_goal(one, {0, 0}, 1).pos == Vec2{0.5, 0.5});
  CHECK_THROWS_AS(choose_goal({}, {0, 0}, 1), world::ConfigError);

  std::vector<world::Hideout> three = {
      {{0.1, 0.1}, true}, {{0.5, 0.5}, false}, {{0.9, 0.9}, false}};
  CHECK(choose_goal(three, {0, 0}, 42).pos ==
        choose_goal(three, {0, 0}, 42).pos);
  int counts[3] = {0, 0, 0};
  for (int seed = 0; seed < 1000; ++seed) {
    Vec2 p = choose_goal(three, {0, 0}, seed).pos;
    for (int i = 0; i < 3; ++i)
      if (p == three[i].pos) ++counts[i];
  }
  for (int c : counts) {
    CHECK(c > 283);
    CHECK(c < 383);
  }
}

namespace {

world::EvaderParams test_params() {
  world::EvaderParams p;
  p.randomize_start = false;
  return p;
}

}  // namespace

TEST_CASE("evader state machine") {
  world::TerrainMap m = world::generate_terrain(9, 32, 0.4);
  world::EvaderParams params = test_params();
  world::DetectionParams det;

  SUBCASE("no pursuers keeps FOLLOW and bounded speed") {
    EvaderController ev(&m, params, {0.05, 0.05}, {0.9, 0.9}, det);
    Vec2 pos{0.05, 0.05};
    for (int i = 0; i < 400; ++i) {
      Vec2 v = ev.step(pos, {});
      CHECK(v.norm() <= params.max_speed + 1e-12);
      CHECK(ev.mode() == EvaderMode::Follow);
      pos = clamp01(pos + v);
    }
    CHECK(dist(pos, {0.9, 0.9}) < 0.05);
  }

  SUBCASE("pursuer parked on the evader triggers EVADE") {
    EvaderController ev(&m, params, {0.2, 0.2}, {0.9, 0.9}, det);
    Vec2 pos{0.2, 0.2};
    PursuerView parked{{0.2, 0.2}, 0.0, 20.0 / 2428.0};
    for (int i = 0; i < params.n_trigger; ++i) {
      parked.pos = pos;
      pos = clamp01(pos + ev.step(pos, {parked}));
    }
    CHECK(ev.mode() == EvaderMode::Evade);
  }

  SUBCASE("recovery replans from the current cell") {
    EvaderController ev(&m, params, {0.2, 0.2}, {0.9, 0.9}, det);
    Vec2 pos{0.2, 0.2};
    PursuerView parked{{0.2, 0.2}, 0.0, 20.0 / 2428.0};
    for (int i = 0; i < params.n_trigger; ++i) {
      parked.pos = pos;
      pos = clamp01(pos + ev.step(pos, {parked}));
    }
    REQUIRE(ev.mode() == EvaderMode::Evade);
    // pursuer leaves; next step recovers to FOLLOW with a fresh plan
    Vec2 v = ev.step(pos, {});
    CHECK(ev.mode() == EvaderMode::Follow);
    REQUIRE(!ev.waypoints().empty());
    // first waypoint of the new plan is adjacent to the current cell
    int cx = m.cell_x(pos.x), cy = m.cell_y(pos.y);
    int wx = m.cell_x(ev.waypoints().front().x),
        wy = m.cell_y(ev.waypoints().front().y);
    CHECK(std::max(std::abs(wx - cx), std::abs(wy - cy)) <= 1);
    CHECK(v.norm() <= params.max_speed + 1e-12);
  }
}

TEST_CASE("w_v=0 trajectory length tracks the geodesic") {
  world::TerrainMap m(32, std::vector<double>(32 * 32, 1.0), 0);
  world::EvaderParams params = test_params();
  world::DetectionParams det;
  Vec2 start = m.cell_center(2, 2), goal = m.cell_center(28, 20);
  world::EvaderParams p0 = params;
  p0.w_v = 0;
  EvaderController ev(&m, p0, start, goal, det);
  Vec2 pos = start;
  int steps = 0;
  while (dist(pos, goal) > 1e-9 && steps < 1000) {
    pos = clamp01(pos + ev.step(pos, {}));
    ++steps;
  }
  double geo = path_cost(m, start, astar_plan(m, start, goal, 0.0), 0.0);
  int expect = static_cast<int>(std::ceil(geo / params.max_speed));
  CHECK(steps <= expect + 1);
}
