#include "pursuit/search_policies.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pursuit::policies {

Vec2 random_policy(std::mt19937_64& rng, double max_speed) {
  std::uniform_real_distribution<double> angle(0, 2 * std::numbers::pi);
  double a = angle(rng);
  return {max_speed * std::cos(a), max_speed * std::sin(a)};
}

std::optional<Vec2> intercept_point(Vec2 x_s, double v_max, Vec2 x_p,
                                    Vec2 u_p) {
  if (v_max <= 0) throw world::ConfigError("intercept_point: v_max <= 0");
  Vec2 d = x_p - x_s;
  // ||d + T u||^2 = T^2 v^2  ->  (|u|^2 - v^2) T^2 + 2 d.u T + |d|^2 = 0
  double a = u_p.x * u_p.x + u_p.y * u_p.y - v_max * v_max;
  double b = 2 * (d.x * u_p.x + d.y * u_p.y);
  double c = d.x * d.x + d.y * d.y;
  double T = -1;
  if (std::abs(a) < 1e-15) {
    if (std::abs(b) < 1e-15) return c == 0 ? std::optional<Vec2>(x_p)
                                           : std::nullopt;
    T = -c / b;
  } else {
    double disc = b * b - 4 * a * c;
    if (disc < 0) return std::nullopt;
    double sq = std::sqrt(disc);
    double t1 = (-b - sq) / (2 * a);
    double t2 = (-b + sq) / (2 * a);
    if (t1 > t2) std::swap(t1, t2);
    T = t1 > 0 ? t1 : t2;
  }
  if (T <= 0) {
    // already on top of the target
    if (c == 0) return x_p;
    return std::nullopt;
  }
  return x_p + u_p * T;
}

Vec2 spiral_waypoint(Vec2 center, int step_index, double a, double b,
                     double v_max) {
  // Advance theta so consecutive waypoints stay within v_max. The chord for
  // a step dtheta is at most dtheta * sqrt((r + b)^2 + b^2) when dtheta <= 1,
  // which holds for the tiny per-step speeds in play.
  double theta = 0;
  for (int i = 0; i < step_index; ++i) {
    double r = a + b * theta;
    theta += v_max / std::sqrt((r + b) * (r + b) + b * b);
  }
  double r = a + b * theta;
  return {center.x + r * std::cos(theta), center.y + r * std::sin(theta)};
}

namespace {

Vec2 pointwise(Vec2 from, Vec2 to, double v_max) {
  return clip_norm(to - from, v_max);
}

}  // namespace

std::vector<Vec2> heuristic_policy(
    const std::vector<AgentView>& agents,
    const std::optional<world::Detection>& detected_now,
    HeuristicState& state) {
  if (detected_now) state.last_detection = detected_now;

  std::vector<Vec2> out(agents.size());
  std::uniform_real_distribution<double> center_dist(0.1, 0.9);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    auto& st = state.agents[i];
    const AgentView& ag = agents[i];
    const HeuristicParams& hp = state.params;

    if (detected_now) {
      st.steps_since_detection = 0;
      Vec2 x_p = detected_now->pos;
      if (dist(x_p, ag.pos) < ag.max_speed) {
        st.mode = HeuristicMode::Chase;
        out[i] = pointwise(ag.pos, x_p, ag.max_speed);
      } else {
        st.mode = HeuristicMode::Intercept;
        auto ip = intercept_point(ag.pos, ag.max_speed, x_p,
                                  detected_now->vel);
        out[i] = pointwise(ag.pos, ip.value_or(x_p), ag.max_speed);
      }
      st.spiral_step = 0;
      st.has_spiral_center = false;
      continue;
    }

    st.steps_since_detection += 1;
    if (state.last_detection &&
        st.steps_since_detection < hp.t_spiral) {
      if (st.mode != HeuristicMode::Spiral) {
        st.mode = HeuristicMode::Spiral;
        st.spiral_center = state.last_detection->pos;
        st.spiral_step = 0;
      }
      Vec2 wp = spiral_waypoint(st.spiral_center, st.spiral_step++,
                                hp.spiral_a, hp.spiral_b, ag.max_speed);
      out[i] = pointwise(ag.pos, wp, ag.max_speed);
    } else {
      if (st.mode != HeuristicMode::RandomSpiral || !st.has_spiral_center ||
          st.spiral_step >= hp.t_spiral) {
        st.mode = HeuristicMode::RandomSpiral;
        st.spiral_center = {center_dist(state.rng), center_dist(state.rng)};
        st.has_spiral_center = true;
        st.spiral_step = 0;
      }
      Vec2 wp = spiral_waypoint(st.spiral_center, st.spiral_step++,
                                hp.spiral_a, hp.spiral_b, ag.max_speed);
      out[i] = pointwise(ag.pos, wp, ag.max_speed);
    }
  }
  return out;
}

std::vector<Vec2> pmc_highest_prob_policy(const filter::MixturePrediction& pred,
                                          const std::vector<AgentView>& agents) {
  int best = 0;
  for (int j = 1; j < filter::kNumComponents; ++j)
    if (pred.lambda[j] > pred.lambda[best]) best = j;  // ties keep lowest index
  std::vector<Vec2> out(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i)
    out[i] = clip_norm(pred.mu[best] - agents[i].pos, agents[i].max_speed);
  return out;
}

std::vector<Vec2> pmc_search_policy(const filter::MixturePrediction& pred,
                                    const std::vector<AgentView>& agents) {
  std::vector<int> order(filter::kNumComponents);
  for (int j = 0; j < filter::kNumComponents; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return pred.lambda[a] > pred.lambda[b];
  });
  int top = std::min<int>(static_cast<int>(agents.size()),
                          filter::kNumComponents);
  std::vector<Vec2> out(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    Vec2 target = pred.mu[order[i % top]];
    out[i] = clip_norm(target - agents[i].pos, agents[i].max_speed);
  }
  return out;
}

}  // namespace pursuit::policies
