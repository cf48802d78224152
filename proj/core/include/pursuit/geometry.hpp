#pragma once

#include <cmath>

namespace pursuit {

struct Vec2 {
  double x = 0;
  double y = 0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
};

inline double dist(Vec2 a, Vec2 b) { return (a - b).norm(); }

inline Vec2 clamp01(Vec2 p) {
  auto c = [](double v) { return v < 0 ? 0.0 : (v > 1 ? 1.0 : v); };
  return {c(p.x), c(p.y)};
}

// Scales v down to length limit when it is longer; direction preserved.
inline Vec2 clip_norm(Vec2 v, double limit) {
  double n = v.norm();
  if (n <= limit || n == 0) return v;
  return v * (limit / n);
}

}  // namespace pursuit
