#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "pwe/error.hpp"

namespace pwe {

/// Cartesian vector in the world frame (z up), meters unless noted.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

inline Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::InvalidVector, "cannot normalize a zero or non-finite vector");
  }
  return a / n;
}

/// Tolerance used when validating caller-supplied unit vectors.
inline constexpr double kUnitTolerance = 1e-9;

inline bool is_unit(const Vec3& v, double tol = kUnitTolerance) {
  return std::abs(norm(v) - 1.0) <= tol;
}

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Angle between two unit vectors in [0, pi]. Uses atan2 of the cross and dot
/// products so that nearly parallel inputs keep full precision.
inline double angle_between(const Vec3& u, const Vec3& v) {
  if (!is_unit(u) || !is_unit(v)) {
    throw Error(ErrorCode::InvalidVector, "angle_between expects unit vectors");
  }
  return std::atan2(norm(cross(u, v)), dot(u, v));
}

/// Rodrigues rotation of `v` about unit `axis` by `angle` radians.
inline Vec3 rotate(const Vec3& v, const Vec3& axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return v * c + cross(axis, v) * s + axis * (dot(axis, v) * (1.0 - c));
}

/// Any unit vector orthogonal to unit `n`.
inline Vec3 any_orthogonal(const Vec3& n) {
  const Vec3 helper = std::abs(n.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
  return normalized(cross(helper, n));
}

/// Position plus a right-handed orthonormal body triad expressed in world
/// coordinates.
class Pose {
 public:
  Pose() = default;

  Pose(const Vec3& position, const Vec3& x_axis, const Vec3& y_axis, const Vec3& z_axis)
      : position_(position), x_(x_axis), y_(y_axis), z_(z_axis) {
    constexpr double tol = 1e-9;
    const bool ortho = std::abs(dot(x_, y_)) <= tol && std::abs(dot(y_, z_)) <= tol &&
                       std::abs(dot(x_, z_)) <= tol;
    const bool unit = is_unit(x_, tol) && is_unit(y_, tol) && is_unit(z_, tol);
    if (!ortho || !unit || norm(cross(x_, y_) - z_) > 1e-8) {
      throw Error(ErrorCode::InvalidVector, "pose triad must be right-handed orthonormal");
    }
  }

  /// Body z axis along `up`; body x chosen as the projection of `forward`.
  static Pose looking(const Vec3& position, const Vec3& up, const Vec3& forward = {1, 0, 0}) {
    const Vec3 z = normalized(up);
    Vec3 x = forward - z * dot(forward, z);
    x = norm(x) > 1e-9 ? normalized(x) : any_orthogonal(z);
    return Pose(position, x, cross(z, x), z);
  }

  static Pose facing_up(const Vec3& position) { return Pose(position, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}); }

  const Vec3& position() const noexcept { return position_; }
  const Vec3& x_axis() const noexcept { return x_; }
  const Vec3& y_axis() const noexcept { return y_; }
  const Vec3& z_axis() const noexcept { return z_; }

  Vec3 to_world_dir(const Vec3& body) const { return x_ * body.x + y_ * body.y + z_ * body.z; }
  Vec3 to_world_point(const Vec3& body) const { return position_ + to_world_dir(body); }
  Vec3 to_body_dir(const Vec3& world) const { return {dot(world, x_), dot(world, y_), dot(world, z_)}; }

  Pose with_position(const Vec3& p) const {
    Pose out = *this;
    out.position_ = p;
    return out;
  }

 private:
  Vec3 position_{};
  Vec3 x_{1, 0, 0};
  Vec3 y_{0, 1, 0};
  Vec3 z_{0, 0, 1};
};

/// Axis-aligned box, min < max on every axis.
struct Box {
  Vec3 min;
  Vec3 max;

  bool contains(const Vec3& p, double tol = 1e-9) const {
    return p.x >= min.x - tol && p.x <= max.x + tol && p.y >= min.y - tol && p.y <= max.y + tol &&
           p.z >= min.z - tol && p.z <= max.z + tol;
  }
  bool contains(const Box& b) const { return contains(b.min, 0.0) && contains(b.max, 0.0); }
  bool well_formed() const { return min.x < max.x && min.y < max.y && min.z < max.z; }
  Vec3 center() const { return (min + max) * 0.5; }
};

/// True iff the open segment (a, b) meets the open interior of `box`.
inline bool segment_hits_box_interior(const Vec3& a, const Vec3& b, const Box& box) {
  const double pa[3] = {a.x, a.y, a.z};
  const double d[3] = {b.x - a.x, b.y - a.y, b.z - a.z};
  const double lo[3] = {box.min.x, box.min.y, box.min.z};
  const double hi[3] = {box.max.x, box.max.y, box.max.z};
  double t0 = 0.0;
  double t1 = 1.0;
  for (int k = 0; k < 3; ++k) {
    if (d[k] == 0.0) {
      if (!(pa[k] > lo[k] && pa[k] < hi[k])) return false;
      continue;
    }
    double ta = (lo[k] - pa[k]) / d[k];
    double tb = (hi[k] - pa[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (!(t0 < t1)) return false;
  }
  return t0 < t1;
}

class Room {
 public:
  Room() = default;

  explicit Room(Box extents, std::vector<Box> obstacles = {})
      : extents_(extents), obstacles_(std::move(obstacles)) {
    if (!extents_.well_formed()) {
      throw Error(ErrorCode::ConfigError, "room extents must satisfy min < max on every axis");
    }
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      if (!obstacles_[i].well_formed()) {
        throw Error(ErrorCode::ConfigError, "obstacle " + std::to_string(i) + " has min >= max");
      }
      if (!extents_.contains(obstacles_[i])) {
        throw Error(ErrorCode::ConfigError, "obstacle " + std::to_string(i) + " exceeds room extents");
      }
    }
  }

  const Box& extents() const noexcept { return extents_; }
  const std::vector<Box>& obstacles() const noexcept { return obstacles_; }
  bool inside(const Vec3& p) const { return extents_.contains(p); }

 private:
  Box extents_{{0, 0, 0}, {1, 1, 1}};
  std::vector<Box> obstacles_;
};

/// Line-of-sight test. Touching an obstacle face does not block.
inline bool segment_occluded(const Vec3& a, const Vec3& b, const Room& room) {
  if (!room.inside(a) || !room.inside(b)) {
    throw Error(ErrorCode::OutOfRoom, "segment endpoint outside room extents");
  }
  return std::any_of(room.obstacles().begin(), room.obstacles().end(),
                     [&](const Box& box) { return segment_hits_box_interior(a, b, box); });
}

}  // namespace pwe
