#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <set>
#include <string>
#include <vector>

#include "pwe/error.hpp"
#include "pwe/geometry.hpp"
#include "pwe/random.hpp"

namespace pwe {

enum class Mount { Ceiling, Leris };

/// LED emitter with a Lambertian pattern of order m around `normal`.
struct OpticalAnchor {
  int id = 0;
  Vec3 position;
  Vec3 normal{0, 0, -1};
  double lambertian_order = 1.0;
  double tx_power = 1.0;  // W
  Mount mount = Mount::Ceiling;
  int panel_id = -1;  // owning RIS panel when mount == Leris

  void validate() const {
    if (!(tx_power > 0.0)) throw Error(ErrorCode::ConfigError, "anchor " + std::to_string(id) + ": tx_power must be > 0");
    if (!(lambertian_order > 0.0)) {
      throw Error(ErrorCode::ConfigError, "anchor " + std::to_string(id) + ": lambertian order must be > 0");
    }
    if (!is_unit(normal)) throw Error(ErrorCode::InvalidVector, "anchor " + std::to_string(id) + ": normal not unit");
  }
};

/// One photodetector, described in the receiver body frame.
struct Photodetector {
  Vec3 offset;
  Vec3 normal{0, 0, 1};
  double area = 1e-4;                              // m^2
  double fov_half_angle = deg_to_rad(70.0);        // rad
  double optical_gain = 1.0;                       // filter x concentrator
};

/// A photodetector resolved into world coordinates.
struct PdWorld {
  Vec3 position;
  Vec3 normal{0, 0, 1};
  double area = 1e-4;
  double fov_half_angle = deg_to_rad(70.0);
  double optical_gain = 1.0;
};

class PdArray {
 public:
  PdArray() = default;

  PdArray(Pose pose, std::vector<Photodetector> elements) : pose_(pose), elements_(std::move(elements)) {
    if (elements_.empty()) throw Error(ErrorCode::ConfigError, "photodetector array needs at least one element");
    for (const auto& e : elements_) {
      if (!(e.area > 0.0) || !(e.optical_gain > 0.0)) {
        throw Error(ErrorCode::ConfigError, "photodetector area and gain must be positive");
      }
      if (!(e.fov_half_angle > 0.0) || e.fov_half_angle > std::numbers::pi / 2 + 1e-12) {
        throw Error(ErrorCode::ConfigError, "photodetector FOV half-angle must be in (0, pi/2]");
      }
      if (!is_unit(e.normal)) throw Error(ErrorCode::InvalidVector, "photodetector normal not unit");
    }
  }

  /// One upward PD plus four PDs tilted by `tilt` at azimuths 0, 90, 180 and
  /// 270 degrees, all co-located at the body origin.
  static PdArray pyramid(Pose pose, double tilt = deg_to_rad(45.0), double area = 1e-4,
                         double fov = deg_to_rad(70.0), double gain = 1.0) {
    std::vector<Photodetector> pds;
    pds.push_back({{}, {0, 0, 1}, area, fov, gain});
    for (int k = 0; k < 4; ++k) {
      const double az = k * std::numbers::pi / 2;
      const Vec3 n{std::sin(tilt) * std::cos(az), std::sin(tilt) * std::sin(az), std::cos(tilt)};
      pds.push_back({{}, n, area, fov, gain});
    }
    return PdArray(pose, std::move(pds));
  }

  const Pose& pose() const noexcept { return pose_; }
  const std::vector<Photodetector>& elements() const noexcept { return elements_; }
  std::size_t size() const noexcept { return elements_.size(); }

  PdWorld world(std::size_t i) const { return world_at(i, pose_.position()); }

  /// Element `i` with the array origin moved to `origin` (orientation kept).
  PdWorld world_at(std::size_t i, const Vec3& origin) const {
    const auto& e = elements_.at(i);
    return {origin + pose_.to_world_dir(e.offset), pose_.to_world_dir(e.normal), e.area, e.fov_half_angle,
            e.optical_gain};
  }

  PdArray moved_to(const Vec3& p) const {
    PdArray out = *this;
    out.pose_ = pose_.with_position(p);
    return out;
  }

 private:
  Pose pose_;
  std::vector<Photodetector> elements_;
};

struct ChannelParams {
  double k_factor = std::numeric_limits<double>::infinity();  // LoS / NLoS power ratio
  double noise_std = 1e-9;                                    // W
  double detection_threshold = 1e-9;                          // W
  std::uint64_t seed = 1;

  void validate() const {
    if (!(k_factor > 0.0)) throw Error(ErrorCode::ConfigError, "K must be > 0");
    if (!(noise_std >= 0.0)) throw Error(ErrorCode::ConfigError, "noise_std must be >= 0");
    if (!(detection_threshold >= 0.0)) throw Error(ErrorCode::ConfigError, "detection_threshold must be >= 0");
  }
};

struct ChannelSample {
  int anchor_id = 0;
  int pd_index = 0;
  double rss = 0.0;  // W
  bool los = false;

  friend bool operator==(const ChannelSample&, const ChannelSample&) = default;
};

/// Lambertian line-of-sight DC gain
///   H = (m+1) A / (2 pi d^2) cos^m(phi) cos(psi) G
/// with phi the emission angle and psi the incidence angle. Zero outside the
/// detector FOV or behind the emitter plane.
inline double los_gain(const OpticalAnchor& anchor, const PdWorld& pd) {
  const Vec3 w = pd.position - anchor.position;
  const double d2 = dot(w, w);
  if (!(d2 > 1e-24)) throw Error(ErrorCode::DegenerateGeometry, "anchor and photodetector coincide");
  const double d = std::sqrt(d2);
  const double cos_phi = dot(anchor.normal, w) / d;
  const double cos_psi = -dot(pd.normal, w) / d;
  if (cos_phi <= 0.0 || cos_psi <= 0.0) return 0.0;
  if (std::acos(std::min(1.0, cos_psi)) > pd.fov_half_angle) return 0.0;
  const double m = anchor.lambertian_order;
  return (m + 1.0) * pd.area / (2.0 * std::numbers::pi * d2) * std::pow(cos_phi, m) * cos_psi * pd.optical_gain;
}

/// Gradient of `los_gain` with respect to the photodetector position, holding
/// orientations fixed. Zero wherever the gain is zero.
inline Vec3 los_gain_gradient(const OpticalAnchor& anchor, const PdWorld& pd) {
  const double h = los_gain(anchor, pd);
  if (h == 0.0) return {};
  const Vec3 w = pd.position - anchor.position;
  const double m = anchor.lambertian_order;
  return h * (anchor.normal * (m / dot(anchor.normal, w)) + pd.normal * (1.0 / dot(pd.normal, w)) -
              w * ((m + 3.0) / dot(w, w)));
}

/// Noiseless received LoS power, P_t * H.
inline double los_power(const OpticalAnchor& anchor, const PdWorld& pd) { return anchor.tx_power * los_gain(anchor, pd); }

/// One RSS reading per (anchor, photodetector) pair, anchors in input order.
/// Each pair consumes one exponential and one normal draw regardless of
/// visibility, so runs sharing a seed are paired across K and geometry.
inline std::vector<ChannelSample> measure(const Room& room, std::span<const OpticalAnchor> anchors, const PdArray& ue,
                                          const ChannelParams& params, Rng& rng) {
  params.validate();
  if (!room.inside(ue.pose().position())) throw Error(ErrorCode::OutOfRoom, "receiver outside room");
  std::vector<ChannelSample> out;
  out.reserve(anchors.size() * ue.size());
  for (const auto& anchor : anchors) {
    for (std::size_t i = 0; i < ue.size(); ++i) {
      const double nlos_unit = rng.exponential();
      const double noise = params.noise_std * rng.normal();
      const PdWorld pd = ue.world(i);
      const double gain = los_gain(anchor, pd);
      const bool visible = gain > 0.0 && !segment_occluded(anchor.position, pd.position, room);
      ChannelSample s{anchor.id, static_cast<int>(i), 0.0, visible};
      if (visible) {
        const double p_los = anchor.tx_power * gain;
        const double p_nlos = std::isinf(params.k_factor) ? 0.0 : nlos_unit * p_los / params.k_factor;
        s.rss = std::max(0.0, p_los + p_nlos + noise);
      } else {
        s.rss = std::max(0.0, noise);
      }
      out.push_back(s);
    }
  }
  return out;
}

inline std::vector<ChannelSample> measure(const Room& room, std::span<const OpticalAnchor> anchors, const PdArray& ue,
                                          const ChannelParams& params) {
  Rng rng(params.seed);
  return measure(room, anchors, ue, params, rng);
}

/// Number of distinct anchors with at least one detectable LoS sample.
inline int count_los_anchors(std::span<const ChannelSample> samples, const ChannelParams& params) {
  std::set<int> ids;
  for (const auto& s : samples) {
    if (s.los && s.rss >= params.detection_threshold) ids.insert(s.anchor_id);
  }
  return static_cast<int>(ids.size());
}

}  // namespace pwe
