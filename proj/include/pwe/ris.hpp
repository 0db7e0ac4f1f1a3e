#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pwe/error.hpp"
#include "pwe/geometry.hpp"
#include "pwe/random.hpp"

namespace pwe {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Planar reflecting surface. Elements sit on a rows x cols grid with pitch
/// `spacing` carrier wavelengths; columns run along `u_axis`, rows along
/// `v_axis`, and u x v = normal (outward, into the served half-space).
class RisPanel {
 public:
  RisPanel() = default;

  RisPanel(int id, Vec3 center, Vec3 normal, Vec3 up, int rows, int cols, double spacing = 0.5)
      : id_(id), center_(center), rows_(rows), cols_(cols), spacing_(spacing) {
    if (rows < 1 || cols < 1) throw Error(ErrorCode::ConfigError, "panel rows and cols must be >= 1");
    if (!(spacing > 0.0)) throw Error(ErrorCode::ConfigError, "panel element spacing must be > 0");
    normal_ = normalized(normal);
    Vec3 v = up - normal_ * dot(up, normal_);
    v_ = norm(v) > 1e-9 ? normalized(v) : any_orthogonal(normal_);
    u_ = cross(v_, normal_);
  }

  int id() const noexcept { return id_; }
  const Vec3& center() const noexcept { return center_; }
  const Vec3& normal() const noexcept { return normal_; }
  const Vec3& u_axis() const noexcept { return u_; }
  const Vec3& v_axis() const noexcept { return v_; }
  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  double spacing() const noexcept { return spacing_; }
  int element_count() const noexcept { return rows_ * cols_; }

  RisPanel resized(int rows, int cols) const {
    RisPanel out = *this;
    if (rows < 1 || cols < 1) throw Error(ErrorCode::ConfigError, "panel rows and cols must be >= 1");
    out.rows_ = rows;
    out.cols_ = cols;
    return out;
  }

  /// In-plane coordinates of element (r, c) relative to the centre, in
  /// wavelengths, as (along u, along v).
  double u_coord(int c) const { return (c - 0.5 * (cols_ - 1)) * spacing_; }
  double v_coord(int r) const { return (r - 0.5 * (rows_ - 1)) * spacing_; }

  /// Element position relative to the centre, in wavelengths, world axes.
  Vec3 element_offset(int r, int c) const { return u_ * u_coord(c) + v_ * v_coord(r); }

  /// Panel-frame steering direction. Azimuth rotates from the normal towards
  /// u, elevation tilts towards v.
  Vec3 direction(double azimuth, double elevation) const {
    return (normal_ * std::cos(azimuth) + u_ * std::sin(azimuth)) * std::cos(elevation) + v_ * std::sin(elevation);
  }

  bool in_front(const Vec3& dir) const { return dot(dir, normal_) > 0.0; }

 private:
  int id_ = 0;
  Vec3 center_;
  Vec3 normal_{0, 0, 1};
  Vec3 u_{1, 0, 0};
  Vec3 v_{0, 1, 0};
  int rows_ = 1;
  int cols_ = 1;
  double spacing_ = 0.5;
};

/// Per-element phase in [0, 2 pi), row-major over rows x cols.
struct PhaseProfile {
  std::vector<double> phases;

  friend bool operator==(const PhaseProfile&, const PhaseProfile&) = default;
};

inline double wrap_phase(double phi) {
  double w = std::fmod(phi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

/// |sum_e exp(j (phase_e + k (u_inc + u_out) . r_e))|^2 / M^2
inline double array_factor_power(const RisPanel& panel, const PhaseProfile& profile, const Vec3& incident,
                                 const Vec3& outgoing) {
  const int rows = panel.rows();
  const int cols = panel.cols();
  if (profile.phases.size() != static_cast<std::size_t>(rows * cols)) {
    throw Error(ErrorCode::ConfigError, "phase profile length does not match panel size");
  }
  const Vec3 q = incident + outgoing;
  const double qu = kTwoPi * dot(q, panel.u_axis());
  const double qv = kTwoPi * dot(q, panel.v_axis());
  double re = 0.0;
  double im = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double row_term = qv * panel.v_coord(r);
    const double* ph = profile.phases.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      const double a = ph[c] + row_term + qu * panel.u_coord(c);
      re += std::cos(a);
      im += std::sin(a);
    }
  }
  const double m = static_cast<double>(rows) * cols;
  return (re * re + im * im) / (m * m);
}

/// Conjugate-phase beam steering: phase(r) = -k (u_inc . r + u_tgt . r) mod 2 pi.
/// `incident` points from the panel towards the source.
inline PhaseProfile steer_profile(const RisPanel& panel, const Vec3& incident, const Vec3& target) {
  if (!is_unit(incident) || !is_unit(target)) throw Error(ErrorCode::InvalidVector, "steer_profile expects unit vectors");
  if (!panel.in_front(target)) throw Error(ErrorCode::OutOfCoverage, "steering target behind panel");
  const Vec3 q = incident + target;
  const double qu = kTwoPi * dot(q, panel.u_axis());
  const double qv = kTwoPi * dot(q, panel.v_axis());
  PhaseProfile out;
  out.phases.reserve(static_cast<std::size_t>(panel.element_count()));
  for (int r = 0; r < panel.rows(); ++r) {
    for (int c = 0; c < panel.cols(); ++c) {
      out.phases.push_back(wrap_phase(-(qu * panel.u_coord(c) + qv * panel.v_coord(r))));
    }
  }
  return out;
}

/// I.i.d. uniform phases; no coherent main lobe for large panels.
inline PhaseProfile diffusion_profile(const RisPanel& panel, std::uint64_t seed) {
  Rng rng(seed);
  PhaseProfile out;
  out.phases.resize(static_cast<std::size_t>(panel.element_count()));
  for (auto& p : out.phases) p = wrap_phase(kTwoPi * rng.uniform());
  return out;
}

/// Cut plane spanned by the panel normal and an in-plane unit tangent.
/// Cut angle theta maps to cos(theta) n + sin(theta) t.
struct DiagramCut {
  Vec3 tangent;
};

enum class CutAxis { Rows, Cols };

/// Cut through `target` and the normal. For broadside targets the plane is
/// the one along `fallback` (the rows axis by default).
inline DiagramCut cut_through(const RisPanel& panel, const Vec3& target, CutAxis fallback = CutAxis::Rows) {
  const Vec3 t = target - panel.normal() * dot(target, panel.normal());
  if (norm(t) > 1e-9) return {normalized(t)};
  return {fallback == CutAxis::Rows ? panel.v_axis() : panel.u_axis()};
}

inline Vec3 cut_direction(const RisPanel& panel, const DiagramCut& cut, double theta_rad) {
  return panel.normal() * std::cos(theta_rad) + cut.tangent * std::sin(theta_rad);
}

inline double cut_angle_deg(const RisPanel& panel, const DiagramCut& cut, const Vec3& dir) {
  return rad_to_deg(std::atan2(dot(dir, cut.tangent), dot(dir, panel.normal())));
}

struct ScatteringDiagram {
  DiagramCut cut;
  double steer_angle_deg = 0.0;   // where the main lobe is expected
  double peak_power = 0.0;        // raw array-factor power at the sampled peak
  std::vector<double> angles_deg; // strictly increasing, uniform
  std::vector<double> values;     // normalized power, max 1
};

/// Samples the array-factor power on `cut` over [-range, range] degrees and
/// normalizes it to a peak of 1.
inline ScatteringDiagram scattering_diagram(const RisPanel& panel, const PhaseProfile& profile, const Vec3& incident,
                                            const DiagramCut& cut, double resolution_deg, double steer_angle_deg = 0.0,
                                            double range_deg = 180.0) {
  if (!(resolution_deg > 0.0) || !(range_deg > 0.0)) {
    throw Error(ErrorCode::ConfigError, "diagram resolution and range must be positive");
  }
  ScatteringDiagram d;
  d.cut = cut;
  d.steer_angle_deg = steer_angle_deg;
  const long half = std::lround(range_deg / resolution_deg);
  d.angles_deg.reserve(static_cast<std::size_t>(2 * half + 1));
  d.values.reserve(static_cast<std::size_t>(2 * half + 1));
  for (long i = -half; i <= half; ++i) {
    const double a = static_cast<double>(i) * resolution_deg;
    d.angles_deg.push_back(a);
    d.values.push_back(array_factor_power(panel, profile, incident, cut_direction(panel, cut, deg_to_rad(a))));
  }
  d.peak_power = *std::max_element(d.values.begin(), d.values.end());
  if (d.peak_power > 0.0) {
    for (auto& v : d.values) v /= d.peak_power;
  }
  return d;
}

/// Full width between the half-power crossings around the main lobe, with
/// linear interpolation between samples. Among equal maxima the one closest
/// to the expected steering angle is the main lobe.
inline double hpbw(const ScatteringDiagram& d) {
  const auto& v = d.values;
  const auto& a = d.angles_deg;
  if (v.size() < 3 || v.size() != a.size()) throw Error(ErrorCode::DegenerateDiagram, "diagram has too few samples");
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*hi - *lo <= 1e-12) throw Error(ErrorCode::DegenerateDiagram, "flat diagram has no main lobe");

  std::size_t peak = 0;
  double best_offset = 1e300;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] >= *hi - 1e-12) {
      const double off = std::abs(a[i] - d.steer_angle_deg);
      if (off < best_offset) {
        best_offset = off;
        peak = i;
      }
    }
  }
  const double half = 0.5 * *hi;
  auto crossing = [&](std::size_t inside, std::size_t outside) {
    const double t = (v[inside] - half) / (v[inside] - v[outside]);
    return a[inside] + t * (a[outside] - a[inside]);
  };

  std::optional<double> left;
  for (std::size_t i = peak; i > 0; --i) {
    if (v[i - 1] < half) {
      left = crossing(i, i - 1);
      break;
    }
  }
  std::optional<double> right;
  for (std::size_t i = peak; i + 1 < v.size(); ++i) {
    if (v[i + 1] < half) {
      right = crossing(i, i + 1);
      break;
    }
  }
  if (!left || !right) throw Error(ErrorCode::DiagramTooNarrowlySampled, "half-power crossing outside sampled range");
  return *right - *left;
}

/// Broadside half-power beamwidth of a panel: the narrower of the two
/// principal cuts.
inline double panel_hpbw_deg(const RisPanel& panel, double resolution_deg = 0.01) {
  const Vec3 n = panel.normal();
  const PhaseProfile profile = steer_profile(panel, n, n);
  double best = 1e300;
  for (CutAxis axis : {CutAxis::Rows, CutAxis::Cols}) {
    const DiagramCut cut = cut_through(panel, n, axis);
    best = std::min(best, hpbw(scattering_diagram(panel, profile, n, cut, resolution_deg, 0.0, 90.0)));
  }
  return best;
}

/// Tolerated lateral error keeping a UE inside the half-power beam:
/// tan(theta / 2) * distance.
inline double tolerated_error(double theta_deg, double distance_m) {
  if (!(theta_deg > 0.0) || !(theta_deg < 180.0)) throw Error(ErrorCode::InvalidAngle, "beamwidth must be in (0, 180) degrees");
  if (!(distance_m >= 0.0)) throw Error(ErrorCode::DegenerateGeometry, "distance must be >= 0");
  return std::tan(deg_to_rad(theta_deg) / 2.0) * distance_m;
}

/// Normalized power the profile delivers towards `point`. Zero behind the
/// panel. `peak_power` is the raw array-factor peak of the profile, exactly 1
/// for conjugate steering profiles.
inline double beam_gain_at(const RisPanel& panel, const PhaseProfile& profile, const Vec3& incident, const Vec3& point,
                           double peak_power = 1.0) {
  const Vec3 w = point - panel.center();
  if (!(norm(w) > 1e-12)) throw Error(ErrorCode::DegenerateGeometry, "point coincides with panel centre");
  const Vec3 dir = normalized(w);
  if (!panel.in_front(dir)) return 0.0;
  return std::clamp(array_factor_power(panel, profile, incident, dir) / peak_power, 0.0, 1.0);
}

/// Largest raw array-factor power over a front-hemisphere azimuth/elevation
/// scan with step `step_deg`.
inline double profile_peak_power(const RisPanel& panel, const PhaseProfile& profile, const Vec3& incident,
                                 double step_deg = 2.0) {
  double best = 0.0;
  const long n = static_cast<long>(std::floor(89.0 / step_deg));
  for (long i = -n; i <= n; ++i) {
    for (long j = -n; j <= n; ++j) {
      const Vec3 dir = panel.direction(deg_to_rad(i * step_deg), deg_to_rad(j * step_deg));
      best = std::max(best, array_factor_power(panel, profile, incident, dir));
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Codebooks

enum class Functionality { Beamsteer, Diffusion };

inline std::string_view to_string(Functionality f) { return f == Functionality::Beamsteer ? "beamsteer" : "diffusion"; }

struct CodebookEntry {
  Functionality functionality = Functionality::Beamsteer;
  double azimuth = 0.0;    // rad, panel frame
  double elevation = 0.0;  // rad, panel frame
  Vec3 direction;          // world frame, unit
  PhaseProfile profile;
  double peak_power = 1.0;
};

/// Angular grid in degrees; each axis yields floor((max - min) / step) + 1
/// values starting at min.
struct CodebookGrid {
  double az_min_deg = -60.0;
  double az_max_deg = 60.0;
  double az_step_deg = 5.0;
  double el_min_deg = 0.0;
  double el_max_deg = 0.0;
  double el_step_deg = 5.0;

  static std::vector<double> axis(double lo, double hi, double step) {
    std::vector<double> out;
    if (!(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi)) return out;
    if (hi == lo) return {lo};
    if (!(step > 0.0)) return out;
    const long n = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (long i = 0; i < n; ++i) out.push_back(lo + static_cast<double>(i) * step);
    return out;
  }
  std::vector<double> azimuths() const { return axis(az_min_deg, az_max_deg, az_step_deg); }
  std::vector<double> elevations() const { return axis(el_min_deg, el_max_deg, el_step_deg); }

  CodebookGrid with_step(double step_deg) const {
    CodebookGrid g = *this;
    g.az_step_deg = step_deg;
    g.el_step_deg = step_deg;
    return g;
  }

  friend bool operator==(const CodebookGrid&, const CodebookGrid&) = default;
};

class Codebook {
 public:
  Codebook() = default;
  explicit Codebook(std::vector<CodebookEntry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw Error(ErrorCode::EmptyCodebook, "codebook has no entries");
  }

  const std::vector<CodebookEntry>& entries() const noexcept { return entries_; }
  const CodebookEntry& at(std::size_t i) const { return entries_.at(i); }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t beamsteer_count() const {
    return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [](const CodebookEntry& e) {
      return e.functionality == Functionality::Beamsteer;
    }));
  }

 private:
  std::vector<CodebookEntry> entries_;
};

/// One beamsteer entry per grid direction (azimuth outer, elevation inner),
/// followed by a single diffusion entry.
inline Codebook codebook_build(const RisPanel& panel, const Vec3& incident, const CodebookGrid& grid,
                               std::uint64_t diffusion_seed = 0) {
  const auto az = grid.azimuths();
  const auto el = grid.elevations();
  if (az.empty() || el.empty()) throw Error(ErrorCode::EmptyCodebook, "codebook grid is empty");
  std::vector<CodebookEntry> entries;
  entries.reserve(az.size() * el.size() + 1);
  for (double a : az) {
    for (double e : el) {
      if (std::abs(a) >= 90.0 || std::abs(e) >= 90.0) {
        throw Error(ErrorCode::OutOfCoverage, "codebook grid direction outside front half-space");
      }
      CodebookEntry entry;
      entry.functionality = Functionality::Beamsteer;
      entry.azimuth = deg_to_rad(a);
      entry.elevation = deg_to_rad(e);
      entry.direction = normalized(panel.direction(entry.azimuth, entry.elevation));
      entry.profile = steer_profile(panel, incident, entry.direction);
      entry.peak_power = 1.0;
      entries.push_back(std::move(entry));
    }
  }
  CodebookEntry diffuse;
  diffuse.functionality = Functionality::Diffusion;
  diffuse.direction = panel.normal();
  diffuse.profile = diffusion_profile(panel, diffusion_seed);
  diffuse.peak_power = profile_peak_power(panel, diffuse.profile, incident);
  entries.push_back(std::move(diffuse));
  return Codebook(std::move(entries));
}

/// Beamsteer: entry whose direction is angularly closest to the panel ->
/// estimate direction, lowest index on ties. Diffusion: the diffusion entry.
inline std::size_t codebook_select(const Codebook& codebook, const Vec3& position_estimate, const RisPanel& panel,
                                   Functionality service) {
  const auto& entries = codebook.entries();
  if (service == Functionality::Diffusion) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].functionality == Functionality::Diffusion) return i;
    }
    throw Error(ErrorCode::EmptyCodebook, "codebook has no diffusion entry");
  }
  const Vec3 w = position_estimate - panel.center();
  if (!(norm(w) > 1e-12)) throw Error(ErrorCode::DegenerateGeometry, "estimate coincides with panel centre");
  const Vec3 dir = normalized(w);
  if (!panel.in_front(dir)) throw Error(ErrorCode::OutOfCoverage, "position estimate behind panel");
  constexpr double tie_tol = 1e-12;
  std::optional<std::size_t> best;
  double best_angle = 1e300;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].functionality != service) continue;
    const double ang = angle_between(entries[i].direction, dir);
    if (ang < best_angle - tie_tol) {
      best_angle = ang;
      best = i;
    }
  }
  if (!best) throw Error(ErrorCode::EmptyCodebook, "codebook has no entry for the requested functionality");
  return *best;
}

}  // namespace pwe
