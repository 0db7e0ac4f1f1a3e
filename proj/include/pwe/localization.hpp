#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pwe/error.hpp"
#include "pwe/geometry.hpp"
#include "pwe/optical_channel.hpp"
#include "pwe/random.hpp"
#include "pwe/ris.hpp"

namespace pwe {

enum class Method { Rss, RssAoa, BeamScan };

constexpr std::string_view to_string(Method m) {
  switch (m) {
    case Method::Rss: return "rss";
    case Method::RssAoa: return "rss_aoa";
    case Method::BeamScan: return "beam_scan";
  }
  return "unknown";
}

struct LocalizationEstimate {
  Vec3 position;
  Method method = Method::Rss;
  double residual = 0.0;  // sum of squared model misfits; W^2 for the optical methods
  std::vector<int> anchors_used;
  int iterations = 0;
  bool grid_fallback = false;
};

enum class InitStrategy { Linearized, Grid };

struct SolverOptions {
  int max_iterations = 100;
  double tolerance = 1e-9;        // m, step-size convergence
  double cost_tolerance = 1e-8;   // relative cost decrease that counts as converged
  double initial_damping = 1e-3;
  double damping_increase = 10.0;
  double damping_decrease = 0.1;
  double max_damping = 1e12;
  InitStrategy init = InitStrategy::Linearized;
  double grid_step = 0.5;            // m
  int grid_starts = 3;               // best grid cells refined by the solver
  double residual_tolerance = 0.05;  // RMS misfit relative to the strongest reading
  std::optional<Box> search_region;  // grid-search bounds; anchor bounding box + 3 m if unset
};

// ---------------------------------------------------------------------------
// Top-4 selection

namespace detail {

/// Per-anchor maximum LoS RSS over photodetectors, for detectable samples.
inline std::map<int, double> anchor_peak_rss(std::span<const ChannelSample> samples, double threshold) {
  std::map<int, double> peak;
  for (const auto& s : samples) {
    if (!s.los || !(s.rss > 0.0) || s.rss < threshold) continue;
    auto [it, fresh] = peak.try_emplace(s.anchor_id, s.rss);
    if (!fresh) it->second = std::max(it->second, s.rss);
  }
  return peak;
}

}  // namespace detail

/// The four anchors with the highest per-anchor peak RSS; ties go to the
/// lower id.
inline std::array<int, 4> select_top4(std::span<const ChannelSample> samples, double detection_threshold = 0.0) {
  const auto peak = detail::anchor_peak_rss(samples, detection_threshold);
  if (peak.size() < 4) {
    throw Error(ErrorCode::InsufficientAnchors,
                "need 4 LoS anchors for RSS trilateration, have " + std::to_string(peak.size()));
  }
  std::vector<std::pair<int, double>> ranked(peak.begin(), peak.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return {ranked[0].first, ranked[1].first, ranked[2].first, ranked[3].first};
}

// ---------------------------------------------------------------------------
// RSS trilateration

namespace detail {

struct Observation {
  const OpticalAnchor* anchor;
  std::size_t pd;
  double rss;
};

class RssProblem {
 public:
  RssProblem(std::vector<Observation> obs, const PdArray& array) : obs_(std::move(obs)), array_(&array) {
    double peak = 0.0;
    for (const auto& o : obs_) peak = std::max(peak, o.rss);
    scale_ = 1.0 / peak;
  }

  const std::vector<Observation>& observations() const { return obs_; }
  const PdArray& array() const { return *array_; }
  double scale() const { return scale_; }

  /// Scaled sum of squared residuals with the array origin at `p`.
  double cost(const Vec3& p) const {
    double c = 0.0;
    for (const auto& o : obs_) {
      const double r = (o.rss - los_power(*o.anchor, array_->world_at(o.pd, p))) * scale_;
      c += r * r;
    }
    return c;
  }

  /// Fills J^T J and J^T r of the scaled residuals; returns the scaled cost.
  double normal_equations(const Vec3& p, Eigen::Matrix3d& jtj, Eigen::Vector3d& jtr) const {
    jtj.setZero();
    jtr.setZero();
    double c = 0.0;
    for (const auto& o : obs_) {
      const PdWorld pd = array_->world_at(o.pd, p);
      const double r = (o.rss - los_power(*o.anchor, pd)) * scale_;
      const Vec3 g = los_gain_gradient(*o.anchor, pd) * (o.anchor->tx_power * scale_);
      const Eigen::Vector3d j(g.x, g.y, g.z);
      jtj += j * j.transpose();
      jtr += j * r;
      c += r * r;
    }
    return c;
  }

  /// Every observation still predicts light at `p`.
  bool consistent(const Vec3& p) const {
    return std::all_of(obs_.begin(), obs_.end(),
                       [&](const Observation& o) { return los_gain(*o.anchor, array_->world_at(o.pd, p)) > 0.0; });
  }

  double relative_rms(double cost) const { return std::sqrt(cost / static_cast<double>(obs_.size())); }

 private:
  std::vector<Observation> obs_;
  const PdArray* array_;
  double scale_ = 1.0;
};

struct SolveResult {
  Vec3 position;
  double cost = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// Levenberg-Marquardt on the scaled RSS residuals.
inline SolveResult damped_gauss_newton(const RssProblem& problem, Vec3 p, const SolverOptions& opts) {
  double lambda = opts.initial_damping;
  Eigen::Matrix3d jtj;
  Eigen::Vector3d jtr;
  double cost = problem.normal_equations(p, jtj, jtr);
  SolveResult out{p, cost, 0, false};
  if (!std::isfinite(cost)) return out;
  for (int it = 1; it <= opts.max_iterations && !out.converged; ++it) {
    out.iterations = it;
    if (cost == 0.0) {
      out.converged = true;
      break;
    }
    while (true) {
      Eigen::Matrix3d a = jtj;
      for (int k = 0; k < 3; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-30);
      const Eigen::Vector3d step = a.ldlt().solve(jtr);
      const Vec3 delta{step(0), step(1), step(2)};
      const Vec3 trial = p + delta;
      const double trial_cost = problem.cost(trial);
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        const double drop = cost - trial_cost;
        p = trial;
        lambda = std::max(lambda * opts.damping_decrease, 1e-15);
        const double before = cost;
        cost = problem.normal_equations(p, jtj, jtr);
        if (norm(delta) < opts.tolerance || drop <= opts.cost_tolerance * before) out.converged = true;
        break;
      }
      lambda *= opts.damping_increase;
      if (lambda > opts.max_damping) {
        // no descent direction left: stationary point
        out.converged = true;
        break;
      }
    }
  }
  out.position = p;
  out.cost = cost;
  return out;
}

inline double lambertian_constant(const OpticalAnchor& a, const Photodetector& e) {
  const double m = a.lambertian_order;
  return (m + 1.0) * e.area * e.optical_gain * a.tx_power / (2.0 * std::numbers::pi);
}

/// Inverts the aligned-geometry law P = C h^(m+1) / d^(m+3) for each anchor
/// and solves the sphere-difference equations by linear least squares. The
/// height h along the anchor normal depends on the position, so the two steps
/// alternate a few times.
inline Vec3 linearized_init(const RssProblem& problem, std::span<const OpticalAnchor* const> anchors) {
  const auto& obs = problem.observations();
  const auto& elems = problem.array().elements();
  std::vector<const Observation*> strongest;
  for (const OpticalAnchor* a : anchors) {
    const Observation* best = nullptr;
    for (const auto& o : obs) {
      if (o.anchor == a && (!best || o.rss > best->rss)) best = &o;
    }
    if (best) strongest.push_back(best);
  }
  const Observation* top = strongest.front();
  for (const Observation* o : strongest) {
    if (o->rss > top->rss) top = o;
  }
  Vec3 p = top->anchor->position +
           top->anchor->normal * std::sqrt(lambertian_constant(*top->anchor, elems[top->pd]) / top->rss);
  if (strongest.size() < 3) return p;

  const std::size_t n = strongest.size();
  std::vector<double> d(n);
  for (int pass = 0; pass < 8; ++pass) {
    for (std::size_t i = 0; i < n; ++i) {
      const Observation& o = *strongest[i];
      const double m = o.anchor->lambertian_order;
      const double h = std::max(dot(o.anchor->normal, p - o.anchor->position), 1e-3);
      d[i] = std::max(h, std::pow(lambertian_constant(*o.anchor, elems[o.pd]) * std::pow(h, m + 1.0) / o.rss,
                                  1.0 / (m + 3.0)));
    }
    const Vec3& a0 = strongest[0]->anchor->position;
    Eigen::MatrixXd A(static_cast<Eigen::Index>(n - 1), 3);
    Eigen::VectorXd b(static_cast<Eigen::Index>(n - 1));
    for (std::size_t i = 1; i < n; ++i) {
      const Vec3& ai = strongest[i]->anchor->position;
      const auto row = static_cast<Eigen::Index>(i - 1);
      A(row, 0) = 2.0 * (ai.x - a0.x);
      A(row, 1) = 2.0 * (ai.y - a0.y);
      A(row, 2) = 2.0 * (ai.z - a0.z);
      b(row) = d[0] * d[0] - d[i] * d[i] + dot(ai, ai) - dot(a0, a0);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || !(sv(0) > 0.0)) break;
    int rank = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) rank += sv(k) > 1e-9 * sv(0) ? 1 : 0;
    if (rank < 2) break;
    // Minimum-norm correction about the current point.
    const Eigen::Vector3d p_cur(p.x, p.y, p.z);
    svd.setThreshold(1e-9);
    const Eigen::Vector3d dp = svd.solve(b - A * p_cur);
    Vec3 next{p_cur(0) + dp(0), p_cur(1) + dp(1), p_cur(2) + dp(2)};
    if (rank == 2) {
      // Coplanar anchors: place the point along the unobservable direction
      // using the sphere equations, on the lit side of the anchors.
      const Eigen::Vector3d zv = svd.matrixV().col(2);
      const Vec3 z{zv(0), zv(1), zv(2)};
      double t_sum = 0.0;
      int t_count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const OpticalAnchor& a = *strongest[i]->anchor;
        const Vec3 w = next - a.position;
        const double bq = dot(z, w);
        const double disc = bq * bq - (dot(w, w) - d[i] * d[i]);
        if (disc < 0.0) continue;
        const double r = std::sqrt(disc);
        std::optional<double> pick;
        for (double t : {-bq - r, -bq + r}) {
          if (dot(a.normal, next + z * t - a.position) > 0.0 && (!pick || std::abs(t) < std::abs(*pick))) pick = t;
        }
        if (pick) {
          t_sum += *pick;
          ++t_count;
        }
      }
      next += z * (t_count > 0 ? t_sum / t_count : dot(z, p - next));
    }
    if (!std::isfinite(next.x) || !std::isfinite(next.y) || !std::isfinite(next.z)) break;
    p = next;
  }
  return p;
}

/// The `count` lowest-cost points of a regular grid over `region`, best first.
inline std::vector<Vec3> grid_starts(const RssProblem& problem, const Box& region, double step, int count) {
  std::vector<std::pair<double, Vec3>> scored;
  const auto cells = [&](double lo, double hi) { return static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1; };
  const int nx = cells(region.min.x, region.max.x);
  const int ny = cells(region.min.y, region.max.y);
  const int nz = cells(region.min.z, region.max.z);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      for (int k = 0; k < nz; ++k) {
        const Vec3 p{region.min.x + i * step, region.min.y + j * step, region.min.z + k * step};
        bool degenerate = false;
        for (const auto& o : problem.observations()) {
          if (distance(p, o.anchor->position) < 1e-6) degenerate = true;
        }
        if (degenerate) continue;
        const double c = problem.cost(p);
        if (std::isfinite(c)) scored.emplace_back(c, p);
      }
    }
  }
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(std::max(count, 1)), scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back(scored[i].second);
  if (out.empty()) out.push_back(region.center());
  return out;
}

}  // namespace detail

/// RSS trilateration over the four strongest anchors. Uses every detectable
/// LoS photodetector reading of those anchors with the receiver orientation
/// taken from `array.pose()` (its position is ignored).
inline LocalizationEstimate rss_trilaterate(std::span<const ChannelSample> samples,
                                            std::span<const OpticalAnchor> anchors, const PdArray& array,
                                            const SolverOptions& opts = {}, double detection_threshold = 0.0) {
  if (!(opts.tolerance > 0.0)) throw Error(ErrorCode::ConfigError, "solver tolerance must be > 0");
  const auto top = select_top4(samples, detection_threshold);
  std::vector<const OpticalAnchor*> chosen;
  for (int id : top) {
    const auto it = std::find_if(anchors.begin(), anchors.end(), [&](const OpticalAnchor& a) { return a.id == id; });
    if (it == anchors.end()) throw Error(ErrorCode::ConfigError, "sample references unknown anchor " + std::to_string(id));
    chosen.push_back(&*it);
  }
  std::vector<detail::Observation> obs;
  for (const auto& s : samples) {
    if (!s.los || !(s.rss > 0.0) || s.rss < detection_threshold) continue;
    for (const OpticalAnchor* a : chosen) {
      if (a->id == s.anchor_id) obs.push_back({a, static_cast<std::size_t>(s.pd_index), s.rss});
    }
  }
  const detail::RssProblem problem(std::move(obs), array);

  Box region;
  if (opts.search_region) {
    region = *opts.search_region;
  } else {
    region = {chosen[0]->position, chosen[0]->position};
    for (const OpticalAnchor* a : chosen) {
      region.min = {std::min(region.min.x, a->position.x), std::min(region.min.y, a->position.y),
                    std::min(region.min.z, a->position.z)};
      region.max = {std::max(region.max.x, a->position.x), std::max(region.max.y, a->position.y),
                    std::max(region.max.z, a->position.z)};
    }
    region.min -= Vec3{3, 3, 3};
    region.max += Vec3{3, 3, 3};
  }

  auto acceptable = [&](const detail::SolveResult& r) {
    return std::isfinite(r.cost) && r.converged && problem.consistent(r.position) &&
           problem.relative_rms(r.cost) <= opts.residual_tolerance;
  };

  detail::SolveResult result;
  auto try_grid = [&] {
    for (const Vec3& start : detail::grid_starts(problem, region, opts.grid_step, opts.grid_starts)) {
      const auto alt = detail::damped_gauss_newton(problem, start, opts);
      if (!std::isfinite(result.cost) || alt.cost < result.cost) result = alt;
    }
  };
  bool fallback = false;
  if (opts.init == InitStrategy::Linearized) {
    result = detail::damped_gauss_newton(problem, detail::linearized_init(problem, chosen), opts);
    if (!acceptable(result)) {
      fallback = true;
      try_grid();
    }
  } else {
    fallback = true;
    try_grid();
  }
  if (!std::isfinite(result.cost) ||
      (!result.converged && problem.relative_rms(result.cost) > opts.residual_tolerance)) {
    throw Error(ErrorCode::NonConvergence, "RSS trilateration did not converge");
  }
  const double s = problem.scale();
  return {result.position, Method::Rss, result.cost / (s * s), {top.begin(), top.end()}, result.iterations, fallback};
}

// ---------------------------------------------------------------------------
// Angle of arrival and hybrid RSS/AoA

namespace detail {

struct LitPd {
  std::size_t index;
  double rss;
};

inline std::vector<LitPd> lit_pds(std::span<const ChannelSample> samples, int anchor_id, std::size_t n_pds,
                                  double threshold) {
  std::vector<LitPd> lit;
  for (const auto& s : samples) {
    if (s.anchor_id != anchor_id || !s.los || !(s.rss > 0.0) || s.rss < threshold) continue;
    if (s.pd_index < 0 || static_cast<std::size_t>(s.pd_index) >= n_pds) {
      throw Error(ErrorCode::InvalidMeasurement, "sample photodetector index out of range");
    }
    lit.push_back({static_cast<std::size_t>(s.pd_index), s.rss});
  }
  return lit;
}

}  // namespace detail

/// Receiver-to-anchor unit direction in the world frame. Solves
/// r_i = (n_i . v) A_i G_i for v = c u by linear least squares over the lit
/// photodetectors (treated as co-located) and normalizes.
inline Vec3 aoa_direction(std::span<const ChannelSample> samples, int anchor_id, const PdArray& array,
                          double detection_threshold = 0.0) {
  const auto lit = detail::lit_pds(samples, anchor_id, array.size(), detection_threshold);
  if (lit.size() < 3) {
    throw Error(ErrorCode::InsufficientPds, "AoA needs 3 illuminated photodetectors, have " + std::to_string(lit.size()));
  }
  Eigen::MatrixXd A(static_cast<Eigen::Index>(lit.size()), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(lit.size()));
  for (std::size_t i = 0; i < lit.size(); ++i) {
    const auto& e = array.elements()[lit[i].index];
    const double w = e.area * e.optical_gain;
    const auto row = static_cast<Eigen::Index>(i);
    A(row, 0) = e.normal.x * w;
    A(row, 1) = e.normal.y * w;
    A(row, 2) = e.normal.z * w;
    b(row) = lit[i].rss;
  }
  // Column scaling keeps the rank test independent of the area units.
  const double col_scale = A.cwiseAbs().maxCoeff();
  A /= col_scale;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 3 || !(sv(2) > 1e-9 * sv(0))) {
    throw Error(ErrorCode::DegeneratePdGeometry, "illuminated photodetector normals do not span 3D");
  }
  const Eigen::Vector3d v = svd.solve(b);
  const Vec3 body{v(0), v(1), v(2)};
  if (!(norm(body) > 0.0)) throw Error(ErrorCode::InvalidMeasurement, "AoA solution is zero");
  return normalized(array.pose().to_world_dir(normalized(body)));
}

/// Single-anchor position fix: direction from `aoa_direction`, range from the
/// strongest photodetector through the Lambertian law.
inline LocalizationEstimate hybrid_rss_aoa(std::span<const ChannelSample> samples, const OpticalAnchor& anchor,
                                           const PdArray& array, double detection_threshold = 0.0) {
  const auto lit = detail::lit_pds(samples, anchor.id, array.size(), detection_threshold);
  if (lit.empty()) throw Error(ErrorCode::InvalidMeasurement, "no positive LoS reading from anchor " + std::to_string(anchor.id));
  const Vec3 u = aoa_direction(samples, anchor.id, array, detection_threshold);
  const auto strongest = *std::max_element(lit.begin(), lit.end(), [](const auto& a, const auto& b) { return a.rss < b.rss; });
  const Photodetector& e = array.elements()[strongest.index];
  const Vec3 n_pd = array.pose().to_world_dir(e.normal);
  const double cos_psi = dot(u, n_pd);
  const double cos_phi = -dot(u, anchor.normal);
  if (!(cos_psi > 0.0) || !(cos_phi > 0.0)) {
    throw Error(ErrorCode::InvalidMeasurement, "estimated arrival direction outside emitter or detector hemisphere");
  }
  const double m = anchor.lambertian_order;
  const double d =
      std::sqrt(detail::lambertian_constant(anchor, e) * std::pow(cos_phi, m) * cos_psi / strongest.rss);
  const Vec3 pd_position = anchor.position - u * d;
  const Vec3 origin = pd_position - array.pose().to_world_dir(e.offset);

  double residual = 0.0;
  for (const auto& l : lit) {
    const double r = l.rss - los_power(anchor, array.world_at(l.index, origin));
    residual += r * r;
  }
  return {origin, Method::RssAoa, residual, {anchor.id}, 0, false};
}

// ---------------------------------------------------------------------------
// Beam-scanning baseline

struct BeamScanOptions {
  int dwell_count = 1;               // dwell periods per beam
  double dwell_ms = 1.0;
  double detection_threshold = 1e-3; // normalized beam power
  double noise_std = 0.0;            // normalized beam power
};

struct BeamScanResult {
  LocalizationEstimate estimate;
  std::size_t best_entry = 0;
  double best_gain = 0.0;
  double latency_ms = 0.0;
};

/// Sweeps every beamsteer entry; the receiver keeps the strongest beam and
/// intersects its ray with the known receiver height plane.
inline BeamScanResult beam_scan_localize(const Room& room, const RisPanel& panel, const Codebook& codebook,
                                         const Vec3& incident, const Vec3& ue_position, const BeamScanOptions& opts,
                                         Rng* rng = nullptr) {
  const bool blocked = segment_occluded(panel.center(), ue_position, room);
  BeamScanResult out;
  std::optional<std::size_t> best;
  double best_gain = -std::numeric_limits<double>::infinity();
  std::size_t swept = 0;
  for (std::size_t i = 0; i < codebook.size(); ++i) {
    const auto& entry = codebook.at(i);
    if (entry.functionality != Functionality::Beamsteer) continue;
    ++swept;
    double g = blocked ? 0.0 : beam_gain_at(panel, entry.profile, incident, ue_position, entry.peak_power);
    if (rng && opts.noise_std > 0.0) g += opts.noise_std * rng->normal();
    if (g > best_gain) {
      best_gain = g;
      best = i;
    }
  }
  out.latency_ms = static_cast<double>(swept) * opts.dwell_count * opts.dwell_ms;
  if (!best || !(best_gain > opts.detection_threshold)) {
    throw Error(ErrorCode::ScanFailed, "no beam exceeded the detection threshold");
  }
  const Vec3& dir = codebook.at(*best).direction;
  if (std::abs(dir.z) < 1e-9) throw Error(ErrorCode::ScanFailed, "strongest beam is parallel to the receiver plane");
  const double t = (ue_position.z - panel.center().z) / dir.z;
  if (!(t > 0.0)) throw Error(ErrorCode::ScanFailed, "strongest beam does not reach the receiver plane");
  out.best_entry = *best;
  out.best_gain = best_gain;
  out.estimate = {panel.center() + dir * t, Method::BeamScan, (1.0 - best_gain) * (1.0 - best_gain), {panel.id()}, 0,
                  false};
  return out;
}

}  // namespace pwe
