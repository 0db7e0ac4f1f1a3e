#pragma once

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pwe/error.hpp"
#include "pwe/latc.hpp"
#include "pwe/localization.hpp"
#include "pwe/random.hpp"
#include "pwe/ris.hpp"
#include "pwe/scenario.hpp"

namespace pwe {

inline constexpr std::string_view kVersion = "0.1.0";

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
};

/// Ten significant digits; "inf" and "nan" spelled out.
inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{:.10g}", x);
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stream tags keep the per-experiment random streams disjoint.
namespace stream {
inline constexpr std::uint64_t kPosition = 1;
inline constexpr std::uint64_t kChannel = 2;
inline constexpr std::uint64_t kInbeamPosition = 3;
inline constexpr std::uint64_t kInbeamChannel = 4;
inline constexpr std::uint64_t kLatcRun = 5;
}  // namespace stream

inline Vec3 sample_in(const Box& region, Rng& rng) {
  return {rng.uniform(region.min.x, region.max.x), rng.uniform(region.min.y, region.max.y),
          rng.uniform(region.min.z, region.max.z)};
}

/// Linear interpolation between order statistics; `sorted` must be ascending.
inline double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::string size_label(const PanelSize& s) { return fmt::format("{}x{}", s.first, s.second); }

/// Column suffix per panel size: M, plus the shape when two sizes share M.
inline std::vector<std::string> size_columns(const std::vector<PanelSize>& sizes) {
  std::map<int, int> count;
  for (const auto& s : sizes) ++count[s.first * s.second];
  std::vector<std::string> out;
  for (const auto& s : sizes) {
    const int m = s.first * s.second;
    out.push_back(count[m] > 1 ? fmt::format("M_{}_{}", m, size_label(s)) : fmt::format("M_{}", m));
  }
  return out;
}

/// Panel used for the pattern studies: centred at the origin, facing +z,
/// rows along y.
inline RisPanel study_panel(const PanelSize& s) { return RisPanel(0, {0, 0, 0}, {0, 0, 1}, {0, 1, 0}, s.first, s.second); }

/// Broadside HPBW on the default (rows-axis) cut; NaN when the pattern is flat.
inline double broadside_hpbw_deg(const RisPanel& panel, double resolution_deg) {
  const Vec3 n = panel.normal();
  try {
    return hpbw(scattering_diagram(panel, steer_profile(panel, n, n), n, cut_through(panel, n), resolution_deg, 0.0, 90.0));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegenerateDiagram) return std::numeric_limits<double>::quiet_NaN();
    throw;
  }
}

// ---------------------------------------------------------------------------
// Scattering diagrams

struct ScatteringResult {
  std::vector<PanelSize> sizes;
  std::vector<double> angles_deg;
  std::vector<std::vector<double>> columns;  // one normalized diagram per size
  std::vector<double> hpbw_deg;              // NaN for a flat diagram

  CsvTable diagram_table() const {
    CsvTable t;
    t.header = {"angle_deg"};
    for (const auto& c : size_columns(sizes)) t.header.push_back(c);
    for (std::size_t i = 0; i < angles_deg.size(); ++i) {
      std::vector<std::string> row{fmt::format("{:.4f}", angles_deg[i])};
      for (const auto& col : columns) row.push_back(num(col[i]));
      t.rows.push_back(std::move(row));
    }
    return t;
  }

  CsvTable hpbw_table() const {
    CsvTable t;
    t.header = {"M", "rows", "cols", "hpbw_deg"};
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      t.rows.push_back({std::to_string(sizes[i].first * sizes[i].second), std::to_string(sizes[i].first),
                        std::to_string(sizes[i].second), num(hpbw_deg[i])});
    }
    return t;
  }
};

inline ScatteringResult exp_scattering(const Scenario& s) {
  const auto& cfg = s.scattering;
  if (cfg.sizes.empty()) throw Error(ErrorCode::ConfigError, "scattering needs at least one panel size");
  ScatteringResult out;
  out.sizes = cfg.sizes;
  for (const auto& size : cfg.sizes) {
    const RisPanel panel = study_panel(size);
    const Vec3 n = panel.normal();
    const auto d = scattering_diagram(panel, steer_profile(panel, n, n), n, cut_through(panel, n), cfg.resolution_deg,
                                      0.0, cfg.range_deg);
    if (out.angles_deg.empty()) out.angles_deg = d.angles_deg;
    out.columns.push_back(d.values);
    double w = std::numeric_limits<double>::quiet_NaN();
    try {
      w = hpbw(d);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateDiagram && e.code() != ErrorCode::DiagramTooNarrowlySampled) throw;
    }
    out.hpbw_deg.push_back(w);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tolerated error

struct ToleratedErrorResult {
  std::vector<PanelSize> sizes;
  std::vector<double> hpbw_deg;
  std::vector<double> distances_m;
  std::vector<std::vector<double>> sigma_p_m;  // [size][distance]

  CsvTable table() const {
    CsvTable t;
    t.header = {"distance_m"};
    for (const auto& c : size_columns(sizes)) t.header.push_back("sigma_p_cm_" + c);
    for (std::size_t j = 0; j < distances_m.size(); ++j) {
      std::vector<std::string> row{num(distances_m[j])};
      for (const auto& col : sigma_p_m) row.push_back(num(100.0 * col[j]));
      t.rows.push_back(std::move(row));
    }
    return t;
  }
};

inline std::vector<double> distance_grid(const ToleratedErrorConfig& c) {
  std::vector<double> d;
  const long n = static_cast<long>(std::floor((c.distance_max_m - c.distance_min_m) / c.distance_step_m + 1e-9));
  for (long i = 0; i <= n; ++i) d.push_back(c.distance_min_m + static_cast<double>(i) * c.distance_step_m);
  return d;
}

inline ToleratedErrorResult exp_tolerated_error(const Scenario& s, double hpbw_resolution_deg = 0.01) {
  const auto& cfg = s.tolerated_error;
  if (!(cfg.distance_min_m > 0.0) || cfg.distance_max_m > 14.0 || cfg.distance_min_m > cfg.distance_max_m) {
    throw Error(ErrorCode::ConfigError, "tolerated-error distances must satisfy 0 < min <= max <= 14 m");
  }
  ToleratedErrorResult out;
  out.sizes = cfg.sizes;
  out.distances_m = distance_grid(cfg);
  for (const auto& size : cfg.sizes) {
    const double theta = broadside_hpbw_deg(study_panel(size), hpbw_resolution_deg);
    if (std::isnan(theta)) throw Error(ErrorCode::DegenerateDiagram, "panel " + size_label(size) + " has no main lobe");
    out.hpbw_deg.push_back(theta);
    std::vector<double> col;
    for (double d : out.distances_m) col.push_back(tolerated_error(theta, d));
    out.sigma_p_m.push_back(std::move(col));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Localization error versus K

struct ErrorVsKRow {
  double k = 0.0;
  double m = 0.0;
  double mean_cm = 0.0;
  double median_cm = 0.0;
  double p95_cm = 0.0;
  int trials = 0;
  int failures = 0;
};

struct ErrorVsKResult {
  std::vector<ErrorVsKRow> rows;  // m outer, K inner, in configuration order

  const ErrorVsKRow& at(double k, double m) const {
    for (const auto& r : rows) {
      if (r.m == m && (r.k == k || (std::isinf(r.k) && std::isinf(k)))) return r;
    }
    throw Error(ErrorCode::ConfigError, "no error-vs-K row for this (K, m)");
  }

  CsvTable table() const {
    CsvTable t;
    t.header = {"K", "m", "mean_cm", "median_cm", "p95_cm", "trials", "failures"};
    for (const auto& r : rows) {
      t.rows.push_back({num(r.k), num(r.m), num(r.mean_cm), num(r.median_cm), num(r.p95_cm), std::to_string(r.trials),
                        std::to_string(r.failures)});
    }
    return t;
  }
};

/// Anchors the error-vs-K study uses: the configured list, or the ceiling set.
inline std::vector<OpticalAnchor> study_anchors(const Scenario& s) {
  const auto all = s.all_anchors();
  if (s.error_vs_k.anchors.empty()) return s.anchors;
  std::vector<OpticalAnchor> out;
  for (int id : s.error_vs_k.anchors) {
    const auto it = std::find_if(all.begin(), all.end(), [&](const OpticalAnchor& a) { return a.id == id; });
    if (it == all.end()) throw Error(ErrorCode::ConfigError, "error_vs_k references unknown anchor " + std::to_string(id));
    out.push_back(*it);
  }
  return out;
}

/// Monte Carlo RSS trilateration. Trial t uses the same UE position and the
/// same channel draws for every K and m, so curves are paired. K = inf means
/// an ideal channel: no multipath and no receiver noise.
inline ErrorVsKResult exp_error_vs_k(const Scenario& s) {
  const auto& cfg = s.error_vs_k;
  if (cfg.trials < 1) throw Error(ErrorCode::ConfigError, "error_vs_k trials must be >= 1");
  const Room room = s.make_room(true);
  SolverOptions solver = s.options.solver;
  if (!solver.search_region) solver.search_region = room.extents();

  std::vector<Vec3> positions;
  positions.reserve(static_cast<std::size_t>(cfg.trials));
  for (int t = 0; t < cfg.trials; ++t) {
    Rng rng(derive_seed(s.seed, {stream::kPosition, static_cast<std::uint64_t>(t)}));
    positions.push_back(sample_in(cfg.region, rng));
  }

  ErrorVsKResult out;
  for (double m : cfg.lambertian_orders) {
    auto anchors = study_anchors(s);
    for (auto& a : anchors) a.lambertian_order = m;
    for (double k : cfg.k_values) {
      ChannelParams params = s.channel;
      params.k_factor = k;
      if (std::isinf(k)) params.noise_std = 0.0;
      std::vector<double> errors;
      errors.reserve(positions.size());
      int failures = 0;
      for (std::size_t t = 0; t < positions.size(); ++t) {
        params.seed = derive_seed(s.seed, {stream::kChannel, static_cast<std::uint64_t>(t)});
        const PdArray ue = s.receiver.at(positions[t]);
        try {
          const auto samples = measure(room, anchors, ue, params);
          const auto est = rss_trilaterate(samples, anchors, ue, solver, params.detection_threshold);
          errors.push_back(100.0 * distance(est.position, positions[t]));
        } catch (const Error&) {
          ++failures;
        }
      }
      ErrorVsKRow row;
      row.k = k;
      row.m = m;
      row.trials = cfg.trials;
      row.failures = failures;
      if (!errors.empty()) {
        double sum = 0.0;
        for (double e : errors) sum += e;
        row.mean_cm = sum / static_cast<double>(errors.size());
        std::sort(errors.begin(), errors.end());
        row.median_cm = quantile(errors, 0.5);
        row.p95_cm = quantile(errors, 0.95);
      } else {
        row.mean_cm = row.median_cm = row.p95_cm = std::numeric_limits<double>::quiet_NaN();
      }
      out.rows.push_back(row);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end in-beam study

struct InbeamRun {
  Method method = Method::Rss;
  PanelSize size;
  int trial = 0;
  Vec3 truth;
  LatcOutcome outcome;
  double true_gain = std::numeric_limits<double>::quiet_NaN();  // selected entry towards the true UE
};

struct InbeamRow {
  Method method = Method::Rss;
  PanelSize size;
  int trials = 0;
  double p_in_beam = 0.0;
  double mean_error_cm = 0.0;
  double mean_latency_ms = 0.0;
  double hpbw_deg = 0.0;
  std::size_t codebook_size = 0;
};

struct InbeamResult {
  std::vector<InbeamRow> rows;  // size outer, method inner
  std::vector<InbeamRun> runs;

  CsvTable table() const {
    CsvTable t;
    t.header = {"method", "M", "p_in_beam", "mean_error_cm", "mean_latency_ms"};
    for (const auto& r : rows) {
      t.rows.push_back({std::string(to_string(r.method)), std::to_string(r.size.first * r.size.second), num(r.p_in_beam),
                        num(r.mean_error_cm), num(r.mean_latency_ms)});
    }
    return t;
  }
};

inline double selected_gain(const Scene& scene, const LatcOutcome& o, const Vec3& truth) {
  if (!o.panel_id || !o.selected_entry) return std::numeric_limits<double>::quiet_NaN();
  for (const auto& site : scene.panels) {
    if (site.panel.id() != *o.panel_id) continue;
    const auto& e = site.codebook.at(*o.selected_entry);
    return beam_gain_at(site.panel, e.profile, scene.incident_for(site.panel), truth, e.peak_power);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// Runs the protocol with each method forced, for every panel size. Trial t
/// reuses the same UE position and channel draws across methods and sizes.
inline InbeamResult exp_inbeam(const Scenario& s, bool keep_runs = false) {
  const auto& cfg = s.inbeam;
  if (cfg.trials < 1) throw Error(ErrorCode::ConfigError, "inbeam trials must be >= 1");
  InbeamResult out;
  for (const auto& size : cfg.sizes) {
    SceneOverrides ov;
    ov.with_obstacles = !cfg.clear_obstacles;
    ov.panel_ids = std::vector<int>{cfg.panel};
    ov.resize = size;
    const Scene scene = build_scene(s, ov);
    if (scene.panels.empty()) throw Error(ErrorCode::ConfigError, "inbeam panel " + std::to_string(cfg.panel) + " not found");
    for (Method method : cfg.methods) {
      LatcOptions options = s.options;
      options.force_method = method;
      InbeamRow row;
      row.method = method;
      row.size = size;
      row.trials = cfg.trials;
      row.hpbw_deg = scene.panels.front().hpbw_deg;
      row.codebook_size = scene.panels.front().codebook.size();
      int hits = 0;
      int located = 0;
      double err = 0.0;
      double lat = 0.0;
      for (int t = 0; t < cfg.trials; ++t) {
        Rng rng(derive_seed(s.seed, {stream::kInbeamPosition, static_cast<std::uint64_t>(t)}));
        const Vec3 truth = sample_in(cfg.region, rng);
        ChannelParams params = s.channel;
        params.seed = derive_seed(s.seed, {stream::kInbeamChannel, static_cast<std::uint64_t>(t)});
        LatcOutcome o = run_latc(scene, s.receiver.at(truth), s.request, params, s.timing, options);
        hits += o.in_beam ? 1 : 0;
        if (o.estimate) {
          ++located;
          err += 100.0 * o.position_error;
        }
        lat += o.latency_ms;
        if (keep_runs) {
          InbeamRun run{method, size, t, truth, o, selected_gain(scene, o, truth)};
          out.runs.push_back(std::move(run));
        }
      }
      row.p_in_beam = static_cast<double>(hits) / cfg.trials;
      row.mean_error_cm = located ? err / located : std::numeric_limits<double>::quiet_NaN();
      row.mean_latency_ms = lat / cfg.trials;
      out.rows.push_back(row);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Named UE runs

struct LatcRunResult {
  std::vector<std::string> names;
  std::vector<LatcOutcome> outcomes;

  CsvTable table() const {
    CsvTable t;
    t.header = {"run_id", "method", "N", "position_error_m", "in_beam", "latency_ms", "terminal_event"};
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const auto& o = outcomes[i];
      t.rows.push_back({std::to_string(i + 1), o.method ? std::string(to_string(*o.method)) : "none",
                        std::to_string(o.n_los), num(o.position_error), o.in_beam ? "true" : "false",
                        num(o.latency_ms), o.terminal_event});
    }
    return t;
  }
};

inline LatcRunResult exp_latc_run(const Scenario& s) {
  if (s.ues.empty()) throw Error(ErrorCode::ConfigError, "latc-run needs at least one entry under 'ues'");
  const Scene scene = build_scene(s);
  LatcRunResult out;
  for (std::size_t i = 0; i < s.ues.size(); ++i) {
    ChannelParams params = s.channel;
    params.seed = derive_seed(s.seed, {stream::kLatcRun, static_cast<std::uint64_t>(i)});
    out.names.push_back(s.ues[i].name);
    out.outcomes.push_back(run_latc(scene, s.receiver.at(s.ues[i].position), s.request, params, s.timing, s.options));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommand dispatch

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"scattering", "tolerated-error", "error-vs-k", "inbeam", "latc-run"};
  return names;
}

/// Output files (name, contents) of one subcommand.
inline std::vector<std::pair<std::string, std::string>> run_subcommand(const std::string& name, const Scenario& s) {
  if (name == "scattering") {
    const auto r = exp_scattering(s);
    return {{"scattering.csv", r.diagram_table().str()}, {"scattering_hpbw.csv", r.hpbw_table().str()}};
  }
  if (name == "tolerated-error") return {{"tolerated-error.csv", exp_tolerated_error(s).table().str()}};
  if (name == "error-vs-k") return {{"error-vs-k.csv", exp_error_vs_k(s).table().str()}};
  if (name == "inbeam") return {{"inbeam.csv", exp_inbeam(s).table().str()}};
  if (name == "latc-run") return {{"latc-run.csv", exp_latc_run(s).table().str()}};
  throw Error(ErrorCode::ConfigError, "unknown subcommand '" + name + "'");
}

inline std::string manifest_text(const std::string& subcommand, const std::string& config_name,
                                 std::string_view config_text, std::uint64_t seed,
                                 const std::vector<std::pair<std::string, std::string>>& outputs) {
  std::string m;
  m += fmt::format("tool=pwe_sim\nversion={}\n", kVersion);
  m += fmt::format("subcommand={}\nconfig={}\n", subcommand, config_name);
  m += fmt::format("config_fnv1a64={:016x}\nseed={}\n", fnv1a64(config_text), seed);
  m += fmt::format("compiler={}\nfmt={}\neigen={}.{}.{}\n", __VERSION__, FMT_VERSION, EIGEN_WORLD_VERSION,
                   EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
  for (const auto& [file, content] : outputs) m += fmt::format("output={} fnv1a64={:016x}\n", file, fnv1a64(content));
  return m;
}

}  // namespace pwe
