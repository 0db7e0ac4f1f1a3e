#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pwe/error.hpp"
#include "pwe/geometry.hpp"
#include "pwe/localization.hpp"
#include "pwe/optical_channel.hpp"
#include "pwe/random.hpp"
#include "pwe/ris.hpp"
#include "pwe/scene.hpp"

namespace pwe {

/// Service tag plus the precision the UE asks for.
struct ServiceRequest {
  std::string service = "beamsteer-data";
  double qos_precision = 0.1;  // m

  void validate() const {
    if (!(qos_precision > 0.0)) throw Error(ErrorCode::ConfigError, "QoS precision must be > 0");
    functionality();
  }

  /// Codebook functionality a service needs.
  Functionality functionality() const {
    if (service == "beamsteer-data" || service == "xr-rf") return Functionality::Beamsteer;
    if (service == "diffusion-coverage") return Functionality::Diffusion;
    throw Error(ErrorCode::ConfigError, "unknown service tag '" + service + "'");
  }
};

struct LatcTiming {
  double beacon_ms = 1.0;
  double report_ms = 2.0;
  double config_ms = 1.0;
  double dwell_ms = 1.0;
  double locate_ms = 0.5;

  void validate() const {
    for (double v : {beacon_ms, report_ms, config_ms, dwell_ms, locate_ms}) {
      if (!(v > 0.0)) throw Error(ErrorCode::ConfigError, "timing constants must be > 0");
    }
  }
};

struct TimelineEvent {
  std::string tag;
  double time_ms = 0.0;

  friend bool operator==(const TimelineEvent&, const TimelineEvent&) = default;
};

struct LatcOutcome {
  std::optional<LocalizationEstimate> estimate;
  std::optional<Method> method;
  int n_los = 0;
  std::optional<int> panel_id;
  std::optional<std::size_t> selected_entry;
  std::map<int, std::size_t> installed;  // panel id -> codebook entry
  bool in_beam = false;
  double position_error = std::numeric_limits<double>::quiet_NaN();  // m
  double angular_offset_deg = std::numeric_limits<double>::quiet_NaN();
  double hpbw_deg = std::numeric_limits<double>::quiet_NaN();
  double latency_ms = 0.0;
  std::vector<TimelineEvent> timeline;
  std::string terminal_event;

  bool ok() const { return terminal_event == "configured"; }
};

struct LatcOptions {
  std::optional<Method> force_method;
  double hybrid_threshold = 1.0;
  double rss_error_proxy_m = 0.02;  // expected plain-RSS error compared against the QoS precision
  SolverOptions solver;
  BeamScanOptions scan;
};

/// Localization method for a UE that sees `n_los` anchors with `n_pds`
/// photodetectors. Fewer than four anchors forces the hybrid method; with
/// four or more, hybrid is used only when the requested precision is tighter
/// than `hybrid_threshold * sigma_p_available`.
inline Method method_select(int n_los, int n_pds, const ServiceRequest& request, double sigma_p_available,
                            double hybrid_threshold = 1.0) {
  if (n_los < 0 || n_pds < 1) throw Error(ErrorCode::ConfigError, "method_select needs N >= 0 and at least one PD");
  const bool aoa_capable = n_pds >= 3;
  if (n_los < 4) {
    if (aoa_capable) return Method::RssAoa;
    throw Error(ErrorCode::LocalizationUnavailable, "fewer than 4 anchors and no usable PD diversity");
  }
  if (request.qos_precision < hybrid_threshold * sigma_p_available && aoa_capable) return Method::RssAoa;
  return Method::Rss;
}

/// Serving panel: unoccluded, UE in front, smallest distance, ties by id.
inline const PanelSite* serving_panel(const Scene& scene, const Vec3& ue) {
  const PanelSite* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& site : scene.panels) {
    const Vec3 w = ue - site.panel.center();
    const double d = norm(w);
    if (!(d > 1e-9) || !site.panel.in_front(w / d)) continue;
    if (segment_occluded(site.panel.center(), ue, scene.room)) continue;
    if (d < best_d || (d == best_d && best && site.panel.id() < best->panel.id())) {
      best_d = d;
      best = &site;
    }
  }
  return best;
}

namespace detail {

class Timeline {
 public:
  explicit Timeline(std::vector<TimelineEvent>& events) : events_(events) {}
  void advance(const std::string& tag, double duration_ms) {
    now_ += duration_ms;
    events_.push_back({tag, now_});
  }
  double now() const { return now_; }

 private:
  std::vector<TimelineEvent>& events_;
  double now_ = 0.0;
};

/// Strongest anchor that lights at least `min_pds` photodetectors, or the
/// strongest overall when none does.
inline int strongest_anchor(std::span<const ChannelSample> samples, double threshold, int min_pds = 1) {
  const auto peak = anchor_peak_rss(samples, threshold);
  if (peak.empty()) throw Error(ErrorCode::LocalizationUnavailable, "no LoS anchor detected");
  std::map<int, int> lit;
  for (const auto& s : samples) {
    if (s.los && s.rss > 0.0 && s.rss >= threshold) ++lit[s.anchor_id];
  }
  std::optional<int> best;
  std::optional<int> best_capable;
  for (const auto& [id, rss] : peak) {
    if (!best || rss > peak.at(*best)) best = id;
    if (lit[id] >= min_pds && (!best_capable || rss > peak.at(*best_capable))) best_capable = id;
  }
  return best_capable.value_or(*best);
}

}  // namespace detail

/// One locate-and-then-configure run for a single UE: beacon, optical
/// measurement, method dispatch, localization, diffusion-mode report, and
/// codebook configuration. Failures end the timeline with an error event.
inline LatcOutcome run_latc(const Scene& scene, const PdArray& ue, const ServiceRequest& request,
                            const ChannelParams& params, const LatcTiming& timing, const LatcOptions& options = {}) {
  request.validate();
  timing.validate();
  LatcOutcome out;
  detail::Timeline clock(out.timeline);
  const Vec3 truth = ue.pose().position();
  try {
    clock.advance("beacon", timing.beacon_ms);

    Rng rng(params.seed);
    const auto samples = measure(scene, ue, params, rng);
    out.n_los = count_los_anchors(samples, params);
    const int n_pds = static_cast<int>(ue.size());
    const Method method = options.force_method.value_or(
        method_select(out.n_los, n_pds, request, options.rss_error_proxy_m, options.hybrid_threshold));
    out.method = method;

    const PanelSite* site = nullptr;
    if (method == Method::BeamScan) {
      site = serving_panel(scene, truth);
      if (!site) throw Error(ErrorCode::OutOfCoverage, "no panel reaches the UE");
      Rng scan_rng(derive_seed(params.seed, {0xbea5ULL}));
      BeamScanOptions scan = options.scan;
      scan.dwell_ms = timing.dwell_ms;
      clock.advance("measurement", static_cast<double>(site->codebook.beamsteer_count()) * scan.dwell_count *
                                       scan.dwell_ms);
      const auto result = beam_scan_localize(scene.room, site->panel, site->codebook,
                                             scene.incident_for(site->panel), truth, scan, &scan_rng);
      out.estimate = result.estimate;
    } else {
      clock.advance("measurement", timing.dwell_ms);
      if (method == Method::Rss) {
        SolverOptions solver = options.solver;
        if (!solver.search_region) solver.search_region = scene.room.extents();
        out.estimate = rss_trilaterate(samples, scene.anchors, ue, solver, params.detection_threshold);
      } else {
        const int id = detail::strongest_anchor(samples, params.detection_threshold, 3);
        out.estimate = hybrid_rss_aoa(samples, scene.anchor(id), ue, params.detection_threshold);
      }
    }
    clock.advance("localization", timing.locate_ms);
    out.position_error = distance(out.estimate->position, truth);

    for (const auto& p : scene.panels) {
      out.installed[p.panel.id()] = codebook_select(p.codebook, p.panel.center(), p.panel, Functionality::Diffusion);
    }
    clock.advance("diffusion", timing.config_ms);
    clock.advance("report", timing.report_ms);

    const Vec3 p = out.estimate->position;
    if (!site) {
      if (!scene.room.inside(p)) throw Error(ErrorCode::OutOfCoverage, "reported position outside the room");
      site = serving_panel(scene, p);
      if (!site) throw Error(ErrorCode::OutOfCoverage, "no panel covers the reported position");
    }
    const Functionality service = request.functionality();
    const std::size_t entry = codebook_select(site->codebook, p, site->panel, service);
    out.panel_id = site->panel.id();
    out.selected_entry = entry;
    out.installed[site->panel.id()] = entry;
    clock.advance("configure", timing.config_ms);

    out.hpbw_deg = site->hpbw_deg;
    const Vec3 true_dir = normalized(truth - site->panel.center());
    out.angular_offset_deg = rad_to_deg(angle_between(site->codebook.at(entry).direction, true_dir));
    out.in_beam = service == Functionality::Beamsteer && out.angular_offset_deg <= 0.5 * site->hpbw_deg;
    out.terminal_event = "configured";
  } catch (const Error& e) {
    out.terminal_event = std::string(to_string(e.code()));
    clock.advance(out.terminal_event, timing.locate_ms);
  }
  out.latency_ms = clock.now();
  return out;
}

/// Halves the codebook angular step when the in-beam rate over the last
/// `window` outcomes falls strictly below `threshold`.
inline CodebookGrid feedback_recalibrate(std::span<const LatcOutcome> outcomes, std::size_t window,
                                         const CodebookGrid& grid, double threshold = 0.9) {
  if (window < 1) throw Error(ErrorCode::ConfigError, "feedback window must be >= 1");
  const std::size_t n = std::min(window, outcomes.size());
  if (n == 0) return grid;
  std::size_t hits = 0;
  for (std::size_t i = outcomes.size() - n; i < outcomes.size(); ++i) hits += outcomes[i].in_beam ? 1 : 0;
  const double rate = static_cast<double>(hits) / static_cast<double>(n);
  if (!(rate < threshold)) return grid;
  CodebookGrid next = grid;
  next.az_step_deg *= 0.5;
  next.el_step_deg *= 0.5;
  return next;
}

}  // namespace pwe
