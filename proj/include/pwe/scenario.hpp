#pragma once

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pwe/bundled_scenarios.hpp"
#include "pwe/error.hpp"
#include "pwe/geometry.hpp"
#include "pwe/latc.hpp"
#include "pwe/localization.hpp"
#include "pwe/optical_channel.hpp"
#include "pwe/ris.hpp"
#include "pwe/scene.hpp"

namespace pwe {

struct ReceiverConfig {
  double tilt_deg = 45.0;
  double area_m2 = 1e-4;
  double fov_deg = 70.0;
  double optical_gain = 1.0;

  PdArray at(const Vec3& position) const {
    return PdArray::pyramid(Pose::facing_up(position), deg_to_rad(tilt_deg), area_m2, deg_to_rad(fov_deg), optical_gain);
  }
};

/// Codebook extent in the panel frame. The angular step is either given
/// directly or as a fraction of the panel's broadside HPBW.
struct CodebookSpec {
  double az_min_deg = -60.0;
  double az_max_deg = 60.0;
  double el_min_deg = 0.0;
  double el_max_deg = 0.0;
  std::optional<double> step_deg;
  double step_fraction = 0.5;

  CodebookGrid grid(double hpbw_deg) const {
    const double step = step_deg.value_or(step_fraction * hpbw_deg);
    return {az_min_deg, az_max_deg, step, el_min_deg, el_max_deg, step};
  }
};

struct LerisConfig {
  int first_id = 0;
  double half_width_m = 0.15;
  double half_height_m = 0.15;
  double lambertian_order = 1.0;
  double tx_power_w = 1.0;
};

struct PanelConfig {
  int id = 0;
  Vec3 center;
  Vec3 normal{0, 0, 1};
  Vec3 up{0, 0, 1};
  int rows = 10;
  int cols = 10;
  double spacing = 0.5;
  std::uint64_t diffusion_seed = 0;
  CodebookSpec codebook;
  std::optional<LerisConfig> leris;

  RisPanel panel() const { return RisPanel(id, center, normal, up, rows, cols, spacing); }
};

struct NamedBox {
  std::string name;
  Box box;
};

struct UeConfig {
  std::string name;
  Vec3 position;
};

using PanelSize = std::pair<int, int>;  // rows, cols

struct ScatteringConfig {
  std::vector<PanelSize> sizes{{5, 10}, {10, 10}, {40, 40}};
  double resolution_deg = 0.01;
  double range_deg = 180.0;
};

struct ToleratedErrorConfig {
  std::vector<PanelSize> sizes{{5, 10}, {10, 10}, {40, 40}};
  double distance_min_m = 0.5;
  double distance_max_m = 14.0;
  double distance_step_m = 0.5;
};

struct ErrorVsKConfig {
  std::vector<double> k_values{10, 25, 50, 100, 200, std::numeric_limits<double>::infinity()};
  std::vector<double> lambertian_orders{0.5, 1.0, 2.0};
  int trials = 10000;
  std::vector<int> anchors;  // empty: every ceiling anchor
  Box region{{2, 1, 0.8}, {4, 5, 0.8}};
};

struct InbeamConfig {
  std::vector<Method> methods{Method::Rss, Method::RssAoa, Method::BeamScan};
  std::vector<PanelSize> sizes{{10, 10}, {20, 20}, {40, 40}};
  int panel = 1;
  bool clear_obstacles = true;
  int trials = 100;
  Box region{{2, 1, 0.8}, {4, 5, 0.8}};
};

struct Scenario {
  std::string source;
  std::uint64_t seed = 1;
  Box room;
  std::vector<NamedBox> obstacles;
  Vec3 access_point;
  ReceiverConfig receiver;
  std::vector<OpticalAnchor> anchors;  // ceiling anchors; LERIS LEDs come from panels
  std::vector<PanelConfig> panels;
  ChannelParams channel;
  ServiceRequest request;
  LatcTiming timing;
  LatcOptions options;
  std::vector<UeConfig> ues;
  ScatteringConfig scattering;
  ToleratedErrorConfig tolerated_error;
  ErrorVsKConfig error_vs_k;
  InbeamConfig inbeam;

  Room make_room(bool with_obstacles = true) const {
    std::vector<Box> boxes;
    if (with_obstacles) {
      for (const auto& o : obstacles) boxes.push_back(o.box);
    }
    return Room(room, std::move(boxes));
  }

  /// Ceiling anchors followed by the LEDs of every LERIS panel.
  std::vector<OpticalAnchor> all_anchors() const {
    std::vector<OpticalAnchor> out = anchors;
    for (const auto& p : panels) {
      if (!p.leris) continue;
      const auto leds = leris_anchors(p.panel(), p.leris->first_id, p.leris->half_width_m, p.leris->half_height_m,
                                      p.leris->lambertian_order, p.leris->tx_power_w);
      out.insert(out.end(), leds.begin(), leds.end());
    }
    return out;
  }
};

namespace detail {

/// Mapping node that remembers which keys were read so leftovers can be
/// rejected with their line numbers.
class ConfigMap {
 public:
  ConfigMap(const YAML::Node& node, std::string path, const std::string& source)
      : node_(node), path_(std::move(path)), source_(&source) {
    if (!node.IsMap()) fail(node, "'" + path_ + "' must be a mapping");
  }

  bool has(const std::string& key) const { return static_cast<bool>(lookup(key)); }

  YAML::Node get(const std::string& key) {
    seen_.insert(key);
    const YAML::Node n = lookup(key);
    if (!n) fail(node_, "missing key '" + qualified(key) + "'");
    return n;
  }

  std::optional<YAML::Node> find(const std::string& key) {
    seen_.insert(key);
    const YAML::Node n = lookup(key);
    if (!n) return std::nullopt;
    return n;
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) fail(kv.first, "unknown key '" + qualified(key) + "'");
    }
  }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const { fail_at(at, msg, *source_); }

  [[noreturn]] static void fail_at(const YAML::Node& at, const std::string& msg, const std::string& source) {
    const auto mark = at.Mark();
    const std::string where = mark.line >= 0 ? source + ":" + std::to_string(mark.line + 1) : source;
    throw Error(ErrorCode::ConfigError, where + ": " + msg);
  }

  const std::string& source() const { return *source_; }

 private:
  // Read through a const node: the mutable operator[] inserts missing keys.
  YAML::Node lookup(const std::string& key) const {
    const YAML::Node& n = node_;
    return n[key];
  }

  YAML::Node node_;
  std::string path_;
  const std::string* source_;
  std::set<std::string> seen_;
};

class ScenarioParser {
 public:
  explicit ScenarioParser(std::string source) : source_(std::move(source)) {}

  Scenario parse(const std::string& text) {
    YAML::Node root;
    try {
      root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
      throw Error(ErrorCode::ConfigError, source_ + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (!root.IsMap()) throw Error(ErrorCode::ConfigError, source_ + ": top level must be a mapping");
    Scenario s;
    s.source = source_;
    ConfigMap top(root, "", source_);
    if (auto n = top.find("seed")) s.seed = scalar<std::uint64_t>(*n, "seed");

    parse_room(top.get("room"), s);
    s.access_point = vec3(top.get("access_point"), "access_point");
    if (auto n = top.find("receiver")) parse_receiver(*n, s.receiver);
    parse_anchors(top.get("anchors"), s);
    parse_panels(top.get("panels"), s);
    if (auto n = top.find("channel")) parse_channel(*n, s.channel);
    if (auto n = top.find("request")) parse_request(*n, s.request);
    if (auto n = top.find("timing")) parse_timing(*n, s.timing);
    if (auto n = top.find("method")) parse_method(*n, s.options);
    if (auto n = top.find("solver")) parse_solver(*n, s.options.solver);
    if (auto n = top.find("scan")) parse_scan(*n, s.options.scan);
    if (auto n = top.find("ues")) parse_ues(*n, s);
    if (auto n = top.find("experiments")) parse_experiments(*n, s);
    top.finish();
    check_references(root, s);
    return s;
  }

 private:
  std::string source_;

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const { ConfigMap::fail_at(at, msg, source_); }

  template <class T>
  T scalar(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, "'" + what + "' must be a scalar");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, "'" + what + "' has an invalid value '" + n.Scalar() + "'");
    }
  }

  double number(const YAML::Node& n, const std::string& what) const {
    if (n.IsScalar()) {
      const std::string& v = n.Scalar();
      if (v == "inf" || v == "+inf" || v == "infinity") return std::numeric_limits<double>::infinity();
    }
    const double x = scalar<double>(n, what);
    if (std::isnan(x)) fail(n, "'" + what + "' must be a number");
    return x;
  }

  double positive(const YAML::Node& n, const std::string& what) const {
    const double x = number(n, what);
    if (!(x > 0.0) || !std::isfinite(x)) fail(n, "'" + what + "' must be a positive finite number");
    return x;
  }

  double non_negative(const YAML::Node& n, const std::string& what) const {
    const double x = number(n, what);
    if (!(x >= 0.0) || !std::isfinite(x)) fail(n, "'" + what + "' must be a finite number >= 0");
    return x;
  }

  int integer(const YAML::Node& n, const std::string& what) const { return scalar<int>(n, what); }

  Vec3 vec3(const YAML::Node& n, const std::string& what) const {
    if (!n.IsSequence() || n.size() != 3) fail(n, "'" + what + "' must be a list of three numbers");
    Vec3 v{number(n[0], what), number(n[1], what), number(n[2], what)};
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z)) fail(n, "'" + what + "' must be finite");
    return v;
  }

  Vec3 unit(const YAML::Node& n, const std::string& what) const {
    const Vec3 v = vec3(n, what);
    if (!(norm(v) > 0.0)) fail(n, "'" + what + "' must be non-zero");
    return normalized(v);
  }

  Box box(const YAML::Node& n, const std::string& what, bool allow_flat = false) const {
    ConfigMap m(n, what, source_);
    Box b{vec3(m.get("min"), m.qualified("min")), vec3(m.get("max"), m.qualified("max"))};
    m.finish();
    const bool ok = allow_flat ? (b.min.x <= b.max.x && b.min.y <= b.max.y && b.min.z <= b.max.z) : b.well_formed();
    if (!ok) fail(n, "'" + what + "' needs min < max on every axis");
    return b;
  }

  void check_sequence(const YAML::Node& n, const std::string& what) const {
    if (!n.IsSequence()) fail(n, "'" + what + "' must be a list");
  }

  std::vector<PanelSize> sizes(const YAML::Node& n, const std::string& what) const {
    check_sequence(n, what);
    if (n.size() == 0) fail(n, "'" + what + "' must not be empty");
    std::vector<PanelSize> out;
    for (const auto& e : n) {
      if (!e.IsSequence() || e.size() != 2) fail(e, "'" + what + "' entries must be [rows, cols]");
      const int r = integer(e[0], what);
      const int c = integer(e[1], what);
      if (r < 1 || c < 1) fail(e, "'" + what + "' rows and cols must be >= 1");
      out.emplace_back(r, c);
    }
    return out;
  }

  void parse_room(const YAML::Node& n, Scenario& s) const {
    ConfigMap m(n, "room", source_);
    const Vec3 size = vec3(m.get("size"), "room.size");
    if (!(size.x > 0 && size.y > 0 && size.z > 0)) fail(n, "'room.size' must be positive");
    s.room = {{0, 0, 0}, size};
    if (auto obs = m.find("obstacles")) {
      check_sequence(*obs, "room.obstacles");
      for (std::size_t i = 0; i < obs->size(); ++i) {
        const YAML::Node e = (*obs)[i];
        const std::string path = "room.obstacles[" + std::to_string(i) + "]";
        ConfigMap om(e, path, source_);
        NamedBox nb;
        nb.name = om.has("name") ? scalar<std::string>(om.get("name"), path + ".name") : "obstacle" + std::to_string(i);
        nb.box = {vec3(om.get("min"), path + ".min"), vec3(om.get("max"), path + ".max")};
        om.finish();
        if (!nb.box.well_formed()) fail(e, "'" + path + "' needs min < max on every axis");
        if (!s.room.contains(nb.box)) fail(e, "'" + path + "' lies outside the room");
        s.obstacles.push_back(nb);
      }
    }
    m.finish();
  }

  void parse_receiver(const YAML::Node& n, ReceiverConfig& r) const {
    ConfigMap m(n, "receiver", source_);
    if (auto v = m.find("tilt_deg")) r.tilt_deg = non_negative(*v, "receiver.tilt_deg");
    if (auto v = m.find("area_m2")) r.area_m2 = positive(*v, "receiver.area_m2");
    if (auto v = m.find("fov_deg")) {
      r.fov_deg = positive(*v, "receiver.fov_deg");
      if (r.fov_deg > 90.0) fail(*v, "'receiver.fov_deg' must be <= 90");
    }
    if (auto v = m.find("optical_gain")) r.optical_gain = positive(*v, "receiver.optical_gain");
    m.finish();
  }

  void parse_anchors(const YAML::Node& n, Scenario& s) const {
    check_sequence(n, "anchors");
    for (std::size_t i = 0; i < n.size(); ++i) {
      const std::string path = "anchors[" + std::to_string(i) + "]";
      ConfigMap m(n[i], path, source_);
      OpticalAnchor a;
      a.id = integer(m.get("id"), path + ".id");
      a.position = vec3(m.get("position"), path + ".position");
      if (auto v = m.find("normal")) a.normal = unit(*v, path + ".normal");
      if (auto v = m.find("lambertian_order")) a.lambertian_order = positive(*v, path + ".lambertian_order");
      if (auto v = m.find("tx_power_w")) a.tx_power = positive(*v, path + ".tx_power_w");
      m.finish();
      s.anchors.push_back(a);
    }
  }

  void parse_panels(const YAML::Node& n, Scenario& s) const {
    check_sequence(n, "panels");
    for (std::size_t i = 0; i < n.size(); ++i) {
      const std::string path = "panels[" + std::to_string(i) + "]";
      ConfigMap m(n[i], path, source_);
      PanelConfig p;
      p.id = integer(m.get("id"), path + ".id");
      p.center = vec3(m.get("center"), path + ".center");
      p.normal = unit(m.get("normal"), path + ".normal");
      if (auto v = m.find("up")) p.up = vec3(*v, path + ".up");
      p.rows = integer(m.get("rows"), path + ".rows");
      p.cols = integer(m.get("cols"), path + ".cols");
      if (p.rows < 1 || p.cols < 1) fail(n[i], "'" + path + "' rows and cols must be >= 1");
      if (auto v = m.find("spacing")) p.spacing = positive(*v, path + ".spacing");
      if (auto v = m.find("diffusion_seed")) p.diffusion_seed = scalar<std::uint64_t>(*v, path + ".diffusion_seed");
      if (auto v = m.find("codebook")) p.codebook = codebook_spec(*v, path + ".codebook");
      if (auto v = m.find("leris")) {
        ConfigMap lm(*v, path + ".leris", source_);
        LerisConfig l;
        l.first_id = integer(lm.get("first_id"), lm.qualified("first_id"));
        if (auto x = lm.find("half_width_m")) l.half_width_m = positive(*x, lm.qualified("half_width_m"));
        if (auto x = lm.find("half_height_m")) l.half_height_m = positive(*x, lm.qualified("half_height_m"));
        if (auto x = lm.find("lambertian_order")) l.lambertian_order = positive(*x, lm.qualified("lambertian_order"));
        if (auto x = lm.find("tx_power_w")) l.tx_power_w = positive(*x, lm.qualified("tx_power_w"));
        lm.finish();
        p.leris = l;
      }
      m.finish();
      s.panels.push_back(p);
    }
  }

  CodebookSpec codebook_spec(const YAML::Node& n, const std::string& path) const {
    ConfigMap m(n, path, source_);
    CodebookSpec c;
    if (auto v = m.find("az_min_deg")) c.az_min_deg = number(*v, m.qualified("az_min_deg"));
    if (auto v = m.find("az_max_deg")) c.az_max_deg = number(*v, m.qualified("az_max_deg"));
    if (auto v = m.find("el_min_deg")) c.el_min_deg = number(*v, m.qualified("el_min_deg"));
    if (auto v = m.find("el_max_deg")) c.el_max_deg = number(*v, m.qualified("el_max_deg"));
    if (auto v = m.find("step_deg")) c.step_deg = positive(*v, m.qualified("step_deg"));
    if (auto v = m.find("step_fraction")) c.step_fraction = positive(*v, m.qualified("step_fraction"));
    m.finish();
    for (double a : {c.az_min_deg, c.az_max_deg, c.el_min_deg, c.el_max_deg}) {
      if (!(std::abs(a) < 90.0)) fail(n, "'" + path + "' angles must lie strictly inside (-90, 90)");
    }
    if (c.az_min_deg > c.az_max_deg || c.el_min_deg > c.el_max_deg) fail(n, "'" + path + "' needs min <= max");
    return c;
  }

  void parse_channel(const YAML::Node& n, ChannelParams& c) const {
    ConfigMap m(n, "channel", source_);
    if (auto v = m.find("k_factor")) {
      c.k_factor = number(*v, "channel.k_factor");
      if (!(c.k_factor > 0.0)) fail(*v, "'channel.k_factor' must be > 0");
    }
    if (auto v = m.find("noise_std_w")) c.noise_std = non_negative(*v, "channel.noise_std_w");
    if (auto v = m.find("detection_threshold_w")) c.detection_threshold = non_negative(*v, "channel.detection_threshold_w");
    m.finish();
  }

  void parse_request(const YAML::Node& n, ServiceRequest& r) const {
    ConfigMap m(n, "request", source_);
    if (auto v = m.find("service")) {
      r.service = scalar<std::string>(*v, "request.service");
      try {
        r.functionality();
      } catch (const Error&) {
        fail(*v, "unknown service tag '" + r.service + "'");
      }
    }
    if (auto v = m.find("qos_precision_m")) r.qos_precision = positive(*v, "request.qos_precision_m");
    m.finish();
  }

  void parse_timing(const YAML::Node& n, LatcTiming& t) const {
    ConfigMap m(n, "timing", source_);
    if (auto v = m.find("beacon_ms")) t.beacon_ms = positive(*v, "timing.beacon_ms");
    if (auto v = m.find("report_ms")) t.report_ms = positive(*v, "timing.report_ms");
    if (auto v = m.find("config_ms")) t.config_ms = positive(*v, "timing.config_ms");
    if (auto v = m.find("dwell_ms")) t.dwell_ms = positive(*v, "timing.dwell_ms");
    if (auto v = m.find("locate_ms")) t.locate_ms = positive(*v, "timing.locate_ms");
    m.finish();
  }

  void parse_method(const YAML::Node& n, LatcOptions& o) const {
    ConfigMap m(n, "method", source_);
    if (auto v = m.find("hybrid_threshold")) o.hybrid_threshold = positive(*v, "method.hybrid_threshold");
    if (auto v = m.find("rss_error_proxy_m")) o.rss_error_proxy_m = positive(*v, "method.rss_error_proxy_m");
    if (auto v = m.find("force")) o.force_method = method(*v, "method.force");
    m.finish();
  }

  void parse_solver(const YAML::Node& n, SolverOptions& o) const {
    ConfigMap m(n, "solver", source_);
    if (auto v = m.find("max_iterations")) {
      o.max_iterations = integer(*v, "solver.max_iterations");
      if (o.max_iterations < 1) fail(*v, "'solver.max_iterations' must be >= 1");
    }
    if (auto v = m.find("tolerance_m")) o.tolerance = positive(*v, "solver.tolerance_m");
    if (auto v = m.find("grid_step_m")) o.grid_step = positive(*v, "solver.grid_step_m");
    if (auto v = m.find("residual_tolerance")) o.residual_tolerance = positive(*v, "solver.residual_tolerance");
    if (auto v = m.find("init")) {
      const auto name = scalar<std::string>(*v, "solver.init");
      if (name == "linearized") {
        o.init = InitStrategy::Linearized;
      } else if (name == "grid") {
        o.init = InitStrategy::Grid;
      } else {
        fail(*v, "'solver.init' must be 'linearized' or 'grid'");
      }
    }
    m.finish();
  }

  void parse_scan(const YAML::Node& n, BeamScanOptions& o) const {
    ConfigMap m(n, "scan", source_);
    if (auto v = m.find("dwell_count")) {
      o.dwell_count = integer(*v, "scan.dwell_count");
      if (o.dwell_count < 1) fail(*v, "'scan.dwell_count' must be >= 1");
    }
    if (auto v = m.find("detection_threshold")) o.detection_threshold = non_negative(*v, "scan.detection_threshold");
    if (auto v = m.find("noise_std")) o.noise_std = non_negative(*v, "scan.noise_std");
    m.finish();
  }

  Method method(const YAML::Node& n, const std::string& what) const {
    const auto name = scalar<std::string>(n, what);
    for (Method x : {Method::Rss, Method::RssAoa, Method::BeamScan}) {
      if (name == to_string(x)) return x;
    }
    fail(n, "'" + what + "' must be one of rss, rss_aoa, beam_scan");
  }

  void parse_ues(const YAML::Node& n, Scenario& s) const {
    check_sequence(n, "ues");
    for (std::size_t i = 0; i < n.size(); ++i) {
      const std::string path = "ues[" + std::to_string(i) + "]";
      ConfigMap m(n[i], path, source_);
      UeConfig u;
      u.name = m.has("name") ? scalar<std::string>(m.get("name"), path + ".name") : "UE" + std::to_string(i + 1);
      u.position = vec3(m.get("position"), path + ".position");
      m.finish();
      if (!s.room.contains(u.position)) fail(n[i], "'" + path + "' lies outside the room");
      s.ues.push_back(u);
    }
  }

  void parse_experiments(const YAML::Node& n, Scenario& s) const {
    ConfigMap m(n, "experiments", source_);
    if (auto v = m.find("scattering")) {
      ConfigMap e(*v, "experiments.scattering", source_);
      if (auto x = e.find("sizes")) s.scattering.sizes = sizes(*x, e.qualified("sizes"));
      if (auto x = e.find("resolution_deg")) s.scattering.resolution_deg = positive(*x, e.qualified("resolution_deg"));
      if (auto x = e.find("range_deg")) {
        s.scattering.range_deg = positive(*x, e.qualified("range_deg"));
        if (s.scattering.range_deg > 180.0) fail(*x, "'experiments.scattering.range_deg' must be <= 180");
      }
      e.finish();
    }
    if (auto v = m.find("tolerated_error")) {
      ConfigMap e(*v, "experiments.tolerated_error", source_);
      auto& t = s.tolerated_error;
      if (auto x = e.find("sizes")) t.sizes = sizes(*x, e.qualified("sizes"));
      if (auto x = e.find("distance_min_m")) t.distance_min_m = positive(*x, e.qualified("distance_min_m"));
      if (auto x = e.find("distance_max_m")) t.distance_max_m = positive(*x, e.qualified("distance_max_m"));
      if (auto x = e.find("distance_step_m")) t.distance_step_m = positive(*x, e.qualified("distance_step_m"));
      if (t.distance_max_m > 14.0 || t.distance_min_m > t.distance_max_m) {
        fail(*v, "'experiments.tolerated_error' distances must satisfy 0 < min <= max <= 14");
      }
      e.finish();
    }
    if (auto v = m.find("error_vs_k")) {
      ConfigMap e(*v, "experiments.error_vs_k", source_);
      auto& k = s.error_vs_k;
      if (auto x = e.find("k_values")) {
        check_sequence(*x, e.qualified("k_values"));
        k.k_values.clear();
        for (const auto& kv : *x) {
          const double val = number(kv, e.qualified("k_values"));
          if (!(val > 0.0)) fail(kv, "'experiments.error_vs_k.k_values' entries must be > 0");
          k.k_values.push_back(val);
        }
        if (k.k_values.empty()) fail(*x, "'experiments.error_vs_k.k_values' must not be empty");
      }
      if (auto x = e.find("lambertian_orders")) {
        check_sequence(*x, e.qualified("lambertian_orders"));
        k.lambertian_orders.clear();
        for (const auto& mv : *x) k.lambertian_orders.push_back(positive(mv, e.qualified("lambertian_orders")));
        if (k.lambertian_orders.empty()) fail(*x, "'experiments.error_vs_k.lambertian_orders' must not be empty");
      }
      if (auto x = e.find("trials")) {
        k.trials = integer(*x, e.qualified("trials"));
        if (k.trials < 1) fail(*x, "'experiments.error_vs_k.trials' must be >= 1");
      }
      if (auto x = e.find("anchors")) {
        check_sequence(*x, e.qualified("anchors"));
        k.anchors.clear();
        for (const auto& a : *x) k.anchors.push_back(integer(a, e.qualified("anchors")));
      }
      if (auto x = e.find("region")) k.region = box(*x, e.qualified("region"), true);
      e.finish();
    }
    if (auto v = m.find("inbeam")) {
      ConfigMap e(*v, "experiments.inbeam", source_);
      auto& b = s.inbeam;
      if (auto x = e.find("methods")) {
        check_sequence(*x, e.qualified("methods"));
        b.methods.clear();
        for (const auto& mv : *x) b.methods.push_back(method(mv, e.qualified("methods")));
        if (b.methods.empty()) fail(*x, "'experiments.inbeam.methods' must not be empty");
      }
      if (auto x = e.find("sizes")) b.sizes = sizes(*x, e.qualified("sizes"));
      if (auto x = e.find("panel")) b.panel = integer(*x, e.qualified("panel"));
      if (auto x = e.find("clear_obstacles")) b.clear_obstacles = scalar<bool>(*x, e.qualified("clear_obstacles"));
      if (auto x = e.find("trials")) {
        b.trials = integer(*x, e.qualified("trials"));
        if (b.trials < 1) fail(*x, "'experiments.inbeam.trials' must be >= 1");
      }
      if (auto x = e.find("region")) b.region = box(*x, e.qualified("region"), true);
      e.finish();
    }
    m.finish();
  }

  void check_references(const YAML::Node& root, const Scenario& s) const {
    std::set<int> ids;
    for (const auto& a : s.all_anchors()) {
      if (!ids.insert(a.id).second) fail(root["anchors"], "duplicate anchor id " + std::to_string(a.id));
      if (!s.room.contains(a.position)) fail(root["anchors"], "anchor " + std::to_string(a.id) + " lies outside the room");
    }
    std::set<int> panel_ids;
    for (const auto& p : s.panels) {
      if (!panel_ids.insert(p.id).second) fail(root["panels"], "duplicate panel id " + std::to_string(p.id));
      if (!s.room.contains(p.center)) fail(root["panels"], "panel " + std::to_string(p.id) + " lies outside the room");
    }
    if (!s.room.contains(s.access_point)) fail(root["access_point"], "access point lies outside the room");
    const YAML::Node exps = root["experiments"];
    for (int id : s.error_vs_k.anchors) {
      if (!ids.count(id)) fail(exps ? exps : root, "experiments.error_vs_k.anchors references unknown anchor " + std::to_string(id));
    }
    if (!panel_ids.count(s.inbeam.panel) && !s.panels.empty()) {
      fail(exps ? exps : root, "experiments.inbeam.panel references unknown panel " + std::to_string(s.inbeam.panel));
    }
    for (const Box& r : {s.error_vs_k.region, s.inbeam.region}) {
      if (!s.room.contains(r)) fail(exps ? exps : root, "experiment sampling region lies outside the room");
    }
  }
};

}  // namespace detail

inline Scenario parse_scenario(const std::string& text, const std::string& source = "<string>") {
  return detail::ScenarioParser(source).parse(text);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Config text for `--config`: the bundled scenario for "default", else a file.
inline std::string scenario_text(const std::string& name_or_path) {
  if (name_or_path == "default") return std::string(bundled::kDefaultScenario);
  return read_text_file(name_or_path);
}

inline Scenario load_scenario(const std::string& name_or_path) {
  return parse_scenario(scenario_text(name_or_path), name_or_path);
}

struct SceneOverrides {
  bool with_obstacles = true;
  std::optional<std::vector<int>> panel_ids;  // keep only these panels
  std::optional<PanelSize> resize;            // applied to every kept panel
};

/// Scene with codebooks built for every kept panel. LERIS LEDs of dropped
/// panels go with them.
inline Scene build_scene(const Scenario& s, const SceneOverrides& o = {}) {
  Scene scene{s.make_room(o.with_obstacles), {}, {}, s.access_point};
  scene.anchors = s.anchors;
  for (const auto& pc : s.panels) {
    if (o.panel_ids && std::find(o.panel_ids->begin(), o.panel_ids->end(), pc.id) == o.panel_ids->end()) continue;
    RisPanel panel = pc.panel();
    if (o.resize) panel = panel.resized(o.resize->first, o.resize->second);
    const double hpbw_deg = panel_hpbw_deg(panel);
    const CodebookGrid grid = pc.codebook.grid(hpbw_deg);
    const Vec3 incident = scene.incident_for(panel);
    scene.panels.push_back({panel, grid, codebook_build(panel, incident, grid, pc.diffusion_seed), hpbw_deg});
    if (pc.leris) {
      const auto leds = leris_anchors(panel, pc.leris->first_id, pc.leris->half_width_m, pc.leris->half_height_m,
                                      pc.leris->lambertian_order, pc.leris->tx_power_w);
      scene.anchors.insert(scene.anchors.end(), leds.begin(), leds.end());
    }
  }
  scene.validate();
  return scene;
}

}  // namespace pwe
