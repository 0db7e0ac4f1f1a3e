#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pwe/error.hpp"
#include "pwe/geometry.hpp"
#include "pwe/optical_channel.hpp"
#include "pwe/ris.hpp"

namespace pwe {

/// A RIS panel together with the codebook the controller holds for it.
struct PanelSite {
  RisPanel panel;
  CodebookGrid grid;
  Codebook codebook;
  double hpbw_deg = 0.0;  // broadside, narrower principal cut
};

inline PanelSite make_panel_site(const RisPanel& panel, const CodebookGrid& grid, const Vec3& incident,
                                 std::uint64_t diffusion_seed, double hpbw_resolution_deg = 0.01) {
  return {panel, grid, codebook_build(panel, incident, grid, diffusion_seed), panel_hpbw_deg(panel, hpbw_resolution_deg)};
}

/// The world every experiment runs against.
struct Scene {
  Room room;
  std::vector<OpticalAnchor> anchors;
  std::vector<PanelSite> panels;
  Vec3 access_point;

  const OpticalAnchor& anchor(int id) const {
    for (const auto& a : anchors) {
      if (a.id == id) return a;
    }
    throw Error(ErrorCode::ConfigError, "unknown anchor id " + std::to_string(id));
  }

  /// Unit vector from the panel towards the access point, the incident
  /// direction every codebook entry is built for.
  Vec3 incident_for(const RisPanel& panel) const { return normalized(access_point - panel.center()); }

  void validate() const {
    std::set<int> ids;
    std::map<int, int> per_panel;
    std::set<int> panel_ids;
    for (const auto& p : panels) {
      if (!panel_ids.insert(p.panel.id()).second) {
        throw Error(ErrorCode::ConfigError, "duplicate panel id " + std::to_string(p.panel.id()));
      }
      if (!room.inside(p.panel.center())) throw Error(ErrorCode::ConfigError, "panel outside room");
    }
    for (const auto& a : anchors) {
      a.validate();
      if (!ids.insert(a.id).second) throw Error(ErrorCode::ConfigError, "duplicate anchor id " + std::to_string(a.id));
      if (!room.inside(a.position)) throw Error(ErrorCode::ConfigError, "anchor " + std::to_string(a.id) + " outside room");
      if (a.mount == Mount::Leris) {
        const PanelSite* site = nullptr;
        for (const auto& p : panels) {
          if (p.panel.id() == a.panel_id) site = &p;
        }
        if (!site) throw Error(ErrorCode::ConfigError, "anchor " + std::to_string(a.id) + " references unknown panel");
        if (std::abs(dot(a.position - site->panel.center(), site->panel.normal())) > 1e-9) {
          throw Error(ErrorCode::ConfigError, "LERIS anchor " + std::to_string(a.id) + " not on its panel face");
        }
        ++per_panel[a.panel_id];
      }
    }
    for (const auto& [panel, count] : per_panel) {
      if (count != 4) throw Error(ErrorCode::ConfigError, "LERIS panel " + std::to_string(panel) + " must carry four LEDs");
    }
    if (!room.inside(access_point)) throw Error(ErrorCode::ConfigError, "access point outside room");
  }
};

/// Four LEDs at the corners of a `half_width` x `half_height` rectangle on
/// the panel face, emitting along the panel normal. Ids start at `first_id`.
inline std::vector<OpticalAnchor> leris_anchors(const RisPanel& panel, int first_id, double half_width,
                                                double half_height, double lambertian_order, double tx_power) {
  std::vector<OpticalAnchor> out;
  int id = first_id;
  for (double sv : {-1.0, 1.0}) {
    for (double su : {-1.0, 1.0}) {
      OpticalAnchor a;
      a.id = id++;
      a.position = panel.center() + panel.u_axis() * (su * half_width) + panel.v_axis() * (sv * half_height);
      a.normal = panel.normal();
      a.lambertian_order = lambertian_order;
      a.tx_power = tx_power;
      a.mount = Mount::Leris;
      a.panel_id = panel.id();
      out.push_back(a);
    }
  }
  return out;
}

inline std::vector<ChannelSample> measure(const Scene& scene, const PdArray& ue, const ChannelParams& params, Rng& rng) {
  return measure(scene.room, scene.anchors, ue, params, rng);
}

}  // namespace pwe
