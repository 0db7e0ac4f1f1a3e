#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <string>

#include "pwe/scenario.hpp"

using namespace pwe;

namespace {

std::string default_text() { return scenario_text("default"); }

std::string replaced(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  if (pos == std::string::npos) throw std::runtime_error("fixture text not found: " + from);
  return text.replace(pos, from.size(), to);
}

std::string config_error(const std::string& text) {
  try {
    parse_scenario(text, "s.yaml");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    return e.what();
  }
  ADD_FAILURE() << "expected a config error";
  return {};
}

}  // namespace

TEST(Scenario, DefaultParses) {
  const Scenario s = load_scenario("default");
  EXPECT_EQ(s.seed, 1u);
  EXPECT_EQ(s.room.max, (Vec3{8, 6, 3}));
  EXPECT_EQ(s.anchors.size(), 4u);
  EXPECT_EQ(s.all_anchors().size(), 8u);
  EXPECT_EQ(s.panels.size(), 2u);
  EXPECT_EQ(s.ues.size(), 5u);
  EXPECT_EQ(s.obstacles.size(), 7u);
  EXPECT_EQ(s.channel.k_factor, 100.0);
  EXPECT_EQ(s.error_vs_k.trials, 10000);
  EXPECT_TRUE(std::isinf(s.error_vs_k.k_values.back()));
  EXPECT_EQ(s.inbeam.methods.size(), 3u);
  EXPECT_EQ(s.inbeam.methods[2], Method::BeamScan);
  EXPECT_EQ(s.request.qos_precision, 0.1);
  EXPECT_EQ(s.timing.locate_ms, 0.5);
}

TEST(Scenario, UnknownKeyNamesLine) {
  const std::string text = replaced(default_text(), "  k_factor: 100", "  k_factor: 100\n  k_factr: 5");
  const std::string msg = config_error(text);
  EXPECT_TRUE(std::regex_search(msg, std::regex("s\\.yaml:[0-9]+: .*k_factr"))) << msg;
}

TEST(Scenario, UnknownNestedKey) {
  const std::string text = replaced(default_text(), "    trials: 100\n", "    trials: 100\n    trails: 3\n");
  EXPECT_NE(config_error(text).find("trails"), std::string::npos);
}

TEST(Scenario, MissingFileNamesPath) {
  const std::string path = (std::filesystem::temp_directory_path() / "pwe_no_such_file.yaml").string();
  try {
    load_scenario(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    EXPECT_NE(std::string(e.what()).find(path), std::string::npos);
  }
}

TEST(Scenario, LoadsFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "pwe_scenario_copy.yaml";
  {
    std::ofstream out(path);
    out << replaced(default_text(), "seed: 1", "seed: 42");
  }
  EXPECT_EQ(load_scenario(path.string()).seed, 42u);
  std::filesystem::remove(path);
}

TEST(Scenario, BadValuesRejected) {
  const auto base = default_text();
  config_error(replaced(base, "k_factor: 100", "k_factor: -3"));
  config_error(replaced(base, "k_factor: 100", "k_factor: lots"));
  config_error(replaced(base, "trials: 10000", "trials: 0"));
  config_error(replaced(base, "qos_precision_m: 0.1", "qos_precision_m: 0"));
  config_error(replaced(base, "service: beamsteer-data", "service: teleport"));
  config_error(replaced(base, "methods: [rss, rss_aoa, beam_scan]", "methods: [rss, magic]"));
  config_error(replaced(base, "size: [8.0, 6.0, 3.0]", "size: [8.0, 6.0]"));
  config_error("seed: [");
}

TEST(Scenario, BadReferencesRejected) {
  const auto base = default_text();
  EXPECT_NE(config_error(replaced(base, "anchors: [1, 2, 3, 4]", "anchors: [1, 2, 3, 44]")).find("44"), std::string::npos);
  EXPECT_NE(config_error(replaced(base, "    panel: 1\n", "    panel: 9\n")).find("9"), std::string::npos);
  config_error(replaced(base, "{id: 2, position: [6.0, 1.0, 3.0]", "{id: 1, position: [6.0, 1.0, 3.0]"));
  config_error(replaced(base, "{id: 4, position: [6.0, 5.0, 3.0]", "{id: 4, position: [9.0, 5.0, 3.0]"));
  config_error(replaced(base, "first_id: 5", "first_id: 3"));
  config_error(replaced(base, "access_point: [4.0, 0.2, 2.5]", "access_point: [4.0, 0.2, 3.5]"));
}

TEST(Scenario, BuildSceneFromDefault) {
  const Scenario s = load_scenario("default");
  const Scene scene = build_scene(s);
  ASSERT_EQ(scene.panels.size(), 2u);
  EXPECT_EQ(scene.anchors.size(), 8u);
  EXPECT_EQ(scene.room.obstacles().size(), 7u);
  for (const auto& site : scene.panels) {
    EXPECT_GT(site.codebook.beamsteer_count(), 1u);
    EXPECT_EQ(site.codebook.size(), site.codebook.beamsteer_count() + 1);
    EXPECT_GT(site.hpbw_deg, 0.0);
    EXPECT_NEAR(site.grid.az_step_deg, 0.5 * site.hpbw_deg, 1e-12);
  }
  EXPECT_NEAR(scene.panels[0].hpbw_deg, 2.5388, 1e-3);
  EXPECT_NEAR(scene.panels[1].hpbw_deg, 10.209, 1e-3);
}

TEST(Scenario, BuildSceneOverrides) {
  const Scenario s = load_scenario("default");
  SceneOverrides o;
  o.with_obstacles = false;
  o.panel_ids = std::vector<int>{1};
  o.resize = PanelSize{10, 10};
  const Scene scene = build_scene(s, o);
  ASSERT_EQ(scene.panels.size(), 1u);
  EXPECT_EQ(scene.panels[0].panel.id(), 1);
  EXPECT_EQ(scene.panels[0].panel.rows(), 10);
  EXPECT_NEAR(scene.panels[0].hpbw_deg, 10.209, 1e-3);
  EXPECT_TRUE(scene.room.obstacles().empty());
  EXPECT_EQ(scene.anchors.size(), 8u);

  o.panel_ids = std::vector<int>{2};
  EXPECT_EQ(build_scene(s, o).anchors.size(), 4u);
}
