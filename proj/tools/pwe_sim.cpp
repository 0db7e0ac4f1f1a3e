// Command-line front end: one subcommand per experiment, CSV out.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "pwe/experiments.hpp"

namespace {

struct Args {
  std::string config = "default";
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

int run(const std::string& subcommand, const Args& args) {
  std::string text;
  pwe::Scenario scenario;
  try {
    text = pwe::scenario_text(args.config);
    scenario = pwe::parse_scenario(text, args.config);
  } catch (const pwe::Error& e) {
    std::cerr << "pwe_sim: " << e.what() << "\n";
    return 1;
  }
  if (args.seed) scenario.seed = *args.seed;

  try {
    const auto outputs = pwe::run_subcommand(subcommand, scenario);
    const std::filesystem::path dir(args.out);
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : outputs) pwe::write_file(dir / name, content);
    pwe::write_file(dir / "manifest", pwe::manifest_text(subcommand, args.config, text, scenario.seed, outputs));
    for (const auto& [name, content] : outputs) std::cout << (dir / name).string() << "\n";
  } catch (const pwe::Error& e) {
    std::cerr << "pwe_sim: " << e.what() << "\n";
    return e.code() == pwe::ErrorCode::ConfigError ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "pwe_sim: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optical-anchor localization and RIS configuration experiments", "pwe_sim"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pwe::kVersion));

  Args args;
  const std::map<std::string, std::string> help{
      {"scattering", "Normalized scattering diagrams and HPBW per panel size"},
      {"tolerated-error", "Tolerated localization error versus RIS-UE distance"},
      {"error-vs-k", "RSS localization error versus the LoS/NLoS ratio K"},
      {"inbeam", "End-to-end in-beam probability per method and panel size"},
      {"latc-run", "One protocol run per configured UE"},
  };
  for (const auto& name : pwe::subcommands()) {
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", args.config, "Scenario YAML file, or 'default' for the bundled scenario");
    sub->add_option("--seed", args.seed, "Root seed (overrides the scenario's)");
    sub->add_option("--out", args.out, "Output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "pwe_sim: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  for (CLI::App* sub : app.get_subcommands()) return run(sub->get_name(), args);
  return 1;
}
