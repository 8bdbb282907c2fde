#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "olfc/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "olfcsim: closed-loop simulator for distributed load-side frequency control\n"
      "of integrated electricity-heat networks, with a centralized reference solver."};

  olfc::RunConfig config;
  std::string dump_preset;
  bool list_presets = false;
  app.add_option("--scenario", config.scenario_path, "Scenario JSON file to run")
      ->check(CLI::ExistingFile);
  app.add_option("--preset", config.preset, "Built-in scenario or experiment name");
  app.add_option("--out", config.out_dir, "Output root directory")->capture_default_str();
  app.add_option("--label", config.label,
                 "Output subdirectory below <out>/<name>/ (default: UTC timestamp)");
  app.add_option("--jobs", config.jobs, "Worker threads for sweep experiments")
      ->capture_default_str();
  app.add_option("--seed", config.seed, "Override the scenario's communication seed");
  app.add_option("--decimate", config.decimate, "Record every n-th integrator step");
  app.add_option("--dump-preset", dump_preset,
                 "Print a preset's fully-resolved scenario JSON and exit");
  app.add_flag("--list-presets", list_presets, "List presets and experiments, then exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (list_presets) {
      std::cout << "scenario presets:\n";
      for (const std::string& name : olfc::preset_names()) std::cout << "  " << name << "\n";
      std::cout << "experiments:\n";
      for (const std::string& name : olfc::experiment_names()) std::cout << "  " << name << "\n";
      return 0;
    }
    if (!dump_preset.empty()) {
      std::cout << olfc::scenario_to_json(olfc::preset_scenario(dump_preset));
      return 0;
    }
    return olfc::run_experiment(config, std::cout);
  } catch (const olfc::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const olfc::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const olfc::InfeasibleError& e) {
    std::cerr << "error: infeasible: " << e.what() << "\n";
    return 1;
  } catch (const olfc::NonConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const olfc::NumericalBlowup& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const olfc::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
