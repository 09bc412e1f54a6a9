#include "idikit/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

int write_outputs(const idikit::RunRecord& rec, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, text] : rec.files) {
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    if (!out) {
      std::cerr << "idikit: cannot write " << (std::filesystem::path(dir) / name).string() << "\n";
      return 1;
    }
    out << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete approximation, optimization and optimality-condition checks for Volterra integro-differential "
               "inclusions"};
  app.set_version_flag("--version", std::string(idikit::kVersion));
  app.require_subcommand(1);
  std::string config;
  struct Cmd {
    const char* name;
    const char* help;
    const char* main_file;
    idikit::RunRecord (*run)(const idikit::ExperimentConfig&);
  };
  const Cmd cmds[] = {
      {"converge", "mesh sweep: approximation errors, (P_k) solutions and residuals per k", "converge.csv",
       idikit::run_convergence_study},
      {"audit", "a-priori bounds, declared constants, kernel growth and Gronwall suites", "audit.csv",
       idikit::run_bound_audit},
      {"simulate", "forward trajectories for each selection policy and mesh", "simulate.csv", idikit::run_simulate},
      {"conditions", "discrete Euler-Lagrange, transversality and Volterra residuals", "conditions.csv",
       idikit::run_conditions},
  };
  for (const auto& c : cmds) app.add_subcommand(c.name, c.help)->add_option("config", config, "experiment config file")->required();
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // bad invocation counts as a config error
  }

  for (const auto& c : cmds) {
    if (!app.got_subcommand(c.name)) continue;
    idikit::ExperimentConfig cfg = [&] {
      try {
        return idikit::load_experiment(config);
      } catch (const idikit::ConfigError& e) {
        std::cerr << "idikit: " << e.what() << "\n";
        std::exit(2);
      }
    }();
    try {
      idikit::RunRecord rec = c.run(cfg);
      if (write_outputs(rec, cfg.output_dir) != 0) return 1;
      std::cout << rec.files.at(c.main_file);
      return rec.exit_code;
    } catch (const std::exception& e) {
      std::cerr << "idikit: " << e.what() << "\n";
      return 1;
    }
  }
  return 1;
}
