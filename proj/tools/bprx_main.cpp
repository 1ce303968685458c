#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bprx/harness.hpp"

namespace {

bprx::ExperimentConfig load(const std::string& config_path,
                            std::optional<std::uint64_t> seed) {
  bprx::ExperimentConfig config = bprx::load_config(config_path);
  if (seed) config.seed = *seed;
  return config;
}

std::vector<int> parse_sizes(const std::string& csv) {
  std::vector<int> sizes;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string item =
        csv.substr(pos, comma == std::string::npos ? std::string::npos
                                                   : comma - pos);
    if (!item.empty()) sizes.push_back(std::stoi(item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return sizes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian policy reuse with dynamics-model observation signals"};
  app.require_subcommand(1);

  std::string config_path, library_dir, out_dir, results_csv, sizes_csv;
  std::optional<std::uint64_t> seed;

  auto* fit = app.add_subcommand("fit-sources",
                                 "Fit source policies and dynamics models");
  fit->add_option("--config", config_path, "experiment config (JSON)")->required();
  fit->add_option("--out", out_dir, "library output directory")->required();
  fit->add_option("--seed", seed, "override the config seed");

  auto* run = app.add_subcommand("run", "Run the method comparison");
  run->add_option("--config", config_path)->required();
  run->add_option("--library", library_dir, "library directory")->required();
  run->add_option("--out", out_dir)->required();
  run->add_option("--seed", seed);

  auto* ablate = app.add_subcommand("ablate", "Sweep dynamics-model sample sizes");
  ablate->add_option("--config", config_path)->required();
  ablate->add_option("--sizes", sizes_csv, "comma-separated sample sizes");
  ablate->add_option("--out", out_dir)->required();
  ablate->add_option("--seed", seed);

  auto* continual =
      app.add_subcommand("continual", "Continual-learning protocol");
  continual->add_option("--config", config_path)->required();
  continual->add_option("--library", library_dir)->required();
  continual->add_option("--out", out_dir)->required();
  continual->add_option("--seed", seed);

  auto* plot = app.add_subcommand("plot", "Render return curves as SVG");
  plot->add_option("--results", results_csv, "results csv")->required();
  plot->add_option("--out", out_dir)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) {
      bprx::fit_sources(load(config_path, seed), out_dir);
      std::cout << "library written to " << out_dir << "\n";
    } else if (run->parsed()) {
      const auto config = load(config_path, seed);
      const bprx::RunOutput output = bprx::run_experiment(config, library_dir);
      bprx::write_run_outputs(output, out_dir);
      std::cout << output.rows.size() << " result rows -> " << out_dir << "\n";
    } else if (ablate->parsed()) {
      const auto config = load(config_path, seed);
      const std::vector<int> sizes =
          sizes_csv.empty() ? config.ablation_sizes : parse_sizes(sizes_csv);
      const auto rows = bprx::run_ablation(config, sizes);
      std::filesystem::create_directories(out_dir);
      bprx::write_text_file(std::filesystem::path(out_dir) / "ablation.csv",
                            bprx::emit_csv(rows));
      std::cout << rows.size() << " result rows -> " << out_dir << "\n";
    } else if (continual->parsed()) {
      const auto config = load(config_path, seed);
      const bprx::ContinualOutput output =
          bprx::run_continual(config, library_dir);
      std::filesystem::create_directories(out_dir);
      bprx::write_text_file(std::filesystem::path(out_dir) / "results.csv",
                            bprx::emit_csv(output.rows));
      bprx::write_text_file(std::filesystem::path(out_dir) / "growth_log.json",
                            bprx::growth_log_json(output.growth_log));
      std::cout << output.rows.size() << " result rows -> " << out_dir << "\n";
    } else if (plot->parsed()) {
      bprx::emit_plots(results_csv, out_dir);
      std::cout << "plot written to " << out_dir << "\n";
    }
  } catch (const bprx::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
