#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bprx/baselines.hpp"
#include "bprx/core.hpp"
#include "bprx/dynamics.hpp"
#include "bprx/engine.hpp"
#include "bprx/environments.hpp"
#include "bprx/policies.hpp"

namespace bprx {

// Raised for malformed configs, unknown methods, missing artifacts; the CLI
// maps it to exit code 1 (runtime failures map to 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Method { ours_gp, ours_mlp, bpr_return, pr_drl, ops_drl };

const char* to_string(Method method);
Method method_from_string(const std::string& name);

struct ExperimentConfig {
  Domain domain = Domain::nav2d;
  std::uint64_t seed = 1;
  int trials = 10;
  int episodes = 10;  // K
  std::vector<Method> methods = {Method::ours_gp, Method::bpr_return,
                                 Method::pr_drl, Method::ops_drl};

  // Environment parameters applied to every task of the domain.
  Nav2dTask nav2d_base;
  CartPoleTask cartpole_base;

  // Observation signal; mode defaults per domain, N0 = batch.
  std::optional<SignalMode> signal_mode;
  int signal_batch = 1;

  // Dynamics-model fitting.
  int samples_per_task = 200;
  DynamicsFitConfig fit;
  LikelihoodConfig likelihood;

  SelectionMode selection = SelectionMode::greedy;
  DiscountConfig discount{1.0};
  std::optional<NoveltyConfig> novelty;  // defaults per domain
  CemConfig cem;
  LearningBudget learning;
  ReturnTableConfig return_table;

  std::vector<TaskSpec> sources;  // defaults to make_source_suite(domain)
  std::vector<TaskSpec> targets;  // defaults to make_target_suite(domain)
  bool targets_explicit = false;  // set when the config file names targets

  std::vector<int> ablation_sizes = {100, 200, 500, 1000, 2000};
  std::vector<TaskSpec> ablation_targets;  // defaults to one target per source

  bool record_wall_time = true;

  SignalMode resolved_signal_mode() const {
    return signal_mode.value_or(default_signal_mode(domain));
  }
  NoveltyConfig resolved_novelty() const {
    if (novelty) return *novelty;
    return domain == Domain::nav2d ? NoveltyConfig{3, -500.0}
                                   : NoveltyConfig{3, 30.0};
  }
  SignalLayout layout() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text);

struct ResultRow {
  int trial = 0;
  std::string method;
  std::string target_task;
  int episode = 0;  // 1-based
  double return_value = 0.0;
  double wall_time_ms = 0.0;
};

std::string emit_csv(std::span<const ResultRow> rows);
std::vector<ResultRow> parse_csv(const std::string& text);

struct SummaryStat {
  double mean = 0.0;
  double stderr_ = 0.0;
  double ci95_half = 0.0;  // 1.96 * stderr
  int count = 0;
};

SummaryStat summarize(std::span<const double> values);

// Fits source policies and dynamics models and writes the library artifact
// (manifest.json plus one model file per task and kind).
void fit_sources(const ExperimentConfig& config, const std::filesystem::path& out_dir);

// In-memory variant: fit the library for one model kind.
PolicyLibrary fit_source_library(const ExperimentConfig& config, ModelKind kind,
                                 std::uint64_t seed, int samples_per_task);

PolicyLibrary load_library(const std::filesystem::path& dir, ModelKind kind);

struct RunOutput {
  std::vector<ResultRow> rows;
  // One JSONL event stream per (method, target), keyed by
  // "<method>__<target>".
  std::vector<std::pair<std::string, std::string>> event_streams;
};

// Full cross product of trials x methods x targets, K episodes each.
RunOutput run_experiment(const ExperimentConfig& config,
                         const std::filesystem::path& library_dir);
RunOutput run_experiment_with(const ExperimentConfig& config,
                              const PolicyLibrary& gp_library,
                              const PolicyLibrary* mlp_library = nullptr,
                              bool capture_events = false);

// Refits the library per (size, trial) and runs the first ours-* method on
// the ablation targets; rows carry method names like "ours-gp@200".
std::vector<ResultRow> run_ablation(const ExperimentConfig& config,
                                    std::span<const int> sizes);

struct ContinualTargetLog {
  int trial = 0;
  std::string target_task;
  int detection_episode = -1;  // 1-based; -1 when never detected
  int expansions = 0;
  int library_size_after = 0;
  double final_return_ours = 0.0;
  double final_return_bpr = 0.0;
  // First belief weight of the expanded entry exceeding 0.9, as a step count
  // after the expansion; -1 if never.
  int steps_to_adopt = -1;
};

struct ContinualOutput {
  std::vector<ResultRow> rows;  // methods "ours-gp" (or mlp) and "bpr-return"
  std::vector<ContinualTargetLog> growth_log;
};

// Continual-learning protocol: reuse until novelty fires, learn + expand,
// then keep reusing; frozen-library bpr-return runs for comparison.
ContinualOutput run_continual(const ExperimentConfig& config,
                              const std::filesystem::path& library_dir);
ContinualOutput run_continual_with(const ExperimentConfig& config,
                                   const PolicyLibrary& library);

// Mean-return-per-episode curves with 95% CI bands, one line per method.
std::string render_plot_svg(std::span<const ResultRow> rows);
void emit_plots(const std::filesystem::path& results_csv,
                const std::filesystem::path& out_dir);

void write_run_outputs(const RunOutput& output, const std::filesystem::path& out_dir);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

std::string growth_log_json(std::span<const ContinualTargetLog> log);

}  // namespace bprx
