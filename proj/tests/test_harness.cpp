#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <set>

#include "bprx/harness.hpp"
#include "doctest.h"

using namespace bprx;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("bprx_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kTinyConfig = R"({
  "domain": "nav2d",
  "seed": 5,
  "trials": 1,
  "episodes": 1,
  "methods": ["ours-gp", "bpr-return"],
  "model": {"samples_per_task": 60},
  "baselines": {"return_table_episodes": 3},
  "targets": [{"goal": [10.5, 10.0]}]
})";

}  // namespace

TEST_CASE("config defaults resolve per domain") {
  const ExperimentConfig config = parse_config(R"({"domain": "nav2d"})");
  CHECK(config.sources.size() == 4);
  CHECK(config.targets.size() == 12);
  CHECK(config.resolved_signal_mode() == SignalMode::SAR);
  CHECK(config.layout().input_dim == 4);
  CHECK(config.layout().output_dim == 1);
  CHECK(config.resolved_novelty().threshold == -500.0);
  CHECK(config.trials == 10);
  CHECK(config.episodes == 10);

  const ExperimentConfig cp = parse_config(R"({"domain": "cartpole"})");
  CHECK(cp.sources.size() == 2);
  CHECK(cp.targets.size() == 6);
  CHECK(cp.resolved_signal_mode() == SignalMode::SAS);
  CHECK(cp.layout().input_dim == 6);
  CHECK(cp.layout().output_dim == 4);
  CHECK(cp.resolved_novelty().threshold == 30.0);
}

TEST_CASE("config validation rejects malformed input") {
  CHECK_THROWS_AS(parse_config("not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"domain": "maze"})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"methods": ["sarsa"]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"typo_key": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"trials": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": {"eps2_gp": -1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"targets": []})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"signal": {"batch": 0}})"), ConfigError);
}

TEST_CASE("csv emission round-trips") {
  std::vector<ResultRow> rows;
  rows.push_back(ResultRow{0, "ours-gp", "nav_10.5_10", 1, -55.25, 12.5});
  rows.push_back(ResultRow{3, "pr-drl", "cp_4.5", 10, 98.0, 0.125});
  rows.push_back(ResultRow{7, "bpr-return", "nav_-9_9", 2, -193.390625, 0.0});
  const std::string text = emit_csv(rows);
  CHECK(text.starts_with("trial,method,target_task,episode,return,wall_time_ms\n"));
  const auto parsed = parse_csv(text);
  REQUIRE(parsed.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(parsed[i].trial == rows[i].trial);
    CHECK(parsed[i].method == rows[i].method);
    CHECK(parsed[i].target_task == rows[i].target_task);
    CHECK(parsed[i].episode == rows[i].episode);
    CHECK(parsed[i].return_value == rows[i].return_value);
    CHECK(parsed[i].wall_time_ms == rows[i].wall_time_ms);
  }
  CHECK_THROWS(parse_csv("wrong,header\n1,2\n"));
}

TEST_CASE("summarize computes the 95% confidence half-width") {
  const std::vector<double> values{1.0, 2.0, 3.0, 4.0};
  const SummaryStat s = summarize(values);
  CHECK(s.mean == doctest::Approx(2.5));
  const double stddev = std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 3.0);
  CHECK(s.stderr_ == doctest::Approx(stddev / 2.0).epsilon(1e-12));
  CHECK(s.ci95_half == doctest::Approx(1.96 * s.stderr_).epsilon(1e-12));
  CHECK(summarize(std::vector<double>{5.0}).stderr_ == 0.0);
}

TEST_CASE("fit_sources writes a complete, reproducible library artifact") {
  const ExperimentConfig config = parse_config(R"({
    "domain": "nav2d",
    "seed": 9,
    "methods": ["ours-gp"],
    "model": {"samples_per_task": 80}
  })");
  const fs::path dir_a = temp_dir("lib_a");
  const fs::path dir_b = temp_dir("lib_b");
  fit_sources(config, dir_a);
  fit_sources(config, dir_b);

  CHECK(fs::exists(dir_a / "manifest.json"));
  int model_files = 0;
  for (const auto& entry : fs::directory_iterator(dir_a))
    if (entry.path().filename().string().starts_with("gp_")) ++model_files;
  CHECK(model_files == 4);

  for (const auto& entry : fs::directory_iterator(dir_a)) {
    const auto name = entry.path().filename();
    CHECK(read_text_file(dir_a / name) == read_text_file(dir_b / name));
  }

  const PolicyLibrary library = load_library(dir_a, ModelKind::gp);
  CHECK(library.size() == 4);
  CHECK(library.entries[0].task_id == "nav_10_10");
  CHECK(library.entries[0].model->kind() == ModelKind::gp);
  CHECK_THROWS_AS(load_library(dir_a, ModelKind::mlp), ConfigError);
  CHECK_THROWS_AS(load_library(temp_dir("empty"), ModelKind::gp), ConfigError);
}

TEST_CASE("run_experiment produces the full cross product of rows") {
  const ExperimentConfig config = parse_config(kTinyConfig);
  const PolicyLibrary library =
      fit_source_library(config, ModelKind::gp, config.seed, 60);
  const RunOutput output = run_experiment_with(config, library, nullptr, true);
  // trials x methods x targets x episodes = 1 * 2 * 1 * 1
  CHECK(output.rows.size() == 2);
  std::set<std::string> methods;
  for (const ResultRow& row : output.rows) {
    methods.insert(row.method);
    CHECK(row.episode == 1);
    CHECK(row.target_task == "nav_10.5_10");
  }
  CHECK(methods == std::set<std::string>{"ours-gp", "bpr-return"});
  CHECK(output.event_streams.size() == 2);

  // Event lines follow the documented schema.
  const std::string& stream = output.event_streams[0].second;
  CHECK(stream.find("\"belief\":[") != std::string::npos);
  CHECK(stream.find("\"phase\":\"reuse\"") != std::string::npos);
  CHECK(stream.find("\"selected_policy\":") != std::string::npos);
}

TEST_CASE("identical config and seed give byte-identical results") {
  ExperimentConfig config = parse_config(kTinyConfig);
  config.record_wall_time = false;
  config.episodes = 3;
  const PolicyLibrary library =
      fit_source_library(config, ModelKind::gp, config.seed, 60);
  const RunOutput a = run_experiment_with(config, library, nullptr, false);
  const RunOutput b = run_experiment_with(config, library, nullptr, false);
  CHECK(emit_csv(a.rows) == emit_csv(b.rows));
}

TEST_CASE("write_run_outputs lays out results, summary and event streams") {
  ExperimentConfig config = parse_config(kTinyConfig);
  const PolicyLibrary library =
      fit_source_library(config, ModelKind::gp, config.seed, 60);
  const RunOutput output = run_experiment_with(config, library, nullptr, true);
  const fs::path dir = temp_dir("run_out");
  write_run_outputs(output, dir);
  CHECK(fs::exists(dir / "results.csv"));
  CHECK(fs::exists(dir / "summary.csv"));
  CHECK(fs::exists(dir / "events" / "ours-gp__nav_10.5_10.jsonl"));
  const auto rows = parse_csv(read_text_file(dir / "results.csv"));
  CHECK(rows.size() == output.rows.size());
}

TEST_CASE("ablation rejects an empty size list and tags methods by size") {
  ExperimentConfig config = parse_config(kTinyConfig);
  CHECK_THROWS_AS(run_ablation(config, std::vector<int>{}), ConfigError);

  config.trials = 2;
  config.episodes = 2;
  config.ablation_targets = {make_nav2d_task(10.5, 10.0)};
  const auto rows = run_ablation(config, std::vector<int>{40, 80});
  // sizes x trials x targets x episodes = 2 * 2 * 1 * 2
  CHECK(rows.size() == 8);
  std::set<std::string> methods;
  for (const ResultRow& row : rows) methods.insert(row.method);
  CHECK(methods == std::set<std::string>{"ours-gp@40", "ours-gp@80"});
}

TEST_CASE("continual runner leaves near-source targets alone") {
  ExperimentConfig config = parse_config(R"({
    "domain": "nav2d",
    "seed": 3,
    "trials": 1,
    "episodes": 4,
    "methods": ["ours-gp"],
    "model": {"samples_per_task": 80},
    "baselines": {"return_table_episodes": 2},
    "targets": [{"goal": [10.5, 10.0]}]
  })");
  const PolicyLibrary library =
      fit_source_library(config, ModelKind::gp, config.seed, 80);
  const ContinualOutput output = run_continual_with(config, library);
  REQUIRE(output.growth_log.size() == 1);
  CHECK(output.growth_log[0].detection_episode == -1);
  CHECK(output.growth_log[0].expansions == 0);
  CHECK(output.growth_log[0].library_size_after == 4);
}

TEST_CASE("plots render one line and band per method") {
  ExperimentConfig config = parse_config(kTinyConfig);
  config.episodes = 4;
  config.trials = 3;
  const PolicyLibrary library =
      fit_source_library(config, ModelKind::gp, config.seed, 60);
  const RunOutput output = run_experiment_with(config, library, nullptr, false);
  const std::string svg = render_plot_svg(output.rows);

  auto count = [&svg](const std::string& needle) {
    std::size_t n = 0, pos = 0;
    while ((pos = svg.find(needle, pos)) != std::string::npos) {
      ++n;
      pos += needle.size();
    }
    return n;
  };
  CHECK(count("class=\"mean-line\"") == 2);
  CHECK(count("class=\"ci-band\"") == 2);

  CHECK_THROWS(render_plot_svg(std::vector<ResultRow>{}));

  const fs::path dir = temp_dir("plots");
  write_text_file(dir / "results.csv", emit_csv(output.rows));
  emit_plots(dir / "results.csv", dir);
  CHECK(fs::exists(dir / "returns.svg"));
}

TEST_CASE("growth log serializes to json") {
  ContinualTargetLog log;
  log.trial = 2;
  log.target_task = "nav_0_10";
  log.detection_episode = 3;
  log.expansions = 1;
  log.library_size_after = 5;
  log.steps_to_adopt = 4;
  const std::string text = growth_log_json(std::vector<ContinualTargetLog>{log});
  CHECK(text.find("\"target_task\": \"nav_0_10\"") != std::string::npos);
  CHECK(text.find("\"detection_episode\": 3") != std::string::npos);
}
