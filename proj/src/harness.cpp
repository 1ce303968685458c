#include "bprx/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace bprx {

using nlohmann::json;

const char* to_string(Method method) {
  switch (method) {
    case Method::ours_gp: return "ours-gp";
    case Method::ours_mlp: return "ours-mlp";
    case Method::bpr_return: return "bpr-return";
    case Method::pr_drl: return "pr-drl";
    case Method::ops_drl: return "ops-drl";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "ours-gp") return Method::ours_gp;
  if (name == "ours-mlp") return Method::ours_mlp;
  if (name == "bpr-return") return Method::bpr_return;
  if (name == "pr-drl") return Method::pr_drl;
  if (name == "ops-drl") return Method::ops_drl;
  throw ConfigError("unknown method: " + name);
}

SignalLayout ExperimentConfig::layout() const {
  const int state_dim = domain == Domain::nav2d ? 2 : 4;
  const int action_dim = 2;  // nav2d vector / cartpole one-hot
  return make_signal_layout(resolved_signal_mode(), state_dim, action_dim,
                            signal_batch);
}

namespace {

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key))
      throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config: bad value for '") + key + "'");
    }
  }
}

Nav2dTask parse_nav2d_base(const json& j, Nav2dTask base) {
  require_keys(j, {"control_cost", "goal_radius", "max_steps", "start"},
               "config.env.nav2d");
  read_field(j, "control_cost", base.control_cost);
  read_field(j, "goal_radius", base.goal_radius);
  read_field(j, "max_steps", base.max_steps);
  if (j.contains("start")) {
    const auto s = j.at("start").get<std::vector<double>>();
    if (s.size() != 2) throw ConfigError("config: nav2d start must be 2-D");
    base.start = {s[0], s[1]};
  }
  return base;
}

CartPoleTask parse_cartpole_base(const json& j, CartPoleTask base) {
  require_keys(j,
               {"gravity", "mass_cart", "mass_pole", "half_length", "time_step",
                "force", "reward_angle_deg", "termination_angle_deg",
                "position_bound", "max_steps"},
               "config.env.cartpole");
  read_field(j, "gravity", base.gravity);
  read_field(j, "mass_cart", base.mass_cart);
  read_field(j, "mass_pole", base.mass_pole);
  read_field(j, "half_length", base.half_length);
  read_field(j, "time_step", base.time_step);
  read_field(j, "force", base.force);
  read_field(j, "position_bound", base.position_bound);
  read_field(j, "max_steps", base.max_steps);
  constexpr double deg = 3.14159265358979323846 / 180.0;
  if (j.contains("reward_angle_deg"))
    base.reward_angle = j.at("reward_angle_deg").get<double>() * deg;
  if (j.contains("termination_angle_deg"))
    base.termination_angle = j.at("termination_angle_deg").get<double>() * deg;
  return base;
}

TaskSpec parse_task(const json& j, const ExperimentConfig& config) {
  require_keys(j, {"goal", "disturbance"}, "config task");
  if (config.domain == Domain::nav2d) {
    if (!j.contains("goal"))
      throw ConfigError("config: nav2d task needs a 'goal'");
    const auto g = j.at("goal").get<std::vector<double>>();
    if (g.size() != 2) throw ConfigError("config: nav2d goal must be 2-D");
    return make_nav2d_task(g[0], g[1], config.nav2d_base);
  }
  if (!j.contains("disturbance"))
    throw ConfigError("config: cartpole task needs a 'disturbance'");
  return make_cartpole_task(j.at("disturbance").get<double>(),
                            config.cartpole_base);
}

std::vector<TaskSpec> rebuild_suite(const std::vector<TaskSpec>& suite,
                                    const ExperimentConfig& config) {
  std::vector<TaskSpec> out;
  out.reserve(suite.size());
  for (const TaskSpec& spec : suite) {
    if (config.domain == Domain::nav2d) {
      const auto& t = std::get<Nav2dTask>(spec.task);
      out.push_back(make_nav2d_task(t.goal[0], t.goal[1], config.nav2d_base));
    } else {
      const auto& t = std::get<CartPoleTask>(spec.task);
      out.push_back(make_cartpole_task(t.disturbance, config.cartpole_base));
    }
  }
  return out;
}

std::vector<TaskSpec> default_ablation_targets(const ExperimentConfig& config) {
  std::vector<TaskSpec> out;
  if (config.domain == Domain::nav2d) {
    out.push_back(make_nav2d_task(10.5, 10, config.nav2d_base));
    out.push_back(make_nav2d_task(-8.5, 9, config.nav2d_base));
    out.push_back(make_nav2d_task(-6.5, -7, config.nav2d_base));
    out.push_back(make_nav2d_task(7.5, -8, config.nav2d_base));
  } else {
    out.push_back(make_cartpole_task(4.5, config.cartpole_base));
    out.push_back(make_cartpole_task(-5.5, config.cartpole_base));
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }

  require_keys(j,
               {"domain", "seed", "trials", "episodes", "methods", "signal",
                "model", "selection", "gamma", "novelty", "cem", "baselines",
                "env", "sources", "targets", "ablation", "learning",
                "record_wall_time"},
               "config");

  ExperimentConfig config;
  if (j.contains("domain"))
    config.domain = domain_from_string(j.at("domain").get<std::string>());
  read_field(j, "seed", config.seed);
  read_field(j, "trials", config.trials);
  read_field(j, "episodes", config.episodes);
  read_field(j, "record_wall_time", config.record_wall_time);
  if (config.trials < 1) throw ConfigError("config: trials must be >= 1");
  if (config.episodes < 1) throw ConfigError("config: episodes (K) must be >= 1");

  if (j.contains("methods")) {
    config.methods.clear();
    for (const auto& m : j.at("methods"))
      config.methods.push_back(method_from_string(m.get<std::string>()));
    if (config.methods.empty())
      throw ConfigError("config: methods must not be empty");
  }

  if (j.contains("env")) {
    require_keys(j.at("env"), {"nav2d", "cartpole"}, "config.env");
    if (j.at("env").contains("nav2d"))
      config.nav2d_base = parse_nav2d_base(j.at("env").at("nav2d"), {});
    if (j.at("env").contains("cartpole"))
      config.cartpole_base = parse_cartpole_base(j.at("env").at("cartpole"), {});
  }

  if (j.contains("signal")) {
    const json& s = j.at("signal");
    require_keys(s, {"mode", "batch"}, "config.signal");
    if (s.contains("mode"))
      config.signal_mode = signal_mode_from_string(s.at("mode").get<std::string>());
    read_field(s, "batch", config.signal_batch);
    if (config.signal_batch < 1)
      throw ConfigError("config: signal batch N0 must be >= 1");
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    require_keys(m,
                 {"kind", "samples_per_task", "gp", "mlp", "eps2_gp", "eps2_nn"},
                 "config.model");
    if (m.contains("kind")) {
      const std::string kind = m.at("kind").get<std::string>();
      if (kind == "gp") config.fit.kind = ModelKind::gp;
      else if (kind == "mlp") config.fit.kind = ModelKind::mlp;
      else throw ConfigError("config: model.kind must be 'gp' or 'mlp'");
    }
    read_field(m, "samples_per_task", config.samples_per_task);
    if (config.samples_per_task < 1)
      throw ConfigError("config: samples_per_task must be >= 1");
    if (m.contains("gp")) {
      const json& g = m.at("gp");
      require_keys(g, {"delta", "l", "noise", "jitter", "train_cap"},
                   "config.model.gp");
      read_field(g, "delta", config.fit.kernel.delta);
      read_field(g, "l", config.fit.kernel.l);
      read_field(g, "noise", config.fit.gp_noise);
      read_field(g, "jitter", config.fit.gp_jitter);
      read_field(g, "train_cap", config.fit.gp_train_cap);
      if (!(config.fit.kernel.delta > 0.0) || !(config.fit.kernel.l > 0.0))
        throw ConfigError("config: kernel delta and l must be > 0");
    }
    if (m.contains("mlp")) {
      const json& n = m.at("mlp");
      require_keys(n,
                   {"hidden", "epochs", "learning_rate", "momentum", "batch_size"},
                   "config.model.mlp");
      read_field(n, "hidden", config.fit.mlp.hidden);
      read_field(n, "epochs", config.fit.mlp.epochs);
      read_field(n, "learning_rate", config.fit.mlp.learning_rate);
      read_field(n, "momentum", config.fit.mlp.momentum);
      read_field(n, "batch_size", config.fit.mlp.batch_size);
    }
    read_field(m, "eps2_gp", config.likelihood.eps2_gp);
    read_field(m, "eps2_nn", config.likelihood.eps2_nn);
    if (!(config.likelihood.eps2_gp > 0.0) || !(config.likelihood.eps2_nn > 0.0))
      throw ConfigError("config: eps2_gp and eps2_nn must be > 0");
  }

  if (j.contains("selection")) {
    const std::string s = j.at("selection").get<std::string>();
    if (s == "greedy") config.selection = SelectionMode::greedy;
    else if (s == "sample") config.selection = SelectionMode::sample;
    else throw ConfigError("config: selection must be 'greedy' or 'sample'");
  }

  if (j.contains("gamma")) {
    config.discount.gamma = j.at("gamma").get<double>();
    if (config.discount.gamma < 0.0 || config.discount.gamma > 1.0)
      throw ConfigError("config: gamma must be in [0, 1]");
  }

  if (j.contains("novelty")) {
    const json& n = j.at("novelty");
    require_keys(n, {"k", "threshold"}, "config.novelty");
    NoveltyConfig novelty = config.resolved_novelty();
    read_field(n, "k", novelty.k);
    read_field(n, "threshold", novelty.threshold);
    if (novelty.k < 1) throw ConfigError("config: novelty k must be >= 1");
    config.novelty = novelty;
  }

  if (j.contains("cem")) {
    const json& c = j.at("cem");
    require_keys(c, {"population", "elite_fraction", "iterations", "init_stddev"},
                 "config.cem");
    read_field(c, "population", config.cem.population);
    read_field(c, "elite_fraction", config.cem.elite_fraction);
    read_field(c, "iterations", config.cem.iterations);
    read_field(c, "init_stddev", config.cem.init_stddev);
    if (config.cem.population < 1 || config.cem.iterations < 1)
      throw ConfigError("config: cem budget must be >= 1");
  }

  if (j.contains("baselines")) {
    const json& b = j.at("baselines");
    require_keys(b, {"return_table_episodes", "eps2_u"}, "config.baselines");
    read_field(b, "return_table_episodes", config.return_table.episodes_per_pair);
    read_field(b, "eps2_u", config.return_table.eps2_u);
    if (config.return_table.episodes_per_pair < 1)
      throw ConfigError("config: return_table_episodes must be >= 1");
  }

  if (j.contains("learning")) {
    require_keys(j.at("learning"), {"sample_count"}, "config.learning");
    read_field(j.at("learning"), "sample_count", config.learning.sample_count);
    if (config.learning.sample_count < 1)
      throw ConfigError("config: learning sample_count must be >= 1");
  }

  // Task suites are built last so they pick up the env overrides.
  config.sources = rebuild_suite(make_source_suite(config.domain), config);
  if (j.contains("sources") && !j.at("sources").is_string()) {
    config.sources.clear();
    for (const auto& t : j.at("sources"))
      config.sources.push_back(parse_task(t, config));
    if (config.sources.empty()) throw ConfigError("config: sources are empty");
  }

  config.targets = rebuild_suite(make_target_suite(config.domain), config);
  if (j.contains("targets")) {
    config.targets_explicit = true;
    const json& t = j.at("targets");
    if (t.is_string()) {
      const std::string name = t.get<std::string>();
      if (name == "near")
        config.targets = rebuild_suite(make_target_suite(config.domain), config);
      else if (name == "continual")
        config.targets =
            rebuild_suite(make_continual_suite(config.domain), config);
      else
        throw ConfigError("config: targets must be 'near', 'continual' or a list");
    } else {
      config.targets.clear();
      for (const auto& item : t) config.targets.push_back(parse_task(item, config));
      if (config.targets.empty()) throw ConfigError("config: targets are empty");
    }
  }

  config.ablation_targets = default_ablation_targets(config);
  if (j.contains("ablation")) {
    const json& a = j.at("ablation");
    require_keys(a, {"sizes", "targets"}, "config.ablation");
    read_field(a, "sizes", config.ablation_sizes);
    if (a.contains("targets")) {
      config.ablation_targets.clear();
      for (const auto& item : a.at("targets"))
        config.ablation_targets.push_back(parse_task(item, config));
    }
  }

  std::set<std::string> ids;
  for (const TaskSpec& s : config.sources)
    if (!ids.insert(s.id).second)
      throw ConfigError("config: duplicate source task " + s.id);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace {

std::string format_double(double v) {
  char buf[40];
  const auto result = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, result.ptr);
}

double parse_double(std::string_view s, const char* where) {
  double v = 0.0;
  const auto result = std::from_chars(s.data(), s.data() + s.size(), v);
  if (result.ec != std::errc() || result.ptr != s.data() + s.size())
    throw std::runtime_error(std::string(where) + ": bad number '" +
                             std::string(s) + "'");
  return v;
}

}  // namespace

std::string emit_csv(std::span<const ResultRow> rows) {
  std::string out = "trial,method,target_task,episode,return,wall_time_ms\n";
  for (const ResultRow& r : rows) {
    out += std::to_string(r.trial);
    out += ',';
    out += r.method;
    out += ',';
    out += r.target_task;
    out += ',';
    out += std::to_string(r.episode);
    out += ',';
    out += format_double(r.return_value);
    out += ',';
    out += format_double(r.wall_time_ms);
    out += '\n';
  }
  return out;
}

std::vector<ResultRow> parse_csv(const std::string& text) {
  std::vector<ResultRow> rows;
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line) ||
      line != "trial,method,target_task,episode,return,wall_time_ms")
    throw std::runtime_error("results csv: bad or missing header");
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(pos));
        break;
      }
      fields.push_back(line.substr(pos, comma - pos));
      pos = comma + 1;
    }
    if (fields.size() != 6)
      throw std::runtime_error("results csv: expected 6 fields per row");
    ResultRow r;
    r.trial = static_cast<int>(parse_double(fields[0], "csv trial"));
    r.method = fields[1];
    r.target_task = fields[2];
    r.episode = static_cast<int>(parse_double(fields[3], "csv episode"));
    r.return_value = parse_double(fields[4], "csv return");
    r.wall_time_ms = parse_double(fields[5], "csv wall_time_ms");
    rows.push_back(std::move(r));
  }
  return rows;
}

SummaryStat summarize(std::span<const double> values) {
  SummaryStat s;
  s.count = static_cast<int>(values.size());
  if (s.count == 0) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.count;
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stderr_ = std::sqrt(ss / (s.count - 1)) / std::sqrt(s.count);
  }
  s.ci95_half = 1.96 * s.stderr_;
  return s;
}

namespace {

json task_to_json(const TaskSpec& spec) {
  json j;
  j["id"] = spec.id;
  j["domain"] = to_string(spec.domain());
  if (spec.domain() == Domain::nav2d) {
    const auto& t = std::get<Nav2dTask>(spec.task);
    j["goal"] = {t.goal[0], t.goal[1]};
    j["start"] = {t.start[0], t.start[1]};
    j["goal_radius"] = t.goal_radius;
    j["max_steps"] = t.max_steps;
    j["control_cost"] = t.control_cost;
  } else {
    const auto& t = std::get<CartPoleTask>(spec.task);
    j["gravity"] = t.gravity;
    j["mass_cart"] = t.mass_cart;
    j["mass_pole"] = t.mass_pole;
    j["half_length"] = t.half_length;
    j["time_step"] = t.time_step;
    j["force"] = t.force;
    j["disturbance"] = t.disturbance;
    j["reward_angle"] = t.reward_angle;
    j["termination_angle"] = t.termination_angle;
    j["position_bound"] = t.position_bound;
    j["max_steps"] = t.max_steps;
  }
  return j;
}

TaskSpec task_from_json(const json& j) {
  const Domain domain = domain_from_string(j.at("domain").get<std::string>());
  TaskSpec spec;
  spec.id = j.at("id").get<std::string>();
  if (domain == Domain::nav2d) {
    Nav2dTask t;
    const auto goal = j.at("goal").get<std::vector<double>>();
    const auto start = j.at("start").get<std::vector<double>>();
    t.goal = {goal.at(0), goal.at(1)};
    t.start = {start.at(0), start.at(1)};
    t.goal_radius = j.at("goal_radius").get<double>();
    t.max_steps = j.at("max_steps").get<int>();
    t.control_cost = j.at("control_cost").get<double>();
    spec.task = t;
  } else {
    CartPoleTask t;
    t.gravity = j.at("gravity").get<double>();
    t.mass_cart = j.at("mass_cart").get<double>();
    t.mass_pole = j.at("mass_pole").get<double>();
    t.half_length = j.at("half_length").get<double>();
    t.time_step = j.at("time_step").get<double>();
    t.force = j.at("force").get<double>();
    t.disturbance = j.at("disturbance").get<double>();
    t.reward_angle = j.at("reward_angle").get<double>();
    t.termination_angle = j.at("termination_angle").get<double>();
    t.position_bound = j.at("position_bound").get<double>();
    t.max_steps = j.at("max_steps").get<int>();
    spec.task = t;
  }
  return spec;
}

const char* kind_name(ModelKind kind) {
  return kind == ModelKind::gp ? "gp" : "mlp";
}

std::vector<ModelKind> kinds_needed(const ExperimentConfig& config) {
  std::vector<ModelKind> kinds;
  auto add = [&kinds](ModelKind k) {
    if (std::find(kinds.begin(), kinds.end(), k) == kinds.end())
      kinds.push_back(k);
  };
  for (Method m : config.methods) {
    if (m == Method::ours_gp) add(ModelKind::gp);
    if (m == Method::ours_mlp) add(ModelKind::mlp);
  }
  if (kinds.empty()) add(config.fit.kind);
  return kinds;
}

}  // namespace

PolicyLibrary fit_source_library(const ExperimentConfig& config, ModelKind kind,
                                 std::uint64_t seed, int samples_per_task) {
  PolicyLibrary library;
  const SignalLayout layout = config.layout();
  DynamicsFitConfig fit = config.fit;
  fit.kind = kind;
  for (const TaskSpec& task : config.sources) {
    Rng rng(derive_seed(seed, fnv1a64("fit-sources"), fnv1a64(task.id),
                        static_cast<std::uint64_t>(samples_per_task)));
    auto env = make_environment(task);
    PolicyPtr policy = make_scripted_policy(task);
    const auto samples = collect_samples(*env, *policy, samples_per_task, 0.5, rng);
    DynamicsModelPtr model = fit_dynamics_model(samples, layout, fit, rng);
    library.entries.push_back(LibraryEntry{task.id, task, policy, model});
  }
  return library;
}

void fit_sources(const ExperimentConfig& config,
                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto kinds = kinds_needed(config);
  const SignalLayout layout = config.layout();

  json manifest;
  manifest["version"] = 1;
  manifest["domain"] = to_string(config.domain);
  manifest["seed"] = config.seed;
  manifest["samples_per_task"] = config.samples_per_task;
  manifest["layout"] = {{"mode", to_string(layout.mode)},
                        {"input_dim", layout.input_dim},
                        {"output_dim", layout.output_dim}};
  json kinds_json = json::array();
  for (ModelKind k : kinds) kinds_json.push_back(kind_name(k));
  manifest["kinds"] = kinds_json;

  json entries = json::array();
  std::vector<std::vector<std::string>> files_per_kind;
  std::map<std::string, std::map<std::string, std::string>> model_files;
  for (ModelKind kind : kinds) {
    PolicyLibrary library;
    try {
      library =
          fit_source_library(config, kind, config.seed, config.samples_per_task);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("fit-sources failed (") +
                               kind_name(kind) + "): " + e.what());
    }
    for (const LibraryEntry& entry : library.entries) {
      const std::string file =
          std::string(kind_name(kind)) + "_" + entry.task_id + ".json";
      write_text_file(out_dir / file, serialize_model(*entry.model));
      model_files[entry.task_id][kind_name(kind)] = file;
    }
  }

  for (const TaskSpec& task : config.sources) {
    json e;
    e["task_id"] = task.id;
    e["task"] = task_to_json(task);
    e["policy"] = {{"kind", config.domain == Domain::nav2d
                                ? "nav_controller"
                                : "cartpole_controller"}};
    e["fit_samples"] = config.samples_per_task;
    json files;
    for (const auto& [kind, file] : model_files[task.id]) files[kind] = file;
    e["models"] = files;
    entries.push_back(std::move(e));
  }
  manifest["entries"] = entries;
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

PolicyLibrary load_library(const std::filesystem::path& dir, ModelKind kind) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path))
    throw ConfigError("library: missing manifest at " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(read_text_file(manifest_path));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("library: bad manifest: ") + e.what());
  }
  PolicyLibrary library;
  try {
    for (const auto& e : manifest.at("entries")) {
      TaskSpec task = task_from_json(e.at("task"));
      const auto& models = e.at("models");
      if (!models.contains(kind_name(kind)))
        throw ConfigError(std::string("library: no ") + kind_name(kind) +
                          " model for task " + task.id +
                          "; re-run fit-sources with that model kind");
      const std::string file = models.at(kind_name(kind)).get<std::string>();
      DynamicsModelPtr model = deserialize_model(read_text_file(dir / file));
      PolicyPtr policy = make_scripted_policy(task);
      library.entries.push_back(
          LibraryEntry{task.id, std::move(task), std::move(policy), std::move(model)});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("library: manifest schema violation: ") +
                      e.what());
  }
  if (library.size() == 0) throw ConfigError("library: no entries");
  return library;
}

namespace {

class WallTimer {
 public:
  explicit WallTimer(bool enabled) : enabled_(enabled) {
    if (enabled_) start_ = std::chrono::steady_clock::now();
  }
  double elapsed_ms() const {
    if (!enabled_) return 0.0;
    const auto now = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(now - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

json event_to_json(const StepEvent& event) {
  json belief = json::array();
  for (double w : event.belief) belief.push_back(w);
  return json{{"trial", event.trial},       {"episode", event.episode},
              {"step", event.step},         {"selected_policy", event.selected_policy},
              {"belief", std::move(belief)}, {"reward", event.reward},
              {"phase", event.phase}};
}

// Runs one episode under a fixed policy, emitting engine-schema events.
double baseline_episode(Environment& env, const Policy& policy, int selected,
                        const std::vector<double>& belief_snapshot,
                        const DiscountConfig& discount, Rng& rng,
                        const EventSink& sink, int trial, int episode) {
  std::vector<double> rewards;
  std::vector<double> state = env.reset();
  for (int t = 0; t < env.max_steps(); ++t) {
    const auto action = policy.act(state, rng);
    EnvStep step = env.step(action);
    rewards.push_back(step.reward);
    if (sink) {
      StepEvent event;
      event.trial = trial;
      event.episode = episode;
      event.step = t + 1;
      event.selected_policy = selected;
      event.belief = belief_snapshot;
      event.reward = step.reward;
      event.phase = "reuse";
      sink(event);
    }
    state = std::move(step.next_state);
    if (step.done) break;
  }
  return discounted_return(rewards, discount);
}

struct MethodRunContext {
  const ExperimentConfig& config;
  const PolicyLibrary& library;
  const ReturnObservationTable* table = nullptr;  // bpr-return only
};

std::vector<ResultRow> run_method_on_target(const MethodRunContext& ctx,
                                            Method method, int trial,
                                            const TaskSpec& target,
                                            const EventSink& sink) {
  const ExperimentConfig& config = ctx.config;
  const std::string method_name = to_string(method);
  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(trial),
                      fnv1a64(method_name), fnv1a64(target.id)));
  auto env = make_environment(target);

  std::vector<ResultRow> rows;
  rows.reserve(static_cast<std::size_t>(config.episodes));
  auto push_row = [&](int episode, double ret, double ms) {
    rows.push_back(ResultRow{trial, method_name, target.id, episode, ret,
                             config.record_wall_time ? ms : 0.0});
  };

  if (method == Method::ours_gp || method == Method::ours_mlp) {
    EngineConfig engine_config;
    engine_config.layout = config.layout();
    engine_config.likelihood = config.likelihood;
    engine_config.selection = config.selection;
    engine_config.discount = config.discount;
    engine_config.novelty = config.resolved_novelty();
    ReusePhaseState state = make_reuse_state(ctx.library.size());
    for (int ep = 1; ep <= config.episodes; ++ep) {
      WallTimer timer(config.record_wall_time);
      const EpisodeResult result =
          run_reuse_episode(state, *env, ctx.library, engine_config, rng, sink, trial);
      push_row(ep, result.return_U, timer.elapsed_ms());
    }
    return rows;
  }

  if (method == Method::bpr_return) {
    Belief belief = belief_init(ctx.library.size());
    for (int ep = 1; ep <= config.episodes; ++ep) {
      WallTimer timer(config.record_wall_time);
      const int p = bpr_return_select(belief, *ctx.table);
      const double ret = baseline_episode(
          *env, *ctx.library.entries[static_cast<std::size_t>(p)].policy, p,
          belief.weights, config.discount, rng, sink, trial, ep);
      belief = bpr_return_update(belief, ret, p, *ctx.table);
      push_row(ep, ret, timer.elapsed_ms());
    }
    return rows;
  }

  if (method == Method::pr_drl) {
    PrDrlState state = make_pr_state(ctx.library.size());
    for (int ep = 1; ep <= config.episodes; ++ep) {
      WallTimer timer(config.record_wall_time);
      const int p = pr_select(state, rng);
      const double ret = baseline_episode(
          *env, *ctx.library.entries[static_cast<std::size_t>(p)].policy, p,
          pr_probabilities(state), config.discount, rng, sink, trial, ep);
      pr_update(state, p, ret);
      push_row(ep, ret, timer.elapsed_ms());
    }
    return rows;
  }

  // ops-drl: deterministic UCB selection; the event belief is the one-hot
  // selection distribution.
  OpsState state = make_ops_state(ctx.library.size());
  for (int ep = 1; ep <= config.episodes; ++ep) {
    WallTimer timer(config.record_wall_time);
    const int p = ops_select(state);
    std::vector<double> one_hot(static_cast<std::size_t>(ctx.library.size()), 0.0);
    one_hot[static_cast<std::size_t>(p)] = 1.0;
    const double ret = baseline_episode(
        *env, *ctx.library.entries[static_cast<std::size_t>(p)].policy, p,
        one_hot, config.discount, rng, sink, trial, ep);
    ops_update(state, p, ret);
    push_row(ep, ret, timer.elapsed_ms());
  }
  return rows;
}

}  // namespace

RunOutput run_experiment_with(const ExperimentConfig& config,
                              const PolicyLibrary& gp_library,
                              const PolicyLibrary* mlp_library,
                              bool capture_events) {
  for (Method m : config.methods)
    if (m == Method::ours_mlp && !mlp_library)
      throw ConfigError("run: ours-mlp requested but no MLP library given");

  // All libraries share the scripted policies, so any of them backs the
  // return-signal and bandit baselines.
  const PolicyLibrary& policy_library = gp_library;

  ReturnObservationTable table;
  bool have_table = false;
  for (Method m : config.methods) {
    if (m == Method::bpr_return) {
      Rng rng(derive_seed(config.seed, fnv1a64("return-table")));
      table = fit_return_table(policy_library, config.sources,
                               config.return_table, config.discount, rng);
      have_table = true;
    }
  }

  RunOutput output;
  std::map<std::string, std::string> streams;

  for (int trial = 0; trial < config.trials; ++trial) {
    for (Method method : config.methods) {
      const PolicyLibrary& library =
          method == Method::ours_mlp ? *mlp_library : gp_library;
      for (const TaskSpec& target : config.targets) {
        EventSink sink = nullptr;
        std::string* stream = nullptr;
        if (capture_events) {
          const std::string key =
              std::string(to_string(method)) + "__" + target.id;
          stream = &streams[key];
          sink = [stream](const StepEvent& event) {
            stream->append(event_to_json(event).dump());
            stream->push_back('\n');
          };
        }
        MethodRunContext ctx{config, library, have_table ? &table : nullptr};
        auto rows = run_method_on_target(ctx, method, trial, target, sink);
        output.rows.insert(output.rows.end(), rows.begin(), rows.end());
      }
    }
  }

  for (auto& [key, text] : streams)
    output.event_streams.emplace_back(key, std::move(text));
  return output;
}

RunOutput run_experiment(const ExperimentConfig& config,
                         const std::filesystem::path& library_dir) {
  std::optional<PolicyLibrary> gp, mlp;
  bool need_gp = false, need_mlp = false;
  for (Method m : config.methods) {
    if (m == Method::ours_mlp) need_mlp = true;
    else need_gp = true;  // baselines only need policies; GP manifest is the default
  }
  if (need_mlp) mlp = load_library(library_dir, ModelKind::mlp);
  if (need_gp) {
    gp = load_library(library_dir, ModelKind::gp);
  } else {
    gp = mlp;  // policy source when only ours-mlp runs
  }
  return run_experiment_with(config, *gp, mlp ? &*mlp : nullptr, true);
}

std::vector<ResultRow> run_ablation(const ExperimentConfig& config,
                                    std::span<const int> sizes) {
  if (sizes.empty()) throw ConfigError("ablation: sizes list is empty");
  for (int s : sizes)
    if (s < 1) throw ConfigError("ablation: sizes must be >= 1");

  Method method = Method::ours_gp;
  for (Method m : config.methods)
    if (m == Method::ours_gp || m == Method::ours_mlp) {
      method = m;
      break;
    }
  const ModelKind kind =
      method == Method::ours_mlp ? ModelKind::mlp : ModelKind::gp;

  ExperimentConfig run_config = config;
  run_config.methods = {method};
  run_config.targets = config.ablation_targets.empty()
                           ? config.targets
                           : config.ablation_targets;

  std::vector<ResultRow> rows;
  for (int size : sizes) {
    for (int trial = 0; trial < config.trials; ++trial) {
      // The per-trial refit is the stochastic ingredient of the ablation:
      // small fitting sets vary more from seed to seed.
      const std::uint64_t lib_seed =
          derive_seed(config.seed, fnv1a64("ablate"),
                      static_cast<std::uint64_t>(size),
                      static_cast<std::uint64_t>(trial));
      const PolicyLibrary library =
          fit_source_library(run_config, kind, lib_seed, size);
      // Re-key the method rng by the outer trial index.
      ExperimentConfig keyed = run_config;
      keyed.seed = derive_seed(config.seed, static_cast<std::uint64_t>(trial),
                               fnv1a64("ablate-run"));
      for (const TaskSpec& target : keyed.targets) {
        MethodRunContext keyed_ctx{keyed, library, nullptr};
        auto target_rows =
            run_method_on_target(keyed_ctx, method, 0, target, nullptr);
        for (ResultRow& r : target_rows) {
          r.trial = trial;
          r.method = std::string(to_string(method)) + "@" + std::to_string(size);
        }
        rows.insert(rows.end(), target_rows.begin(), target_rows.end());
      }
    }
  }
  return rows;
}

ContinualOutput run_continual_with(const ExperimentConfig& config,
                                   const PolicyLibrary& base_library) {
  ContinualOutput output;
  const NoveltyConfig novelty = config.resolved_novelty();
  const SignalLayout layout = config.layout();

  ModelKind kind = ModelKind::gp;
  std::string ours_name = "ours-gp";
  for (Method m : config.methods)
    if (m == Method::ours_mlp) {
      kind = ModelKind::mlp;
      ours_name = "ours-mlp";
      break;
    }
  DynamicsFitConfig fit = config.fit;
  fit.kind = kind;

  const LearnerPtr learner = make_cem_learner(config.cem, config.discount);

  Rng table_rng(derive_seed(config.seed, fnv1a64("return-table")));
  const ReturnObservationTable table = fit_return_table(
      base_library, config.sources, config.return_table, config.discount,
      table_rng);

  std::vector<TaskSpec> targets = config.targets;

  for (int trial = 0; trial < config.trials; ++trial) {
    for (const TaskSpec& target : targets) {
      ContinualTargetLog log;
      log.trial = trial;
      log.target_task = target.id;

      PolicyLibrary library = base_library;
      ReusePhaseState state = make_reuse_state(library.size());
      EngineConfig engine_config;
      engine_config.layout = layout;
      engine_config.likelihood = config.likelihood;
      engine_config.selection = config.selection;
      engine_config.discount = config.discount;
      engine_config.novelty = novelty;

      Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(trial),
                          fnv1a64(ours_name), fnv1a64(target.id)));
      auto env = make_environment(target);

      bool expanded = false;
      int steps_after_expansion = 0;
      const int max_steps_tracked = 10 * env->max_steps();
      EventSink adoption_sink = [&](const StepEvent& event) {
        if (!expanded || log.steps_to_adopt >= 0) return;
        ++steps_after_expansion;
        if (steps_after_expansion <= max_steps_tracked &&
            !event.belief.empty() && event.belief.back() > 0.9)
          log.steps_to_adopt = steps_after_expansion;
      };

      double last_return = 0.0;
      for (int ep = 1; ep <= config.episodes; ++ep) {
        WallTimer timer(config.record_wall_time);
        const EpisodeResult result = run_reuse_episode(
            state, *env, library, engine_config, rng,
            expanded ? adoption_sink : EventSink(nullptr), trial);
        last_return = result.return_U;
        output.rows.push_back(ResultRow{
            trial, ours_name, target.id, ep, result.return_U,
            config.record_wall_time ? timer.elapsed_ms() : 0.0});

        std::vector<double> window(state.recent_returns.begin(),
                                   state.recent_returns.end());
        if (!expanded && detect_novel(window, novelty)) {
          log.detection_episode = ep;
          Rng learn_rng(derive_seed(config.seed,
                                    static_cast<std::uint64_t>(trial),
                                    fnv1a64("learn"), fnv1a64(target.id)));
          auto learn_env = env->clone();
          const LearningResult learned = learning_phase(
              *learn_env, *learner, config.learning, layout, fit, novelty,
              config.discount, learn_rng);
          ExpansionResult expansion = expand_library(
              library, learned.policy, learned.model, target);
          library = std::move(expansion.library);
          state.belief = std::move(expansion.belief);
          state.recent_returns.clear();
          expanded = true;
          ++log.expansions;
        }
      }
      log.library_size_after = library.size();
      log.final_return_ours = last_return;

      // Frozen-library comparison at return-signal granularity.
      Rng bpr_rng(derive_seed(config.seed, static_cast<std::uint64_t>(trial),
                              fnv1a64("bpr-return"), fnv1a64(target.id)));
      auto bpr_env = make_environment(target);
      Belief belief = belief_init(base_library.size());
      for (int ep = 1; ep <= config.episodes; ++ep) {
        WallTimer timer(config.record_wall_time);
        const int p = bpr_return_select(belief, table);
        const double ret = baseline_episode(
            *bpr_env, *base_library.entries[static_cast<std::size_t>(p)].policy,
            p, belief.weights, config.discount, bpr_rng, nullptr, trial, ep);
        belief = bpr_return_update(belief, ret, p, table);
        output.rows.push_back(ResultRow{trial, "bpr-return", target.id, ep, ret,
                                        config.record_wall_time
                                            ? timer.elapsed_ms()
                                            : 0.0});
        log.final_return_bpr = ret;
      }

      output.growth_log.push_back(std::move(log));
    }
  }
  return output;
}

ContinualOutput run_continual(const ExperimentConfig& config,
                              const std::filesystem::path& library_dir) {
  ExperimentConfig continual_config = config;
  ModelKind kind = ModelKind::gp;
  for (Method m : config.methods)
    if (m == Method::ours_mlp) kind = ModelKind::mlp;
  const PolicyLibrary library = load_library(library_dir, kind);
  // Unless the config names targets, the continual protocol runs on the
  // far-from-source suite.
  if (!config.targets_explicit)
    continual_config.targets =
        rebuild_suite(make_continual_suite(config.domain), continual_config);
  return run_continual_with(continual_config, library);
}

std::string growth_log_json(std::span<const ContinualTargetLog> log) {
  json arr = json::array();
  for (const ContinualTargetLog& entry : log) {
    arr.push_back(json{{"trial", entry.trial},
                       {"target_task", entry.target_task},
                       {"detection_episode", entry.detection_episode},
                       {"expansions", entry.expansions},
                       {"library_size_after", entry.library_size_after},
                       {"final_return_ours", entry.final_return_ours},
                       {"final_return_bpr", entry.final_return_bpr},
                       {"steps_to_adopt", entry.steps_to_adopt}});
  }
  return arr.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace {

std::string summary_csv(std::span<const ResultRow> rows) {
  // Per (method, episode): mean over trials of the per-trial cross-target
  // mean, with the 95% CI across trials.
  std::map<std::string, std::map<int, std::map<int, std::vector<double>>>> bucket;
  for (const ResultRow& r : rows)
    bucket[r.method][r.episode][r.trial].push_back(r.return_value);
  std::string out = "method,episode,mean_return,ci95_half,trials\n";
  for (const auto& [method, episodes] : bucket) {
    for (const auto& [episode, trials] : episodes) {
      std::vector<double> per_trial;
      for (const auto& [_, values] : trials) {
        double m = std::accumulate(values.begin(), values.end(), 0.0) /
                   static_cast<double>(values.size());
        per_trial.push_back(m);
      }
      const SummaryStat s = summarize(per_trial);
      out += method + "," + std::to_string(episode) + "," +
             format_double(s.mean) + "," + format_double(s.ci95_half) + "," +
             std::to_string(s.count) + "\n";
    }
  }
  return out;
}

}  // namespace

void write_run_outputs(const RunOutput& output,
                       const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "results.csv", emit_csv(output.rows));
  write_text_file(out_dir / "summary.csv", summary_csv(output.rows));
  if (!output.event_streams.empty()) {
    const auto events_dir = out_dir / "events";
    std::filesystem::create_directories(events_dir);
    for (const auto& [key, text] : output.event_streams)
      write_text_file(events_dir / (key + ".jsonl"), text);
  }
}

}  // namespace bprx
