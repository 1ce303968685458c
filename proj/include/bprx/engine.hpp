#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bprx/core.hpp"
#include "bprx/dynamics.hpp"
#include "bprx/environments.hpp"
#include "bprx/policies.hpp"
#include "bprx/rng.hpp"

namespace bprx {

struct LibraryEntry {
  std::string task_id;
  TaskSpec task;
  PolicyPtr policy;
  DynamicsModelPtr model;
};

struct PolicyLibrary {
  std::vector<LibraryEntry> entries;

  int size() const { return static_cast<int>(entries.size()); }
};

struct NoveltyConfig {
  int k = 3;                   // window length in episodes
  double threshold = -500.0;   // mean return below this flags a novel task
};

// Mutable state of one reuse phase on one target task. The belief carries
// across episodes; the signal buffer holds samples until N0 are available.
struct ReusePhaseState {
  Belief belief;
  int episode = 0;
  int step = 0;  // within the current episode
  std::vector<TransitionSample> buffer;
  int current_policy = -1;  // selection for the active N0 block
  std::deque<double> recent_returns;
  bool degenerate_update = false;  // set if the last update was degenerate
};

ReusePhaseState make_reuse_state(int library_size);

struct StepEvent {
  int trial = 0;
  int episode = 0;
  int step = 0;
  int selected_policy = -1;
  std::vector<double> belief;
  double reward = 0.0;
  std::string phase = "reuse";
};

using EventSink = std::function<void(const StepEvent&)>;

struct EngineConfig {
  SignalLayout layout;
  LikelihoodConfig likelihood;
  SelectionMode selection = SelectionMode::greedy;
  DiscountConfig discount;
  NoveltyConfig novelty;
};

struct ReuseStepResult {
  TransitionSample sample;
  int selected_policy = -1;
  bool env_done = false;
  bool belief_updated = false;
};

// One environment step of the reuse phase: select a policy for the current
// N0 block, act, buffer the sample, and run the Bayes update once the buffer
// holds N0 samples.
ReuseStepResult reuse_step(ReusePhaseState& state, Environment& env,
                           std::span<const double> env_state,
                           const PolicyLibrary& library, const EngineConfig& config,
                           Rng& rng);

// Runs reuse_step until the goal or the step budget M; pushes the episode
// return into the novelty window and advances the episode counter.
EpisodeResult run_reuse_episode(ReusePhaseState& state, Environment& env,
                                const PolicyLibrary& library,
                                const EngineConfig& config, Rng& rng,
                                const EventSink& sink = nullptr, int trial = 0);

// True once the window holds at least k returns whose mean is strictly below
// the threshold.
bool detect_novel(std::span<const double> window, const NoveltyConfig& config);

class Learner {
 public:
  virtual ~Learner() = default;
  virtual PolicyPtr learn(Environment& env, Rng& rng) const = 0;
  virtual std::string name() const = 0;
};

using LearnerPtr = std::shared_ptr<const Learner>;

// Default learner: cross-entropy search over linear policies.
LearnerPtr make_cem_learner(const CemConfig& config, const DiscountConfig& discount);
// Test-mode learner that returns the analytic controller for the revealed task.
LearnerPtr make_oracle_scripted_learner();

struct LearningResult {
  PolicyPtr policy;
  DynamicsModelPtr model;
  std::vector<TransitionSample> samples;
  double learned_return = 0.0;
  bool improved = false;  // learned policy beat the novelty threshold
};

struct LearningBudget {
  int sample_count = 200;  // transitions collected for the new dynamics model
};

// Learning phase: trains a new policy on the target task, then collects
// transitions (half from the learned policy, half from uniform-random
// actions) and fits a fresh dynamics model from them.
LearningResult learning_phase(Environment& env, const Learner& learner,
                              const LearningBudget& budget,
                              const SignalLayout& layout,
                              const DynamicsFitConfig& fit_config,
                              const NoveltyConfig& novelty,
                              const DiscountConfig& discount, Rng& rng);

struct ExpansionResult {
  PolicyLibrary library;
  Belief belief;  // uniform over the grown library
};

// Plug-and-play growth: appends the new entry without touching existing
// entries; the belief restarts uniform over n+1 tasks.
ExpansionResult expand_library(const PolicyLibrary& library, PolicyPtr policy,
                               DynamicsModelPtr model, const TaskSpec& task);

// Rolls out in env collecting transitions; each step takes the policy action
// with probability policy_fraction, otherwise a uniform-random action.
// Discrete environments pick a uniform action index.
std::vector<TransitionSample> collect_samples(Environment& env,
                                              const Policy& policy,
                                              int sample_count,
                                              double policy_fraction, Rng& rng);

}  // namespace bprx
