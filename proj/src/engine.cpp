#include "bprx/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bprx {

ReusePhaseState make_reuse_state(int library_size) {
  ReusePhaseState state;
  state.belief = belief_init(library_size);
  return state;
}

ReuseStepResult reuse_step(ReusePhaseState& state, Environment& env,
                           std::span<const double> env_state,
                           const PolicyLibrary& library, const EngineConfig& config,
                           Rng& rng) {
  if (library.size() == 0)
    throw std::invalid_argument("reuse_step: empty library");
  if (state.belief.size() != library.size())
    throw std::invalid_argument("reuse_step: belief/library size mismatch");

  // A policy is selected once per N0 block and held for the whole block.
  if (state.buffer.empty() || state.current_policy < 0)
    state.current_policy = select_policy(state.belief, config.selection, rng);

  const auto& entry = library.entries[static_cast<std::size_t>(state.current_policy)];
  const auto action = entry.policy->act(env_state, rng);

  ReuseStepResult out;
  out.selected_policy = state.current_policy;

  EnvStep env_step = env.step(action);
  out.sample.state.assign(env_state.begin(), env_state.end());
  out.sample.action = action;
  out.sample.reward = env_step.reward;
  out.sample.next_state = env_step.next_state;
  out.env_done = env_step.done;

  state.buffer.push_back(out.sample);
  ++state.step;

  if (static_cast<int>(state.buffer.size()) >= config.layout.batch_size) {
    std::vector<double> log_liks(static_cast<std::size_t>(library.size()));
    for (int j = 0; j < library.size(); ++j)
      log_liks[static_cast<std::size_t>(j)] =
          log_likelihood(*library.entries[static_cast<std::size_t>(j)].model,
                         state.buffer, config.layout, config.likelihood);
    state.belief = belief_update(state.belief, log_liks, &state.degenerate_update);
    state.buffer.clear();
    out.belief_updated = true;
  }
  return out;
}

EpisodeResult run_reuse_episode(ReusePhaseState& state, Environment& env,
                                const PolicyLibrary& library,
                                const EngineConfig& config, Rng& rng,
                                const EventSink& sink, int trial) {
  EpisodeResult result;
  std::vector<double> rewards;
  std::vector<double> env_state = env.reset();
  state.step = 0;
  state.buffer.clear();
  state.current_policy = -1;

  const int max_steps = env.max_steps();
  for (int t = 0; t < max_steps; ++t) {
    if (env.terminal()) {  // already at the goal; nothing left to do
      result.reached_goal = true;
      break;
    }
    ReuseStepResult step = reuse_step(state, env, env_state, library, config, rng);
    rewards.push_back(step.sample.reward);
    if (step.belief_updated)
      result.selected_policy_trace.push_back(step.selected_policy);
    if (sink) {
      StepEvent event;
      event.trial = trial;
      event.episode = state.episode;
      event.step = state.step;
      event.selected_policy = step.selected_policy;
      event.belief = state.belief.weights;
      event.reward = step.sample.reward;
      event.phase = "reuse";
      sink(event);
    }
    env_state = std::move(step.sample.next_state);
    if (step.env_done) {
      result.reached_goal = state.step < max_steps;
      break;
    }
  }

  result.steps = state.step;
  result.return_U = discounted_return(rewards, config.discount);

  state.recent_returns.push_back(result.return_U);
  while (static_cast<int>(state.recent_returns.size()) > config.novelty.k)
    state.recent_returns.pop_front();
  ++state.episode;
  return result;
}

bool detect_novel(std::span<const double> window, const NoveltyConfig& config) {
  if (config.k < 1) throw std::invalid_argument("detect_novel: k must be >= 1");
  if (static_cast<int>(window.size()) < config.k) return false;
  const double mean =
      std::accumulate(window.begin(), window.end(), 0.0) /
      static_cast<double>(window.size());
  return mean < config.threshold;
}

namespace {

class CemLearner final : public Learner {
 public:
  CemLearner(CemConfig config, DiscountConfig discount)
      : config_(config), discount_(discount) {}
  PolicyPtr learn(Environment& env, Rng& rng) const override {
    return cem_learn(env, config_, discount_, rng).policy;
  }
  std::string name() const override { return "cem"; }

 private:
  CemConfig config_;
  DiscountConfig discount_;
};

class OracleScriptedLearner final : public Learner {
 public:
  PolicyPtr learn(Environment& env, Rng&) const override {
    return make_scripted_policy(env.spec());
  }
  std::string name() const override { return "oracle-scripted"; }
};

}  // namespace

LearnerPtr make_cem_learner(const CemConfig& config,
                            const DiscountConfig& discount) {
  return std::make_shared<CemLearner>(config, discount);
}

LearnerPtr make_oracle_scripted_learner() {
  return std::make_shared<OracleScriptedLearner>();
}

std::vector<TransitionSample> collect_samples(Environment& env,
                                              const Policy& policy,
                                              int sample_count,
                                              double policy_fraction, Rng& rng) {
  std::vector<TransitionSample> samples;
  samples.reserve(static_cast<std::size_t>(sample_count));
  while (static_cast<int>(samples.size()) < sample_count) {
    std::vector<double> state = env.reset();
    for (int t = 0; t < env.max_steps(); ++t) {
      std::vector<double> action;
      if (rng.uniform() < policy_fraction) {
        action = policy.act(state, rng);
      } else if (env.discrete_actions()) {
        action.assign(static_cast<std::size_t>(env.action_dim()), 0.0);
        action[rng.uniform_index(static_cast<std::size_t>(env.action_dim()))] = 1.0;
      } else {
        action.resize(static_cast<std::size_t>(env.action_dim()));
        for (double& a : action) a = rng.uniform(-1.0, 1.0);
      }
      EnvStep step = env.step(action);
      TransitionSample sample;
      sample.state = state;
      sample.action = action;
      sample.reward = step.reward;
      sample.next_state = step.next_state;
      samples.push_back(std::move(sample));
      state = std::move(step.next_state);
      if (static_cast<int>(samples.size()) >= sample_count || step.done) break;
    }
  }
  return samples;
}

LearningResult learning_phase(Environment& env, const Learner& learner,
                              const LearningBudget& budget,
                              const SignalLayout& layout,
                              const DynamicsFitConfig& fit_config,
                              const NoveltyConfig& novelty,
                              const DiscountConfig& discount, Rng& rng) {
  LearningResult result;
  result.policy = learner.learn(env, rng);

  // Measure the learned policy once for the improvement report.
  {
    std::vector<double> rewards;
    std::vector<double> state = env.reset();
    for (int t = 0; t < env.max_steps(); ++t) {
      const auto action = result.policy->act(state, rng);
      EnvStep step = env.step(action);
      rewards.push_back(step.reward);
      state = std::move(step.next_state);
      if (step.done) break;
    }
    result.learned_return = discounted_return(rewards, discount);
    result.improved = result.learned_return >= novelty.threshold;
  }

  result.samples =
      collect_samples(env, *result.policy, budget.sample_count, 0.5, rng);
  result.model = fit_dynamics_model(result.samples, layout, fit_config, rng);
  return result;
}

ExpansionResult expand_library(const PolicyLibrary& library, PolicyPtr policy,
                               DynamicsModelPtr model, const TaskSpec& task) {
  for (const LibraryEntry& entry : library.entries)
    if (entry.task_id == task.id)
      throw std::invalid_argument("expand_library: duplicate task id '" +
                                  task.id + "'");
  if (!policy || !model)
    throw std::invalid_argument("expand_library: null policy or model");

  ExpansionResult out;
  out.library = library;
  out.library.entries.push_back(LibraryEntry{task.id, task, std::move(policy),
                                             std::move(model)});
  out.belief = belief_init(out.library.size());
  return out;
}

}  // namespace bprx
