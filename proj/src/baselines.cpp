#include "bprx/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bprx {

namespace {

double run_episode(Environment& env, const Policy& policy,
                   const DiscountConfig& discount, Rng& rng) {
  std::vector<double> rewards;
  std::vector<double> state = env.reset();
  for (int t = 0; t < env.max_steps(); ++t) {
    const auto action = policy.act(state, rng);
    EnvStep step = env.step(action);
    rewards.push_back(step.reward);
    state = std::move(step.next_state);
    if (step.done) break;
  }
  return discounted_return(rewards, discount);
}

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

}  // namespace

ReturnObservationTable fit_return_table(const PolicyLibrary& library,
                                        std::span<const TaskSpec> source_tasks,
                                        const ReturnTableConfig& config,
                                        const DiscountConfig& discount, Rng& rng) {
  const int n = library.size();
  if (n == 0) throw std::invalid_argument("fit_return_table: empty library");
  if (static_cast<int>(source_tasks.size()) != n)
    throw std::invalid_argument("fit_return_table: task/policy count mismatch");
  if (config.episodes_per_pair < 1)
    throw std::invalid_argument("fit_return_table: episodes_per_pair >= 1");

  ReturnObservationTable table;
  table.n = n;
  table.mean_return.resize(static_cast<std::size_t>(n * n));
  table.variance.resize(static_cast<std::size_t>(n * n));

  for (int j = 0; j < n; ++j) {
    auto env = make_environment(source_tasks[static_cast<std::size_t>(j)]);
    for (int p = 0; p < n; ++p) {
      const Policy& policy = *library.entries[static_cast<std::size_t>(p)].policy;
      double sum = 0.0;
      for (int e = 0; e < config.episodes_per_pair; ++e)
        sum += run_episode(*env, policy, discount, rng);
      table.mean_return[static_cast<std::size_t>(j * n + p)] =
          sum / config.episodes_per_pair;
    }
  }

  double eps2 = config.eps2_u;
  if (!(eps2 > 0.0)) {
    const auto [lo, hi] =
        std::minmax_element(table.mean_return.begin(), table.mean_return.end());
    const double spread = *hi - *lo;
    eps2 = spread > 0.0 ? (0.1 * spread) * (0.1 * spread) : 1.0;
  }
  std::fill(table.variance.begin(), table.variance.end(), eps2);
  return table;
}

Belief bpr_return_update(const Belief& belief, double observed_return, int policy,
                         const ReturnObservationTable& table, bool* degenerate) {
  if (policy < 0 || policy >= table.n)
    throw std::invalid_argument("bpr_return_update: bad policy index");
  if (belief.size() != table.n)
    throw std::invalid_argument("bpr_return_update: belief/table size mismatch");
  std::vector<double> log_liks(static_cast<std::size_t>(table.n));
  for (int j = 0; j < table.n; ++j) {
    const double xi2 = table.var(j, policy);
    if (!(xi2 > 0.0))
      throw std::invalid_argument("bpr_return_update: non-positive variance");
    const double diff = observed_return - table.mu(j, policy);
    log_liks[static_cast<std::size_t>(j)] =
        -0.5 * (kLogTwoPi + std::log(xi2)) - diff * diff / (2.0 * xi2);
  }
  return belief_update(belief, log_liks, degenerate);
}

int bpr_return_select(const Belief& belief, const ReturnObservationTable& table) {
  if (belief.size() != table.n)
    throw std::invalid_argument("bpr_return_select: belief/table size mismatch");
  int best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int p = 0; p < table.n; ++p) {
    double value = 0.0;
    for (int j = 0; j < table.n; ++j)
      value += belief.weights[static_cast<std::size_t>(j)] * table.mu(j, p);
    if (value > best_value) {
      best_value = value;
      best = p;
    }
  }
  return best;
}

PrDrlState make_pr_state(int n, double temperature, double temperature_step) {
  if (n < 1) throw std::invalid_argument("make_pr_state: empty library");
  PrDrlState state;
  state.gains.assign(static_cast<std::size_t>(n), 0.0);
  state.counts.assign(static_cast<std::size_t>(n), 0);
  state.temperature = temperature;
  state.temperature_step = temperature_step;
  return state;
}

std::vector<double> pr_probabilities(const PrDrlState& state) {
  const std::size_t n = state.gains.size();
  std::vector<double> probs(n);
  double max_score = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j)
    max_score = std::max(max_score, state.temperature * state.gains[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    probs[j] = std::exp(state.temperature * state.gains[j] - max_score);
    sum += probs[j];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

int pr_select(const PrDrlState& state, Rng& rng) {
  const auto probs = pr_probabilities(state);
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    acc += probs[j];
    if (u < acc) return static_cast<int>(j);
  }
  return static_cast<int>(probs.size() - 1);
}

void pr_update(PrDrlState& state, int chosen, double episodic_return) {
  if (chosen < 0 || chosen >= static_cast<int>(state.gains.size()))
    throw std::invalid_argument("pr_update: bad index");
  const auto j = static_cast<std::size_t>(chosen);
  state.gains[j] = (state.gains[j] * state.counts[j] + episodic_return) /
                   (state.counts[j] + 1);
  state.counts[j] += 1;
  state.temperature += state.temperature_step;
}

OpsState make_ops_state(int n) {
  if (n < 1) throw std::invalid_argument("make_ops_state: empty library");
  OpsState state;
  state.gains.assign(static_cast<std::size_t>(n), 0.0);
  state.counts.assign(static_cast<std::size_t>(n), 0);
  return state;
}

std::vector<double> ops_scores(const OpsState& state) {
  const std::size_t n = state.gains.size();
  int total = 0;
  for (int v : state.counts) total += v;
  std::vector<double> scores(n);
  for (std::size_t j = 0; j < n; ++j)
    scores[j] = state.gains[j] +
                std::sqrt(2.0 * std::log(static_cast<double>(total) + 1.0) /
                          (state.counts[j] + 1.0));
  return scores;
}

int ops_select(const OpsState& state) {
  const auto scores = ops_scores(state);
  std::size_t best = 0;
  for (std::size_t j = 1; j < scores.size(); ++j)
    if (scores[j] > scores[best]) best = j;
  return static_cast<int>(best);
}

void ops_update(OpsState& state, int chosen, double episodic_return) {
  if (chosen < 0 || chosen >= static_cast<int>(state.gains.size()))
    throw std::invalid_argument("ops_update: bad index");
  const auto j = static_cast<std::size_t>(chosen);
  state.gains[j] = (state.gains[j] * state.counts[j] + episodic_return) /
                   (state.counts[j] + 1);
  state.counts[j] += 1;
}

}  // namespace bprx
