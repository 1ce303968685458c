#pragma once

#include <span>
#include <vector>

#include "bprx/core.hpp"
#include "bprx/engine.hpp"
#include "bprx/environments.hpp"
#include "bprx/rng.hpp"

namespace bprx {

// Gaussian return observation model of classic BPR: per (task, policy) pair,
// the mean episodic return and an artificial variance.
struct ReturnObservationTable {
  int n = 0;                           // tasks == policies == library size
  std::vector<double> mean_return;     // n x n, row-major [task][policy]
  std::vector<double> variance;        // same layout, all > 0

  double mu(int task, int policy) const {
    return mean_return[static_cast<std::size_t>(task * n + policy)];
  }
  double var(int task, int policy) const {
    return variance[static_cast<std::size_t>(task * n + policy)];
  }
};

struct ReturnTableConfig {
  int episodes_per_pair = 100;
  // Fixed likelihood variance; <= 0 selects (10% of the table's mean-return
  // spread)^2 automatically.
  double eps2_u = 0.0;
};

// Applies every library policy on every source task and records mean returns.
ReturnObservationTable fit_return_table(const PolicyLibrary& library,
                                        std::span<const TaskSpec> source_tasks,
                                        const ReturnTableConfig& config,
                                        const DiscountConfig& discount, Rng& rng);

// Episode-granularity Bayes update from one observed return.
Belief bpr_return_update(const Belief& belief, double observed_return, int policy,
                         const ReturnObservationTable& table,
                         bool* degenerate = nullptr);

// Expected-utility policy choice: argmax_p sum_j belief(j) mu[j][p].
int bpr_return_select(const Belief& belief, const ReturnObservationTable& table);

// Probabilistic policy reuse: softmax selection over reuse gains with a
// temperature that grows after every episode.
struct PrDrlState {
  std::vector<double> gains;   // W
  std::vector<int> counts;     // V
  double temperature = 0.0;    // nu
  double temperature_step = 0.05;
};

PrDrlState make_pr_state(int n, double temperature = 0.0,
                         double temperature_step = 0.05);
int pr_select(const PrDrlState& state, Rng& rng);
void pr_update(PrDrlState& state, int chosen, double episodic_return);
// Selection probabilities p_j = exp(nu W_j) / sum exp(nu W_j').
std::vector<double> pr_probabilities(const PrDrlState& state);

// Optimal policy selection as a UCB bandit; zero-initialized gains.
struct OpsState {
  std::vector<double> gains;  // W
  std::vector<int> counts;    // V
};

OpsState make_ops_state(int n);
int ops_select(const OpsState& state);
void ops_update(OpsState& state, int chosen, double episodic_return);
std::vector<double> ops_scores(const OpsState& state);

}  // namespace bprx
