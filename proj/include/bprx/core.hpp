#pragma once

#include <span>
#include <string>
#include <vector>

#include "bprx/rng.hpp"

namespace bprx {

// One (s, a, r, s') tuple. Discrete actions are stored one-hot so that every
// sample is a flat numeric record regardless of the environment.
struct TransitionSample {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
};

enum class SignalMode { SAR, SAS, SARS };

// Shape of the observation signal: x = (s, a) is the model input, y is the
// reward, the next state, or both. batch_size is N0, the number of samples
// consumed per belief update.
struct SignalLayout {
  SignalMode mode = SignalMode::SARS;
  int input_dim = 0;
  int output_dim = 0;
  int batch_size = 1;
};

SignalLayout make_signal_layout(SignalMode mode, int state_dim, int action_dim,
                                int batch_size = 1);

std::vector<double> pack_input(const TransitionSample& sample);
std::vector<double> pack_output(const TransitionSample& sample,
                                const SignalLayout& layout);

const char* to_string(SignalMode mode);
SignalMode signal_mode_from_string(const std::string& name);

// Probability vector over the library tasks.
struct Belief {
  std::vector<double> weights;

  int size() const { return static_cast<int>(weights.size()); }
};

struct DiscountConfig {
  double gamma = 1.0;
};

struct EpisodeResult {
  double return_U = 0.0;
  int steps = 0;
  bool reached_goal = false;
  std::vector<int> selected_policy_trace;  // one entry per belief update
};

enum class SelectionMode { greedy, sample };

// Smallest admissible posterior weight. Keeps every task selectable after a
// long run of adverse evidence; see belief_update.
inline constexpr double kBeliefFloor = 1e-12;

Belief belief_init(int n);

// Bayes update of the belief from per-task log-likelihoods. Works in log
// space with max-subtraction, then floors each weight at kBeliefFloor and
// renormalizes. If every posterior weight underflows to zero the prior is
// returned unchanged and *degenerate (when given) is set.
Belief belief_update(const Belief& prior, std::span<const double> log_likelihoods,
                     bool* degenerate = nullptr);

// Greedy: argmax weight, ties to the smallest index. Sample: draws an index
// proportionally to the weights using a single uniform draw.
int select_policy(const Belief& belief, SelectionMode mode, Rng& rng);

// Sum_t gamma^t r_t, exponent starting at zero.
double discounted_return(std::span<const double> rewards,
                         const DiscountConfig& discount);

}  // namespace bprx
