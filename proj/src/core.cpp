#include "bprx/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bprx {

SignalLayout make_signal_layout(SignalMode mode, int state_dim, int action_dim,
                                int batch_size) {
  if (state_dim < 1 || action_dim < 1)
    throw std::invalid_argument("signal layout: state/action dims must be >= 1");
  if (batch_size < 1)
    throw std::invalid_argument("signal layout: batch size N0 must be >= 1");
  SignalLayout layout;
  layout.mode = mode;
  layout.input_dim = state_dim + action_dim;
  switch (mode) {
    case SignalMode::SAR: layout.output_dim = 1; break;
    case SignalMode::SAS: layout.output_dim = state_dim; break;
    case SignalMode::SARS: layout.output_dim = 1 + state_dim; break;
  }
  layout.batch_size = batch_size;
  return layout;
}

std::vector<double> pack_input(const TransitionSample& sample) {
  std::vector<double> x;
  x.reserve(sample.state.size() + sample.action.size());
  x.insert(x.end(), sample.state.begin(), sample.state.end());
  x.insert(x.end(), sample.action.begin(), sample.action.end());
  return x;
}

std::vector<double> pack_output(const TransitionSample& sample,
                                const SignalLayout& layout) {
  std::vector<double> y;
  y.reserve(static_cast<std::size_t>(layout.output_dim));
  switch (layout.mode) {
    case SignalMode::SAR:
      y.push_back(sample.reward);
      break;
    case SignalMode::SAS:
      y.insert(y.end(), sample.next_state.begin(), sample.next_state.end());
      break;
    case SignalMode::SARS:
      y.push_back(sample.reward);
      y.insert(y.end(), sample.next_state.begin(), sample.next_state.end());
      break;
  }
  if (static_cast<int>(y.size()) != layout.output_dim)
    throw std::invalid_argument("pack_output: sample does not match layout");
  return y;
}

const char* to_string(SignalMode mode) {
  switch (mode) {
    case SignalMode::SAR: return "SAR";
    case SignalMode::SAS: return "SAS";
    case SignalMode::SARS: return "SARS";
  }
  return "?";
}

SignalMode signal_mode_from_string(const std::string& name) {
  if (name == "SAR") return SignalMode::SAR;
  if (name == "SAS") return SignalMode::SAS;
  if (name == "SARS") return SignalMode::SARS;
  throw std::invalid_argument("unknown signal mode: " + name);
}

Belief belief_init(int n) {
  if (n < 1) throw std::invalid_argument("belief_init: empty library");
  Belief b;
  b.weights.assign(static_cast<std::size_t>(n), 1.0 / n);
  return b;
}

Belief belief_update(const Belief& prior, std::span<const double> log_likelihoods,
                     bool* degenerate) {
  const std::size_t n = prior.weights.size();
  if (n == 0) throw std::invalid_argument("belief_update: empty belief");
  if (log_likelihoods.size() != n)
    throw std::invalid_argument("belief_update: size mismatch");
  if (degenerate) *degenerate = false;

  std::vector<double> log_post(n);
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    log_post[j] = std::log(prior.weights[j]) + log_likelihoods[j];
    max_log = std::max(max_log, log_post[j]);
  }

  double sum = 0.0;
  std::vector<double> post(n, 0.0);
  if (std::isfinite(max_log)) {
    for (std::size_t j = 0; j < n; ++j) {
      post[j] = std::exp(log_post[j] - max_log);
      sum += post[j];
    }
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    if (degenerate) *degenerate = true;
    return prior;
  }

  for (double& w : post) w /= sum;
  // Re-normalize after flooring by paying the lifted mass out of the largest
  // weight; this keeps the sum at 1 and the floor exact.
  double deficit = 0.0;
  std::size_t largest = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (post[j] < kBeliefFloor) {
      deficit += kBeliefFloor - post[j];
      post[j] = kBeliefFloor;
    }
    if (post[j] > post[largest]) largest = j;
  }
  post[largest] -= deficit;
  return Belief{std::move(post)};
}

int select_policy(const Belief& belief, SelectionMode mode, Rng& rng) {
  const std::size_t n = belief.weights.size();
  if (n == 0) throw std::invalid_argument("select_policy: empty belief");
  if (mode == SelectionMode::greedy) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (belief.weights[j] > belief.weights[best]) best = j;
    return static_cast<int>(best);
  }
  double total = 0.0;
  for (double w : belief.weights) total += w;
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    acc += belief.weights[j];
    if (u < acc) return static_cast<int>(j);
  }
  return static_cast<int>(n - 1);
}

double discounted_return(std::span<const double> rewards,
                         const DiscountConfig& discount) {
  double total = 0.0;
  double factor = 1.0;
  for (double r : rewards) {
    total += factor * r;
    factor *= discount.gamma;
  }
  return total;
}

}  // namespace bprx
