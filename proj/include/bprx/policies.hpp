#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bprx/core.hpp"
#include "bprx/environments.hpp"
#include "bprx/rng.hpp"

namespace bprx {

class Policy {
 public:
  virtual ~Policy() = default;
  // Returns an action in the environment's flat encoding. Deterministic
  // policies ignore rng.
  virtual std::vector<double> act(std::span<const double> state, Rng& rng) const = 0;
  virtual std::string kind() const = 0;
};

using PolicyPtr = std::shared_ptr<const Policy>;

// Proportional go-to-goal controller, clipped to the action box.
std::vector<double> nav_controller_act(std::span<const double> state,
                                       std::span<const double> goal, double gain);

// Linear feedback with a feedforward term cancelling the known constant
// disturbance; returns 1 (push right) when the desired force is positive.
// Gains are frozen from a one-off grid search: each controller balances its
// own disturbance (and +-0.5 neighbours) for the full 100 steps while the
// opposite-sign controller drops the pole within ~15.
struct CartPoleGains {
  double x = 0.0;
  double x_dot = 2.0;
  double theta = 20.0;
  double theta_dot = 4.5;
};

int cartpole_controller_act(std::span<const double> state,
                            double disturbance_estimate,
                            const CartPoleGains& gains = {});

class NavController final : public Policy {
 public:
  NavController(std::array<double, 2> goal, double gain = 1.0)
      : goal_{goal}, gain_(gain) {}
  std::vector<double> act(std::span<const double> state, Rng&) const override {
    return nav_controller_act(state, goal_, gain_);
  }
  std::string kind() const override { return "nav_controller"; }
  std::array<double, 2> goal() const { return goal_; }
  double gain() const { return gain_; }

 private:
  std::array<double, 2> goal_;
  double gain_;
};

class CartPoleController final : public Policy {
 public:
  explicit CartPoleController(double disturbance_estimate,
                              const CartPoleGains& gains = {})
      : disturbance_(disturbance_estimate), gains_(gains) {}
  std::vector<double> act(std::span<const double> state, Rng&) const override {
    const int a = cartpole_controller_act(state, disturbance_, gains_);
    return a == 1 ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0};
  }
  std::string kind() const override { return "cartpole_controller"; }
  double disturbance_estimate() const { return disturbance_; }

 private:
  double disturbance_;
  CartPoleGains gains_;
};

// a = clip(W s + b + stddev * eps); the CEM hypothesis class for continuous
// actions. stddev = 0 gives a deterministic policy.
class LinearGaussianPolicy final : public Policy {
 public:
  LinearGaussianPolicy(int state_dim, int action_dim,
                       std::vector<double> weights, std::vector<double> bias,
                       double stddev = 0.0);
  std::vector<double> act(std::span<const double> state, Rng& rng) const override;
  std::string kind() const override { return "linear_gaussian"; }

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& bias() const { return bias_; }
  double stddev() const { return stddev_; }

 private:
  int state_dim_;
  int action_dim_;
  std::vector<double> weights_;  // action_dim x state_dim, row-major
  std::vector<double> bias_;
  double stddev_;
};

// One linear score per discrete action; act returns the one-hot argmax.
class LinearDiscretePolicy final : public Policy {
 public:
  LinearDiscretePolicy(int state_dim, int n_actions, std::vector<double> weights,
                       std::vector<double> bias);
  std::vector<double> act(std::span<const double> state, Rng& rng) const override;
  std::string kind() const override { return "linear_discrete"; }

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& bias() const { return bias_; }

 private:
  int state_dim_;
  int n_actions_;
  std::vector<double> weights_;  // n_actions x state_dim, row-major
  std::vector<double> bias_;
};

// Scripted near-optimal policy for a known task; stands in for DRL-trained
// source policies.
PolicyPtr make_scripted_policy(const TaskSpec& spec);

struct CemConfig {
  int population = 32;
  double elite_fraction = 0.25;
  int iterations = 30;
  double init_stddev = 1.0;
};

struct CemResult {
  PolicyPtr policy;
  double best_return = 0.0;
  std::vector<double> best_per_iteration;  // best-so-far, non-decreasing
};

// Cross-entropy search over linear policy parameters. Evaluates each sampled
// parameter vector by one episode return on env. Deterministic under a fixed
// rng state.
CemResult cem_learn(Environment& env, const CemConfig& config,
                    const DiscountConfig& discount, Rng& rng);

}  // namespace bprx
