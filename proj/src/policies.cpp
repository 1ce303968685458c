#include "bprx/policies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bprx {

std::vector<double> nav_controller_act(std::span<const double> state,
                                       std::span<const double> goal, double gain) {
  if (state.size() != goal.size())
    throw std::invalid_argument("nav_controller_act: dimension mismatch");
  std::vector<double> action(state.size());
  for (std::size_t i = 0; i < state.size(); ++i)
    action[i] = std::clamp(gain * (goal[i] - state[i]), -1.0, 1.0);
  return action;
}

int cartpole_controller_act(std::span<const double> state,
                            double disturbance_estimate,
                            const CartPoleGains& gains) {
  if (state.size() != 4)
    throw std::invalid_argument("cartpole_controller_act: state must be 4-D");
  const double desired_force = gains.x * state[0] + gains.x_dot * state[1] +
                               gains.theta * state[2] +
                               gains.theta_dot * state[3] -
                               disturbance_estimate;
  return desired_force > 0.0 ? 1 : 0;
}

LinearGaussianPolicy::LinearGaussianPolicy(int state_dim, int action_dim,
                                           std::vector<double> weights,
                                           std::vector<double> bias, double stddev)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      weights_(std::move(weights)),
      bias_(std::move(bias)),
      stddev_(stddev) {
  if (static_cast<int>(weights_.size()) != state_dim_ * action_dim_ ||
      static_cast<int>(bias_.size()) != action_dim_)
    throw std::invalid_argument("LinearGaussianPolicy: shape mismatch");
  if (stddev_ < 0.0)
    throw std::invalid_argument("LinearGaussianPolicy: negative stddev");
}

std::vector<double> LinearGaussianPolicy::act(std::span<const double> state,
                                              Rng& rng) const {
  std::vector<double> action(static_cast<std::size_t>(action_dim_));
  for (int a = 0; a < action_dim_; ++a) {
    double v = bias_[static_cast<std::size_t>(a)];
    for (int s = 0; s < state_dim_; ++s)
      v += weights_[static_cast<std::size_t>(a * state_dim_ + s)] * state[s];
    if (stddev_ > 0.0) v += stddev_ * rng.normal();
    action[static_cast<std::size_t>(a)] = std::clamp(v, -1.0, 1.0);
  }
  return action;
}

LinearDiscretePolicy::LinearDiscretePolicy(int state_dim, int n_actions,
                                           std::vector<double> weights,
                                           std::vector<double> bias)
    : state_dim_(state_dim),
      n_actions_(n_actions),
      weights_(std::move(weights)),
      bias_(std::move(bias)) {
  if (static_cast<int>(weights_.size()) != state_dim_ * n_actions_ ||
      static_cast<int>(bias_.size()) != n_actions_)
    throw std::invalid_argument("LinearDiscretePolicy: shape mismatch");
}

std::vector<double> LinearDiscretePolicy::act(std::span<const double> state,
                                              Rng&) const {
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < n_actions_; ++a) {
    double score = bias_[static_cast<std::size_t>(a)];
    for (int s = 0; s < state_dim_; ++s)
      score += weights_[static_cast<std::size_t>(a * state_dim_ + s)] * state[s];
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  std::vector<double> one_hot(static_cast<std::size_t>(n_actions_), 0.0);
  one_hot[static_cast<std::size_t>(best)] = 1.0;
  return one_hot;
}

PolicyPtr make_scripted_policy(const TaskSpec& spec) {
  if (spec.domain() == Domain::nav2d) {
    const auto& task = std::get<Nav2dTask>(spec.task);
    return std::make_shared<NavController>(task.goal);
  }
  const auto& task = std::get<CartPoleTask>(spec.task);
  return std::make_shared<CartPoleController>(task.disturbance);
}

namespace {

// Parameter-vector <-> linear policy adapters for CEM.
PolicyPtr policy_from_params(const Environment& env,
                             std::span<const double> params) {
  const int sd = env.state_dim();
  const int ad = env.action_dim();
  std::vector<double> w(params.begin(), params.begin() + sd * ad);
  std::vector<double> b(params.begin() + sd * ad, params.end());
  if (env.discrete_actions())
    return std::make_shared<LinearDiscretePolicy>(sd, ad, std::move(w),
                                                  std::move(b));
  return std::make_shared<LinearGaussianPolicy>(sd, ad, std::move(w),
                                                std::move(b), 0.0);
}

double evaluate_policy(Environment& env, const Policy& policy,
                       const DiscountConfig& discount, Rng& rng) {
  std::vector<double> rewards;
  rewards.reserve(static_cast<std::size_t>(env.max_steps()));
  std::vector<double> state = env.reset();
  for (int t = 0; t < env.max_steps(); ++t) {
    const auto action = policy.act(state, rng);
    EnvStep s = env.step(action);
    rewards.push_back(s.reward);
    state = std::move(s.next_state);
    if (s.done) break;
  }
  return discounted_return(rewards, discount);
}

}  // namespace

CemResult cem_learn(Environment& env, const CemConfig& config,
                    const DiscountConfig& discount, Rng& rng) {
  if (config.iterations < 1 || config.population < 1)
    throw std::invalid_argument("cem_learn: budget must be >= 1");
  const int dim = env.state_dim() * env.action_dim() + env.action_dim();
  std::vector<double> mean(static_cast<std::size_t>(dim), 0.0);
  std::vector<double> stddev(static_cast<std::size_t>(dim), config.init_stddev);

  const int n_elite = std::max(
      1, static_cast<int>(config.population * config.elite_fraction));

  CemResult result;
  result.best_return = -std::numeric_limits<double>::infinity();
  std::vector<double> best_params;

  std::vector<std::vector<double>> samples(
      static_cast<std::size_t>(config.population));
  std::vector<double> returns(static_cast<std::size_t>(config.population));

  for (int iter = 0; iter < config.iterations; ++iter) {
    for (int i = 0; i < config.population; ++i) {
      auto& p = samples[static_cast<std::size_t>(i)];
      p.resize(static_cast<std::size_t>(dim));
      for (int d = 0; d < dim; ++d)
        p[static_cast<std::size_t>(d)] =
            mean[static_cast<std::size_t>(d)] +
            stddev[static_cast<std::size_t>(d)] * rng.normal();
      const auto policy = policy_from_params(env, p);
      returns[static_cast<std::size_t>(i)] =
          evaluate_policy(env, *policy, discount, rng);
      if (returns[static_cast<std::size_t>(i)] > result.best_return) {
        result.best_return = returns[static_cast<std::size_t>(i)];
        best_params = p;
      }
    }
    result.best_per_iteration.push_back(result.best_return);

    const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
    if (*lo == *hi) {
      // Flat fitness landscape gives no elite signal; widen the search.
      for (double& s : stddev) s = std::max(2.0 * s, config.init_stddev);
      continue;
    }

    std::vector<int> order(static_cast<std::size_t>(config.population));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return returns[static_cast<std::size_t>(a)] >
             returns[static_cast<std::size_t>(b)];
    });

    for (int d = 0; d < dim; ++d) {
      double m = 0.0;
      for (int e = 0; e < n_elite; ++e)
        m += samples[static_cast<std::size_t>(order[static_cast<std::size_t>(e)])]
                    [static_cast<std::size_t>(d)];
      m /= n_elite;
      double var = 0.0;
      for (int e = 0; e < n_elite; ++e) {
        const double diff =
            samples[static_cast<std::size_t>(order[static_cast<std::size_t>(e)])]
                   [static_cast<std::size_t>(d)] -
            m;
        var += diff * diff;
      }
      var /= n_elite;
      mean[static_cast<std::size_t>(d)] = m;
      stddev[static_cast<std::size_t>(d)] = std::max(std::sqrt(var), 1e-3);
    }
  }

  result.policy = policy_from_params(env, best_params);
  return result;
}

}  // namespace bprx
