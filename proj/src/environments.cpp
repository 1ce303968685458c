#include "bprx/environments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace bprx {

const char* to_string(Domain domain) {
  return domain == Domain::nav2d ? "nav2d" : "cartpole";
}

Domain domain_from_string(const std::string& name) {
  if (name == "nav2d") return Domain::nav2d;
  if (name == "cartpole") return Domain::cartpole;
  throw std::invalid_argument("unknown domain: " + name);
}

Nav2dStep nav2d_step(std::span<const double> state, std::span<const double> action,
                     const Nav2dTask& task) {
  if (state.size() != 2 || action.size() != 2)
    throw std::invalid_argument("nav2d_step: state/action must be 2-D");
  const double ax = std::clamp(action[0], -1.0, 1.0);
  const double ay = std::clamp(action[1], -1.0, 1.0);
  Nav2dStep out;
  out.next = {state[0] + ax, state[1] + ay};
  const double dx = out.next[0] - task.goal[0];
  const double dy = out.next[1] - task.goal[1];
  const double dist = std::sqrt(dx * dx + dy * dy);
  out.reward = -dist - task.control_cost * (ax * ax + ay * ay);
  out.done = dist < task.goal_radius;
  return out;
}

CartPoleStep cartpole_step(const CartPoleState& state, int action,
                           const CartPoleTask& task) {
  if (action != 0 && action != 1)
    throw std::invalid_argument("cartpole_step: action must be 0 or 1");
  const double force =
      (action == 1 ? task.force : -task.force) + task.disturbance;
  const double total_mass = task.mass_cart + task.mass_pole;
  const double pole_mass_length = task.mass_pole * task.half_length;
  const double cos_t = std::cos(state.theta);
  const double sin_t = std::sin(state.theta);

  const double temp =
      (force + pole_mass_length * state.theta_dot * state.theta_dot * sin_t) /
      total_mass;
  const double theta_acc =
      (task.gravity * sin_t - cos_t * temp) /
      (task.half_length *
       (4.0 / 3.0 - task.mass_pole * cos_t * cos_t / total_mass));
  const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;

  CartPoleStep out;
  out.next.x = state.x + task.time_step * state.x_dot;
  out.next.x_dot = state.x_dot + task.time_step * x_acc;
  out.next.theta = state.theta + task.time_step * state.theta_dot;
  out.next.theta_dot = state.theta_dot + task.time_step * theta_acc;
  out.reward = std::abs(out.next.theta) < task.reward_angle ? 1.0 : 0.0;
  out.done = std::abs(out.next.theta) > task.termination_angle ||
             std::abs(out.next.x) > task.position_bound;
  return out;
}

namespace {

std::string trim_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

TaskSpec make_nav2d_task(double gx, double gy, const Nav2dTask& base) {
  Nav2dTask task = base;
  task.goal = {gx, gy};
  return TaskSpec{"nav_" + trim_number(gx) + "_" + trim_number(gy), task};
}

TaskSpec make_cartpole_task(double disturbance, const CartPoleTask& base) {
  CartPoleTask task = base;
  task.disturbance = disturbance;
  return TaskSpec{"cp_" + trim_number(disturbance), task};
}

std::vector<TaskSpec> make_source_suite(Domain domain) {
  std::vector<TaskSpec> suite;
  if (domain == Domain::nav2d) {
    suite.push_back(make_nav2d_task(10, 10));
    suite.push_back(make_nav2d_task(-9, 9));
    suite.push_back(make_nav2d_task(-7, -7));
    suite.push_back(make_nav2d_task(8, -8));
  } else {
    suite.push_back(make_cartpole_task(5));
    suite.push_back(make_cartpole_task(-5));
  }
  return suite;
}

std::vector<TaskSpec> make_target_suite(Domain domain) {
  std::vector<TaskSpec> suite;
  if (domain == Domain::nav2d) {
    const double goals[][2] = {{10.5, 10}, {10, 9.5},  {-8.5, 9},  {-9, 9.5},
                               {-6.5, -7}, {-7, -7.5}, {7.5, -8},  {8, -7.5},
                               {10, 10},   {-9, 9},    {-7, -7},   {8, -8}};
    for (const auto& g : goals) suite.push_back(make_nav2d_task(g[0], g[1]));
  } else {
    for (double f : {4.5, 5.0, 5.5, -5.5, -5.0, -4.5})
      suite.push_back(make_cartpole_task(f));
  }
  return suite;
}

std::vector<TaskSpec> make_continual_suite(Domain domain) {
  std::vector<TaskSpec> suite;
  if (domain == Domain::nav2d) {
    const double goals[][2] = {{0, 10}, {0, -9}, {-8, 0}, {9, 0}};
    for (const auto& g : goals) suite.push_back(make_nav2d_task(g[0], g[1]));
  } else {
    for (double f : {8.0, -8.0}) suite.push_back(make_cartpole_task(f));
  }
  return suite;
}

SignalMode default_signal_mode(Domain domain) {
  return domain == Domain::nav2d ? SignalMode::SAR : SignalMode::SAS;
}

namespace {

class Nav2dEnv final : public Environment {
 public:
  explicit Nav2dEnv(TaskSpec spec)
      : spec_(std::move(spec)), task_(std::get<Nav2dTask>(spec_.task)) {}

  std::vector<double> reset() override {
    state_ = {task_.start[0], task_.start[1]};
    steps_ = 0;
    return {state_[0], state_[1]};
  }

  EnvStep step(std::span<const double> action) override {
    const Nav2dStep s = nav2d_step(state_, action, task_);
    state_ = s.next;
    ++steps_;
    EnvStep out;
    out.next_state = {state_[0], state_[1]};
    out.reward = s.reward;
    out.done = s.done || steps_ >= task_.max_steps;
    return out;
  }

  bool terminal() const override {
    const double dx = state_[0] - task_.goal[0];
    const double dy = state_[1] - task_.goal[1];
    return std::sqrt(dx * dx + dy * dy) < task_.goal_radius;
  }

  int state_dim() const override { return 2; }
  int action_dim() const override { return 2; }
  bool discrete_actions() const override { return false; }
  int max_steps() const override { return task_.max_steps; }
  const TaskSpec& spec() const override { return spec_; }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<Nav2dEnv>(spec_);
  }

 private:
  TaskSpec spec_;
  Nav2dTask task_;
  std::array<double, 2> state_{0.0, 0.0};
  int steps_ = 0;
};

class CartPoleEnv final : public Environment {
 public:
  explicit CartPoleEnv(TaskSpec spec)
      : spec_(std::move(spec)), task_(std::get<CartPoleTask>(spec_.task)) {}

  std::vector<double> reset() override {
    state_ = {};
    steps_ = 0;
    return to_vector();
  }

  EnvStep step(std::span<const double> action) override {
    if (action.size() != 2)
      throw std::invalid_argument("cartpole env: expected one-hot 2-vector");
    const int a = action[1] > action[0] ? 1 : 0;
    const CartPoleStep s = cartpole_step(state_, a, task_);
    state_ = s.next;
    ++steps_;
    EnvStep out;
    out.next_state = to_vector();
    out.reward = s.reward;
    out.done = s.done || steps_ >= task_.max_steps;
    return out;
  }

  bool terminal() const override {
    return std::abs(state_.theta) > task_.termination_angle ||
           std::abs(state_.x) > task_.position_bound;
  }

  int state_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  bool discrete_actions() const override { return true; }
  int max_steps() const override { return task_.max_steps; }
  const TaskSpec& spec() const override { return spec_; }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<CartPoleEnv>(spec_);
  }

 private:
  std::vector<double> to_vector() const {
    return {state_.x, state_.x_dot, state_.theta, state_.theta_dot};
  }

  TaskSpec spec_;
  CartPoleTask task_;
  CartPoleState state_;
  int steps_ = 0;
};

}  // namespace

std::unique_ptr<Environment> make_environment(const TaskSpec& spec) {
  if (spec.domain() == Domain::nav2d) return std::make_unique<Nav2dEnv>(spec);
  return std::make_unique<CartPoleEnv>(spec);
}

}  // namespace bprx
