#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bprx/core.hpp"

namespace bprx {

enum class Domain { nav2d, cartpole };

const char* to_string(Domain domain);
Domain domain_from_string(const std::string& name);

// Point-mass navigation on the plane: s' = s + clip(a), reward is the
// negative distance to the goal minus a quadratic control cost.
struct Nav2dTask {
  std::array<double, 2> goal{0.0, 0.0};
  std::array<double, 2> start{0.0, 0.0};
  double goal_radius = 0.5;
  int max_steps = 100;
  double control_cost = 0.1;
};

struct Nav2dStep {
  std::array<double, 2> next;
  double reward;
  bool done;  // within goal_radius of the goal
};

Nav2dStep nav2d_step(std::span<const double> state, std::span<const double> action,
                     const Nav2dTask& task);

// Classic cart-pole with a constant disturbance force added to every push.
// Constants follow the canonical formulation (Euler integration).
struct CartPoleTask {
  double gravity = 9.8;
  double mass_cart = 1.0;
  double mass_pole = 0.1;
  double half_length = 0.5;
  double time_step = 0.02;
  double force = 10.0;        // magnitude of the commanded push
  double disturbance = 0.0;   // F', signed
  double reward_angle = 12.0 * 3.14159265358979323846 / 180.0;
  double termination_angle = 12.0 * 3.14159265358979323846 / 180.0;
  double position_bound = 2.4;
  int max_steps = 100;
};

struct CartPoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
};

struct CartPoleStep {
  CartPoleState next;
  double reward;
  bool done;  // pole fell or cart left the track
};

CartPoleStep cartpole_step(const CartPoleState& state, int action,
                           const CartPoleTask& task);

using TaskVariant = std::variant<Nav2dTask, CartPoleTask>;

struct TaskSpec {
  std::string id;
  TaskVariant task;

  Domain domain() const {
    return std::holds_alternative<Nav2dTask>(task) ? Domain::nav2d
                                                   : Domain::cartpole;
  }
};

TaskSpec make_nav2d_task(double gx, double gy, const Nav2dTask& base = {});
TaskSpec make_cartpole_task(double disturbance, const CartPoleTask& base = {});

// Source tasks from the experimental setup: four navigation goals, two
// disturbance signs for cart-pole.
std::vector<TaskSpec> make_source_suite(Domain domain);
// Near-source target tasks used by the main comparison.
std::vector<TaskSpec> make_target_suite(Domain domain);
// Far-from-source targets used by the continual-learning runs.
std::vector<TaskSpec> make_continual_suite(Domain domain);

struct EnvStep {
  std::vector<double> next_state;
  double reward = 0.0;
  bool done = false;
};

// Uniform mutable-state-machine view over the tasks. Actions are flat
// vectors; discrete environments take a one-hot encoding. done folds in the
// per-task step budget M.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::vector<double> reset() = 0;
  virtual EnvStep step(std::span<const double> action) = 0;
  // True when the current state already satisfies the termination condition
  // (goal reached, pole fallen); episode loops test this before acting.
  virtual bool terminal() const = 0;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual bool discrete_actions() const = 0;
  virtual int max_steps() const = 0;
  virtual const TaskSpec& spec() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

std::unique_ptr<Environment> make_environment(const TaskSpec& spec);

// Domain defaults for the observation signal: nav2d tasks differ only in
// reward (SAR), cart-pole tasks only in dynamics (SAS).
SignalMode default_signal_mode(Domain domain);

}  // namespace bprx
