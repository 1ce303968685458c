#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bprx/baselines.hpp"
#include "bprx/core.hpp"
#include "bprx/dynamics.hpp"
#include "bprx/engine.hpp"
#include "bprx/environments.hpp"
#include "bprx/harness.hpp"
#include "bprx/policies.hpp"

namespace py = pybind11;
using namespace bprx;

namespace {

// Value wrapper: pybind11 holders cannot be shared_ptr-to-const.
struct PyDynamicsModel {
  DynamicsModelPtr ptr;
  const DynamicsModel& get() const {
    if (!ptr) throw std::runtime_error("empty model");
    return *ptr;
  }
};

SelectionMode selection_from_string(const std::string& mode) {
  if (mode == "greedy") return SelectionMode::greedy;
  if (mode == "sample") return SelectionMode::sample;
  throw std::invalid_argument("selection mode must be 'greedy' or 'sample'");
}

// Likelihood of packed (X, Y) batches against one model; the row layout
// mirrors the model's signal layout.
double packed_log_likelihood(const DynamicsModel& model,
                             const std::vector<std::vector<double>>& X,
                             const std::vector<std::vector<double>>& Y,
                             const LikelihoodConfig& config) {
  if (X.size() != Y.size())
    throw std::invalid_argument("X and Y must have the same number of rows");
  constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
  const double widen =
      model.kind() == ModelKind::gp ? config.eps2_gp : config.eps2_nn;
  double total = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const Prediction p = model.predict(X[i]);
    if (Y[i].size() != p.mean.size())
      throw std::invalid_argument("Y row does not match the model output dim");
    for (std::size_t d = 0; d < Y[i].size(); ++d) {
      const double xi2 =
          (model.kind() == ModelKind::gp ? p.variance[d] : 0.0) + widen;
      const double diff = Y[i][d] - p.mean[d];
      total += -0.5 * (kLogTwoPi + std::log(xi2)) - diff * diff / (2.0 * xi2);
    }
  }
  return total;
}

}  // namespace

PYBIND11_MODULE(bprx, m) {
  m.doc() = "Bayesian policy reuse with dynamics-model observation signals";

  m.def("belief_init",
        [](int n) { return belief_init(n).weights; }, py::arg("n"));
  m.def(
      "belief_update",
      [](const std::vector<double>& prior, const std::vector<double>& log_liks) {
        bool degenerate = false;
        Belief posterior = belief_update(Belief{prior}, log_liks, &degenerate);
        return py::make_tuple(posterior.weights, degenerate);
      },
      py::arg("prior"), py::arg("log_likelihoods"),
      "Returns (posterior, degenerate_flag)");
  m.def(
      "select_policy",
      [](const std::vector<double>& belief, const std::string& mode,
         std::uint64_t seed) {
        Rng rng(seed);
        return select_policy(Belief{belief}, selection_from_string(mode), rng);
      },
      py::arg("belief"), py::arg("mode") = "greedy", py::arg("seed") = 0);
  m.def(
      "discounted_return",
      [](const std::vector<double>& rewards, double gamma) {
        return discounted_return(rewards, DiscountConfig{gamma});
      },
      py::arg("rewards"), py::arg("gamma") = 1.0);
  m.def(
      "rbf",
      [](const std::vector<double>& x, const std::vector<double>& x_prime,
         double delta, double l) {
        return rbf(x, x_prime, KernelParams{delta, l});
      },
      py::arg("x"), py::arg("x_prime"), py::arg("delta") = 1.0,
      py::arg("l") = 2.0);

  py::class_<PyDynamicsModel>(m, "DynamicsModel")
      .def("predict",
           [](const PyDynamicsModel& model, const std::vector<double>& x) {
             const Prediction p = model.get().predict(x);
             return py::make_tuple(p.mean, p.variance);
           })
      .def_property_readonly("kind",
                             [](const PyDynamicsModel& model) {
                               return model.get().kind() == ModelKind::gp
                                          ? std::string("gp")
                                          : std::string("mlp");
                             })
      .def(
          "log_likelihood",
          [](const PyDynamicsModel& model,
             const std::vector<std::vector<double>>& X,
             const std::vector<std::vector<double>>& Y,
             const LikelihoodConfig& config) {
            return packed_log_likelihood(model.get(), X, Y, config);
          },
          py::arg("X"), py::arg("Y"), py::arg("config") = LikelihoodConfig{})
      .def("to_json", [](const PyDynamicsModel& model) {
        return serialize_model(model.get());
      });

  py::class_<LikelihoodConfig>(m, "LikelihoodConfig")
      .def(py::init([](double eps2_gp, double eps2_nn) {
             return LikelihoodConfig{eps2_gp, eps2_nn};
           }),
           py::arg("eps2_gp") = 0.1, py::arg("eps2_nn") = 0.1)
      .def_readwrite("eps2_gp", &LikelihoodConfig::eps2_gp)
      .def_readwrite("eps2_nn", &LikelihoodConfig::eps2_nn);

  m.def(
      "fit_gp",
      [](const std::vector<std::vector<double>>& X,
         const std::vector<std::vector<double>>& Y, double delta, double l,
         double noise, double jitter, const std::string& mode, int batch) {
        GpModel model = gp_fit(X, Y, KernelParams{delta, l}, noise, jitter);
        SignalLayout layout;
        layout.mode = signal_mode_from_string(mode);
        layout.input_dim = model.input_dim();
        layout.output_dim = model.output_dim();
        layout.batch_size = batch;
        return PyDynamicsModel{wrap_gp(std::move(model), layout)};
      },
      py::arg("X"), py::arg("Y"), py::arg("delta") = 1.0, py::arg("l") = 2.0,
      py::arg("noise") = 1e-4, py::arg("jitter") = 1e-6,
      py::arg("mode") = "SARS", py::arg("batch") = 1);
  m.def(
      "fit_mlp",
      [](const std::vector<std::vector<double>>& X,
         const std::vector<std::vector<double>>& Y, std::vector<int> hidden,
         int epochs, double learning_rate, double momentum, int batch_size,
         std::uint64_t seed, const std::string& mode) {
        MlpConfig config;
        config.hidden = std::move(hidden);
        config.epochs = epochs;
        config.learning_rate = learning_rate;
        config.momentum = momentum;
        config.batch_size = batch_size;
        MlpModel model = mlp_fit(X, Y, config, seed);
        SignalLayout layout;
        layout.mode = signal_mode_from_string(mode);
        layout.input_dim = model.input_dim();
        layout.output_dim = model.output_dim();
        return PyDynamicsModel{wrap_mlp(std::move(model), layout)};
      },
      py::arg("X"), py::arg("Y"), py::arg("hidden") = std::vector<int>{64, 64},
      py::arg("epochs") = 200, py::arg("learning_rate") = 1e-3,
      py::arg("momentum") = 0.9, py::arg("batch_size") = 64,
      py::arg("seed") = 0, py::arg("mode") = "SARS");
  m.def("model_from_json", [](const std::string& text) {
    return PyDynamicsModel{deserialize_model(text)};
  });

  py::class_<Nav2dTask>(m, "Nav2dTask")
      .def(py::init([](double gx, double gy, double control_cost) {
             Nav2dTask task;
             task.goal = {gx, gy};
             task.control_cost = control_cost;
             return task;
           }),
           py::arg("goal_x"), py::arg("goal_y"), py::arg("control_cost") = 0.1)
      .def_readonly("max_steps", &Nav2dTask::max_steps);
  m.def(
      "nav2d_step",
      [](const std::vector<double>& state, const std::vector<double>& action,
         const Nav2dTask& task) {
        const Nav2dStep s = nav2d_step(state, action, task);
        return py::make_tuple(std::vector<double>{s.next[0], s.next[1]},
                              s.reward, s.done);
      },
      py::arg("state"), py::arg("action"), py::arg("task"));

  py::class_<CartPoleTask>(m, "CartPoleTask")
      .def(py::init([](double disturbance) {
             CartPoleTask task;
             task.disturbance = disturbance;
             return task;
           }),
           py::arg("disturbance") = 0.0)
      .def_readonly("max_steps", &CartPoleTask::max_steps);
  m.def(
      "cartpole_step",
      [](const std::vector<double>& state, int action, const CartPoleTask& task) {
        if (state.size() != 4)
          throw std::invalid_argument("cartpole state must be 4-D");
        const CartPoleStep s = cartpole_step(
            CartPoleState{state[0], state[1], state[2], state[3]}, action, task);
        return py::make_tuple(
            std::vector<double>{s.next.x, s.next.x_dot, s.next.theta,
                                s.next.theta_dot},
            s.reward, s.done);
      },
      py::arg("state"), py::arg("action"), py::arg("task"));

  m.def("source_task_ids", [](const std::string& domain) {
    std::vector<std::string> ids;
    for (const TaskSpec& spec : make_source_suite(domain_from_string(domain)))
      ids.push_back(spec.id);
    return ids;
  });

  py::class_<PrDrlState>(m, "PrDrlState")
      .def(py::init([](int n) { return make_pr_state(n); }), py::arg("n"))
      .def("probabilities", [](const PrDrlState& s) { return pr_probabilities(s); })
      .def("select",
           [](PrDrlState& s, std::uint64_t seed) {
             Rng rng(seed);
             return pr_select(s, rng);
           },
           py::arg("seed") = 0)
      .def("update", [](PrDrlState& s, int chosen, double ret) {
        pr_update(s, chosen, ret);
      })
      .def_readonly("gains", &PrDrlState::gains)
      .def_readonly("counts", &PrDrlState::counts)
      .def_readonly("temperature", &PrDrlState::temperature);

  py::class_<OpsState>(m, "OpsState")
      .def(py::init([](int n) { return make_ops_state(n); }), py::arg("n"))
      .def("scores", [](const OpsState& s) { return ops_scores(s); })
      .def("select", [](const OpsState& s) { return ops_select(s); })
      .def("update", [](OpsState& s, int chosen, double ret) {
        ops_update(s, chosen, ret);
      })
      .def_readonly("gains", &OpsState::gains)
      .def_readonly("counts", &OpsState::counts);

  m.def(
      "fit_sources_json",
      [](const std::string& config_json, const std::filesystem::path& out_dir) {
        fit_sources(parse_config(config_json), out_dir);
      },
      py::arg("config_json"), py::arg("out_dir"));
  m.def(
      "run_experiment_json",
      [](const std::string& config_json, const std::filesystem::path& library,
         const std::filesystem::path& out_dir) {
        const ExperimentConfig config = parse_config(config_json);
        const RunOutput output = run_experiment(config, library);
        write_run_outputs(output, out_dir);
        return output.rows.size();
      },
      py::arg("config_json"), py::arg("library_dir"), py::arg("out_dir"));

  py::register_exception<ConfigError>(m, "ConfigError");
}
