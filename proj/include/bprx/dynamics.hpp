#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bprx/core.hpp"
#include "bprx/rng.hpp"

namespace bprx {

struct KernelParams {
  double delta = 1.0;  // signal standard deviation
  double l = 2.0;      // length scale
};

// Squared-exponential kernel delta^2 * exp(-|x - x'|^2 / (2 l^2)).
double rbf(std::span<const double> x, std::span<const double> x_prime,
           const KernelParams& params);

enum class ModelKind { gp, mlp };

// Widening variances of the per-sample Gaussian likelihood: the GP posterior
// variance gets eps2_gp added on top, the MLP uses the constant eps2_nn.
struct LikelihoodConfig {
  double eps2_gp = 0.1;
  double eps2_nn = 0.1;
};

struct Prediction {
  std::vector<double> mean;      // one entry per output dimension
  std::vector<double> variance;  // model variance before likelihood widening
};

// Exact GP regression with a shared kernel across output dimensions; outputs
// are treated as independent per-dimension Gaussians.
class GpModel {
 public:
  static GpModel fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                     const KernelParams& params, double noise,
                     double initial_jitter = 1e-6);

  Prediction predict(std::span<const double> x_star) const;

  int input_dim() const { return static_cast<int>(X_.cols()); }
  int output_dim() const { return static_cast<int>(Y_.cols()); }
  int n_train() const { return static_cast<int>(X_.rows()); }
  const KernelParams& kernel() const { return params_; }
  double noise() const { return noise_; }
  double jitter() const { return jitter_; }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::MatrixXd& Y() const { return Y_; }
  const Eigen::MatrixXd& cholesky_factor() const { return L_; }

 private:
  GpModel() = default;

  Eigen::MatrixXd X_;      // N x input_dim
  Eigen::MatrixXd Y_;      // N x output_dim
  Eigen::MatrixXd L_;      // lower Cholesky factor of K + (noise + jitter) I
  Eigen::MatrixXd alpha_;  // (K + (noise + jitter) I)^-1 Y
  KernelParams params_;
  double noise_ = 0.0;
  double jitter_ = 1e-6;   // jitter actually used (after escalation)
};

GpModel gp_fit(const std::vector<std::vector<double>>& X,
               const std::vector<std::vector<double>>& Y,
               const KernelParams& params, double noise,
               double initial_jitter = 1e-6);
Prediction gp_predict(const GpModel& model, std::span<const double> x_star);

struct MlpConfig {
  std::vector<int> hidden = {64, 64};
  int epochs = 200;
  double learning_rate = 5e-3;
  double momentum = 0.9;
  int batch_size = 64;
};

// Small fully connected tanh network trained on standardized data with
// mini-batch gradient descent plus momentum. The output layer is initialized
// to zero, so an untrained network predicts the training-output mean.
class MlpModel {
 public:
  static MlpModel fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                      const MlpConfig& config, std::uint64_t seed);
  // Assembles a model directly from parameters (deserialization path).
  static MlpModel from_parameters(std::vector<int> layer_sizes,
                                  std::vector<Eigen::MatrixXd> weights,
                                  std::vector<Eigen::VectorXd> biases,
                                  Eigen::VectorXd x_mean, Eigen::VectorXd x_std,
                                  Eigen::VectorXd y_mean, Eigen::VectorXd y_std);

  Prediction predict(std::span<const double> x_star) const;

  int input_dim() const { return layer_sizes_.front(); }
  int output_dim() const { return layer_sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }
  const Eigen::VectorXd& x_mean() const { return x_mean_; }
  const Eigen::VectorXd& x_std() const { return x_std_; }
  const Eigen::VectorXd& y_mean() const { return y_mean_; }
  const Eigen::VectorXd& y_std() const { return y_std_; }
  double final_loss() const { return final_loss_; }
  int trained_epochs() const { return trained_epochs_; }

 private:
  MlpModel() = default;

  std::vector<int> layer_sizes_;             // input, hidden..., output
  std::vector<Eigen::MatrixXd> weights_;     // weights_[k]: sizes[k+1] x sizes[k]
  std::vector<Eigen::VectorXd> biases_;
  Eigen::VectorXd x_mean_, x_std_, y_mean_, y_std_;
  double final_loss_ = 0.0;
  int trained_epochs_ = 0;
};

MlpModel mlp_fit(const std::vector<std::vector<double>>& X,
                 const std::vector<std::vector<double>>& Y,
                 const MlpConfig& config, std::uint64_t seed);
Prediction mlp_predict(const MlpModel& model, std::span<const double> x_star);

// Fitted state-transition surrogate of one library task: the f_j and xi_j^2
// behind the per-sample Gaussian observation model.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;
  virtual Prediction predict(std::span<const double> x) const = 0;
  virtual ModelKind kind() const = 0;
  virtual const SignalLayout& layout() const = 0;
};

using DynamicsModelPtr = std::shared_ptr<const DynamicsModel>;

DynamicsModelPtr wrap_gp(GpModel model, const SignalLayout& layout);
DynamicsModelPtr wrap_mlp(MlpModel model, const SignalLayout& layout);

const GpModel& as_gp(const DynamicsModel& model);
const MlpModel& as_mlp(const DynamicsModel& model);

// Log of the product of per-sample, per-dimension Gaussian densities
// N(y; f(x), xi^2), with xi^2 = variance + eps2_gp for GP models and eps2_nn
// for MLP models.
double log_likelihood(const DynamicsModel& model,
                      std::span<const TransitionSample> signal,
                      const SignalLayout& layout, const LikelihoodConfig& config);

struct DynamicsFitConfig {
  ModelKind kind = ModelKind::gp;
  KernelParams kernel;
  double gp_noise = 1e-4;
  double gp_jitter = 1e-6;
  int gp_train_cap = 2000;  // uniform subsample above this many points
  MlpConfig mlp;
};

// Packs transition samples per the layout and fits the requested backend.
// rng drives the subsampling above the GP cap and the MLP initialization.
DynamicsModelPtr fit_dynamics_model(std::span<const TransitionSample> samples,
                                    const SignalLayout& layout,
                                    const DynamicsFitConfig& config, Rng& rng);

// Versioned JSON model format; GP factors are recomputed on load.
std::string serialize_model(const DynamicsModel& model);
DynamicsModelPtr deserialize_model(const std::string& bytes);

}  // namespace bprx
