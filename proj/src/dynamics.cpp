#include "bprx/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace bprx {

double rbf(std::span<const double> x, std::span<const double> x_prime,
           const KernelParams& params) {
  if (x.size() != x_prime.size())
    throw std::invalid_argument("rbf: dimension mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - x_prime[i];
    sq += d * d;
  }
  return params.delta * params.delta *
         std::exp(-sq / (2.0 * params.l * params.l));
}

namespace {

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X,
                              const KernelParams& params) {
  const Eigen::Index n = X.rows();
  // |x_i - x_j|^2 = |x_i|^2 + |x_j|^2 - 2 x_i . x_j
  const Eigen::VectorXd sq = X.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
                       2.0 * (X * X.transpose());
  const double scale = -1.0 / (2.0 * params.l * params.l);
  return (params.delta * params.delta) *
         (d2.cwiseMax(0.0) * scale).array().exp().matrix();
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("empty data matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) !=
        m.cols())
      throw std::invalid_argument("ragged data matrix");
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

}  // namespace

GpModel GpModel::fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                     const KernelParams& params, double noise,
                     double initial_jitter) {
  if (X.rows() < 1) throw std::invalid_argument("gp_fit: no training points");
  if (X.rows() != Y.rows())
    throw std::invalid_argument("gp_fit: X/Y row mismatch");
  if (noise < 0.0) throw std::invalid_argument("gp_fit: negative noise");
  if (!X.allFinite() || !Y.allFinite())
    throw std::invalid_argument("gp_fit: non-finite training data");

  const Eigen::MatrixXd K = kernel_matrix(X, params);
  double jitter = std::max(initial_jitter, 0.0);

  Eigen::LLT<Eigen::MatrixXd> llt;
  while (true) {
    Eigen::MatrixXd A = K;
    A.diagonal().array() += noise + jitter;
    llt.compute(A);
    if (llt.info() == Eigen::Success) break;
    jitter = jitter == 0.0 ? 1e-6 : jitter * 10.0;
    if (jitter > 1e-2) {
      const double max_diag = K.diagonal().maxCoeff() + noise;
      throw std::runtime_error(
          "gp_fit: kernel matrix ill-conditioned (condition estimate >= " +
          std::to_string(max_diag / 1e-2) + " after jitter escalation)");
    }
  }

  GpModel model;
  model.X_ = X;
  model.Y_ = Y;
  model.params_ = params;
  model.noise_ = noise;
  model.jitter_ = jitter;
  model.L_ = llt.matrixL();
  model.alpha_ = llt.solve(Y);
  return model;
}

Prediction GpModel::predict(std::span<const double> x_star) const {
  if (static_cast<Eigen::Index>(x_star.size()) != X_.cols())
    throw std::invalid_argument("gp_predict: input dimension mismatch");
  const Eigen::Index n = X_.rows();
  Eigen::VectorXd k_star(n);
  const double inv_2l2 = 1.0 / (2.0 * params_.l * params_.l);
  const double delta2 = params_.delta * params_.delta;
  for (Eigen::Index i = 0; i < n; ++i) {
    double sq = 0.0;
    for (Eigen::Index j = 0; j < X_.cols(); ++j) {
      const double d = X_(i, j) - x_star[static_cast<std::size_t>(j)];
      sq += d * d;
    }
    k_star(i) = delta2 * std::exp(-sq * inv_2l2);
  }

  const Eigen::VectorXd mean = alpha_.transpose() * k_star;
  const Eigen::VectorXd v =
      L_.triangularView<Eigen::Lower>().solve(k_star);
  const double var = std::max(delta2 - v.squaredNorm(), 0.0);

  Prediction out;
  out.mean.assign(mean.data(), mean.data() + mean.size());
  out.variance.assign(static_cast<std::size_t>(Y_.cols()), var);
  return out;
}

GpModel gp_fit(const std::vector<std::vector<double>>& X,
               const std::vector<std::vector<double>>& Y,
               const KernelParams& params, double noise, double initial_jitter) {
  return GpModel::fit(to_matrix(X), to_matrix(Y), params, noise, initial_jitter);
}

Prediction gp_predict(const GpModel& model, std::span<const double> x_star) {
  return model.predict(x_star);
}

MlpModel MlpModel::fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                       const MlpConfig& config, std::uint64_t seed) {
  const Eigen::Index n = X.rows();
  if (n < 1) throw std::invalid_argument("mlp_fit: no training points");
  if (X.rows() != Y.rows()) throw std::invalid_argument("mlp_fit: X/Y mismatch");
  if (config.batch_size < 1 || config.batch_size > n)
    throw std::invalid_argument("mlp_fit: need N >= batch size >= 1");
  if (config.epochs < 0) throw std::invalid_argument("mlp_fit: negative epochs");

  MlpModel model;
  model.layer_sizes_.push_back(static_cast<int>(X.cols()));
  for (int h : config.hidden) model.layer_sizes_.push_back(h);
  model.layer_sizes_.push_back(static_cast<int>(Y.cols()));

  model.x_mean_ = X.colwise().mean();
  model.y_mean_ = Y.colwise().mean();
  auto stddev = [n](const Eigen::MatrixXd& M, const Eigen::VectorXd& mean) {
    Eigen::VectorXd s =
        ((M.rowwise() - mean.transpose()).array().square().colwise().sum() /
         static_cast<double>(n))
            .sqrt();
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s(i) <= 0.0) s(i) = 1.0;
    return s;
  };
  model.x_std_ = stddev(X, model.x_mean_);
  model.y_std_ = stddev(Y, model.y_mean_);

  const Eigen::MatrixXd Xs =
      (X.rowwise() - model.x_mean_.transpose()).array().rowwise() /
      model.x_std_.transpose().array();
  const Eigen::MatrixXd Ys =
      (Y.rowwise() - model.y_mean_.transpose()).array().rowwise() /
      model.y_std_.transpose().array();

  Rng rng(seed);
  const std::size_t n_layers = model.layer_sizes_.size() - 1;
  for (std::size_t k = 0; k < n_layers; ++k) {
    const int fan_in = model.layer_sizes_[k];
    const int fan_out = model.layer_sizes_[k + 1];
    Eigen::MatrixXd W(fan_out, fan_in);
    if (k + 1 == n_layers) {
      W.setZero();  // untrained network predicts the output mean
    } else {
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (Eigen::Index i = 0; i < W.rows(); ++i)
        for (Eigen::Index j = 0; j < W.cols(); ++j)
          W(i, j) = rng.uniform(-bound, bound);
    }
    model.weights_.push_back(std::move(W));
    model.biases_.push_back(Eigen::VectorXd::Zero(fan_out));
  }

  std::vector<Eigen::MatrixXd> vel_w;
  std::vector<Eigen::VectorXd> vel_b;
  for (std::size_t k = 0; k < n_layers; ++k) {
    vel_w.push_back(Eigen::MatrixXd::Zero(model.weights_[k].rows(),
                                          model.weights_[k].cols()));
    vel_b.push_back(Eigen::VectorXd::Zero(model.biases_[k].size()));
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  std::vector<Eigen::MatrixXd> activations(n_layers + 1);
  double loss = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with our own rng keeps runs bit-reproducible.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = rng.uniform_index(i);
      std::swap(order[i - 1], order[j]);
    }
    loss = 0.0;
    Eigen::Index seen = 0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index b =
          std::min<Eigen::Index>(config.batch_size, n - start);
      Eigen::MatrixXd xb(b, Xs.cols());
      Eigen::MatrixXd yb(b, Ys.cols());
      for (Eigen::Index r = 0; r < b; ++r) {
        xb.row(r) = Xs.row(order[static_cast<std::size_t>(start + r)]);
        yb.row(r) = Ys.row(order[static_cast<std::size_t>(start + r)]);
      }

      activations[0] = xb;
      for (std::size_t k = 0; k < n_layers; ++k) {
        Eigen::MatrixXd z =
            (activations[k] * model.weights_[k].transpose()).rowwise() +
            model.biases_[k].transpose();
        activations[k + 1] = (k + 1 == n_layers)
                                 ? std::move(z)
                                 : z.array().tanh().matrix();
      }

      Eigen::MatrixXd delta = activations[n_layers] - yb;  // b x out
      loss += delta.squaredNorm();
      seen += b * Ys.cols();
      delta *= 2.0 / static_cast<double>(b * Ys.cols());

      for (std::size_t k = n_layers; k-- > 0;) {
        const Eigen::MatrixXd grad_w = delta.transpose() * activations[k];
        const Eigen::VectorXd grad_b = delta.colwise().sum();
        if (k > 0) {
          delta = (delta * model.weights_[k]).array() *
                  (1.0 - activations[k].array().square());
        }
        vel_w[k] = config.momentum * vel_w[k] - config.learning_rate * grad_w;
        vel_b[k] = config.momentum * vel_b[k] - config.learning_rate * grad_b;
        model.weights_[k] += vel_w[k];
        model.biases_[k] += vel_b[k];
      }
    }
    loss /= static_cast<double>(seen);
    if (!std::isfinite(loss))
      throw std::runtime_error(
          "mlp_fit: training diverged (non-finite loss); try a smaller "
          "learning rate");
  }
  model.final_loss_ = loss;
  model.trained_epochs_ = config.epochs;
  return model;
}

MlpModel MlpModel::from_parameters(std::vector<int> layer_sizes,
                                   std::vector<Eigen::MatrixXd> weights,
                                   std::vector<Eigen::VectorXd> biases,
                                   Eigen::VectorXd x_mean, Eigen::VectorXd x_std,
                                   Eigen::VectorXd y_mean, Eigen::VectorXd y_std) {
  if (layer_sizes.size() < 2 || weights.size() != layer_sizes.size() - 1 ||
      biases.size() != weights.size())
    throw std::invalid_argument("mlp: inconsistent layer shapes");
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    if (weights[k].rows() != layer_sizes[k + 1] ||
        weights[k].cols() != layer_sizes[k] ||
        biases[k].size() != layer_sizes[k + 1])
      throw std::invalid_argument("mlp: inconsistent layer shapes");
    if (!weights[k].allFinite() || !biases[k].allFinite())
      throw std::invalid_argument("mlp: non-finite parameters");
  }
  MlpModel model;
  model.layer_sizes_ = std::move(layer_sizes);
  model.weights_ = std::move(weights);
  model.biases_ = std::move(biases);
  model.x_mean_ = std::move(x_mean);
  model.x_std_ = std::move(x_std);
  model.y_mean_ = std::move(y_mean);
  model.y_std_ = std::move(y_std);
  return model;
}

Prediction MlpModel::predict(std::span<const double> x_star) const {
  if (static_cast<int>(x_star.size()) != input_dim())
    throw std::invalid_argument("mlp_predict: input dimension mismatch");
  Eigen::VectorXd a(input_dim());
  for (int i = 0; i < input_dim(); ++i)
    a(i) = (x_star[static_cast<std::size_t>(i)] - x_mean_(i)) / x_std_(i);
  const std::size_t n_layers = weights_.size();
  for (std::size_t k = 0; k < n_layers; ++k) {
    Eigen::VectorXd z = weights_[k] * a + biases_[k];
    a = (k + 1 == n_layers) ? std::move(z) : z.array().tanh().matrix();
  }
  Prediction out;
  out.mean.resize(static_cast<std::size_t>(output_dim()));
  for (int d = 0; d < output_dim(); ++d)
    out.mean[static_cast<std::size_t>(d)] = a(d) * y_std_(d) + y_mean_(d);
  out.variance.assign(static_cast<std::size_t>(output_dim()), 0.0);
  return out;
}

MlpModel mlp_fit(const std::vector<std::vector<double>>& X,
                 const std::vector<std::vector<double>>& Y,
                 const MlpConfig& config, std::uint64_t seed) {
  return MlpModel::fit(to_matrix(X), to_matrix(Y), config, seed);
}

Prediction mlp_predict(const MlpModel& model, std::span<const double> x_star) {
  return model.predict(x_star);
}

namespace {

class GpDynamicsModel final : public DynamicsModel {
 public:
  GpDynamicsModel(GpModel model, SignalLayout layout)
      : model_(std::move(model)), layout_(layout) {}
  Prediction predict(std::span<const double> x) const override {
    return model_.predict(x);
  }
  ModelKind kind() const override { return ModelKind::gp; }
  const SignalLayout& layout() const override { return layout_; }
  const GpModel& gp() const { return model_; }

 private:
  GpModel model_;
  SignalLayout layout_;
};

class MlpDynamicsModel final : public DynamicsModel {
 public:
  MlpDynamicsModel(MlpModel model, SignalLayout layout)
      : model_(std::move(model)), layout_(layout) {}
  Prediction predict(std::span<const double> x) const override {
    return model_.predict(x);
  }
  ModelKind kind() const override { return ModelKind::mlp; }
  const SignalLayout& layout() const override { return layout_; }
  const MlpModel& mlp() const { return model_; }

 private:
  MlpModel model_;
  SignalLayout layout_;
};

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

}  // namespace

DynamicsModelPtr wrap_gp(GpModel model, const SignalLayout& layout) {
  if (model.input_dim() != layout.input_dim ||
      model.output_dim() != layout.output_dim)
    throw std::invalid_argument("wrap_gp: model does not match layout");
  return std::make_shared<GpDynamicsModel>(std::move(model), layout);
}

DynamicsModelPtr wrap_mlp(MlpModel model, const SignalLayout& layout) {
  if (model.input_dim() != layout.input_dim ||
      model.output_dim() != layout.output_dim)
    throw std::invalid_argument("wrap_mlp: model does not match layout");
  return std::make_shared<MlpDynamicsModel>(std::move(model), layout);
}

const GpModel& as_gp(const DynamicsModel& model) {
  const auto* gp = dynamic_cast<const GpDynamicsModel*>(&model);
  if (!gp) throw std::invalid_argument("model is not a GP");
  return gp->gp();
}

const MlpModel& as_mlp(const DynamicsModel& model) {
  const auto* mlp = dynamic_cast<const MlpDynamicsModel*>(&model);
  if (!mlp) throw std::invalid_argument("model is not an MLP");
  return mlp->mlp();
}

double log_likelihood(const DynamicsModel& model,
                      std::span<const TransitionSample> signal,
                      const SignalLayout& layout, const LikelihoodConfig& config) {
  const double widen =
      model.kind() == ModelKind::gp ? config.eps2_gp : config.eps2_nn;
  double total = 0.0;
  for (const TransitionSample& sample : signal) {
    const auto x = pack_input(sample);
    const auto y = pack_output(sample, layout);
    const Prediction p = model.predict(x);
    // Per-sample subtotal first, so a batch sums exactly like the sum of
    // single-sample evaluations.
    double sample_total = 0.0;
    for (std::size_t d = 0; d < y.size(); ++d) {
      const double xi2 =
          (model.kind() == ModelKind::gp ? p.variance[d] : 0.0) + widen;
      if (!(xi2 > 0.0))
        throw std::invalid_argument("log_likelihood: non-positive variance");
      const double diff = y[d] - p.mean[d];
      sample_total +=
          -0.5 * (kLogTwoPi + std::log(xi2)) - diff * diff / (2.0 * xi2);
    }
    total += sample_total;
  }
  return total;
}

DynamicsModelPtr fit_dynamics_model(std::span<const TransitionSample> samples,
                                    const SignalLayout& layout,
                                    const DynamicsFitConfig& config, Rng& rng) {
  if (samples.empty())
    throw std::invalid_argument("fit_dynamics_model: no samples");
  std::vector<std::size_t> keep(samples.size());
  std::iota(keep.begin(), keep.end(), 0);
  if (config.kind == ModelKind::gp &&
      static_cast<int>(samples.size()) > config.gp_train_cap) {
    // Partial Fisher-Yates: the first cap entries are a uniform subsample.
    for (int i = 0; i < config.gp_train_cap; ++i) {
      const std::size_t j =
          static_cast<std::size_t>(i) +
          rng.uniform_index(keep.size() - static_cast<std::size_t>(i));
      std::swap(keep[static_cast<std::size_t>(i)], keep[j]);
    }
    keep.resize(static_cast<std::size_t>(config.gp_train_cap));
    std::sort(keep.begin(), keep.end());
  }

  Eigen::MatrixXd X(static_cast<Eigen::Index>(keep.size()), layout.input_dim);
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(keep.size()), layout.output_dim);
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto x = pack_input(samples[keep[r]]);
    const auto y = pack_output(samples[keep[r]], layout);
    if (static_cast<int>(x.size()) != layout.input_dim)
      throw std::invalid_argument("fit_dynamics_model: sample/layout mismatch");
    for (int c = 0; c < layout.input_dim; ++c)
      X(static_cast<Eigen::Index>(r), c) = x[static_cast<std::size_t>(c)];
    for (int c = 0; c < layout.output_dim; ++c)
      Y(static_cast<Eigen::Index>(r), c) = y[static_cast<std::size_t>(c)];
  }

  if (config.kind == ModelKind::gp) {
    return wrap_gp(
        GpModel::fit(X, Y, config.kernel, config.gp_noise, config.gp_jitter),
        layout);
  }
  return wrap_mlp(MlpModel::fit(X, Y, config.mlp, rng.next_u64()), layout);
}

namespace {

using nlohmann::json;

json layout_to_json(const SignalLayout& layout) {
  return json{{"mode", to_string(layout.mode)},
              {"input_dim", layout.input_dim},
              {"output_dim", layout.output_dim}};
}

SignalLayout layout_from_json(const json& j) {
  SignalLayout layout;
  layout.mode = signal_mode_from_string(j.at("mode").get<std::string>());
  layout.input_dim = j.at("input_dim").get<int>();
  layout.output_dim = j.at("output_dim").get<int>();
  if (layout.input_dim < 1 || layout.output_dim < 1)
    throw std::invalid_argument("model file: invalid layout dims");
  return layout;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols_expected = -1) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument("model file: expected non-empty matrix");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  if (cols_expected >= 0 && cols != cols_expected)
    throw std::invalid_argument("model file: matrix shape mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw std::invalid_argument("model file: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
      if (!std::isfinite(m(i, c)))
        throw std::invalid_argument("model file: non-finite value");
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
    if (!std::isfinite(v(i)))
      throw std::invalid_argument("model file: non-finite value");
  }
  return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

std::string serialize_model(const DynamicsModel& model) {
  json j;
  j["version"] = 1;
  j["layout"] = layout_to_json(model.layout());
  if (model.kind() == ModelKind::gp) {
    const GpModel& gp = as_gp(model);
    j["kind"] = "gp";
    j["gp"] = json{{"delta", gp.kernel().delta},
                   {"l", gp.kernel().l},
                   {"noise", gp.noise()},
                   {"jitter", gp.jitter()},
                   {"X", matrix_to_json(gp.X())},
                   {"Y", matrix_to_json(gp.Y())}};
  } else {
    const MlpModel& mlp = as_mlp(model);
    j["kind"] = "mlp";
    json weights = json::array();
    json biases = json::array();
    for (std::size_t k = 0; k < mlp.weights().size(); ++k) {
      json flat = json::array();  // row-major
      const Eigen::MatrixXd& W = mlp.weights()[k];
      for (Eigen::Index r = 0; r < W.rows(); ++r)
        for (Eigen::Index c = 0; c < W.cols(); ++c) flat.push_back(W(r, c));
      weights.push_back(std::move(flat));
      biases.push_back(vector_to_json(mlp.biases()[k]));
    }
    j["mlp"] = json{{"layers", mlp.layer_sizes()},
                    {"activation", "tanh"},
                    {"weights", std::move(weights)},
                    {"biases", std::move(biases)},
                    {"x_mean", vector_to_json(mlp.x_mean())},
                    {"x_std", vector_to_json(mlp.x_std())},
                    {"y_mean", vector_to_json(mlp.y_mean())},
                    {"y_std", vector_to_json(mlp.y_std())}};
  }
  return j.dump();
}

DynamicsModelPtr deserialize_model(const std::string& bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model file: parse error: ") +
                                e.what());
  }
  try {
    if (j.at("version").get<int>() != 1)
      throw std::invalid_argument("model file: unsupported version");
    const SignalLayout layout = layout_from_json(j.at("layout"));
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gp") {
      const json& g = j.at("gp");
      KernelParams params{g.at("delta").get<double>(), g.at("l").get<double>()};
      if (!(params.delta > 0.0) || !(params.l > 0.0))
        throw std::invalid_argument("model file: invalid kernel params");
      const Eigen::MatrixXd X = matrix_from_json(g.at("X"), layout.input_dim);
      const Eigen::MatrixXd Y = matrix_from_json(g.at("Y"), layout.output_dim);
      if (X.rows() != Y.rows())
        throw std::invalid_argument("model file: X/Y row mismatch");
      return wrap_gp(GpModel::fit(X, Y, params, g.at("noise").get<double>(),
                                  g.at("jitter").get<double>()),
                     layout);
    }
    if (kind == "mlp") {
      const json& m = j.at("mlp");
      const std::vector<int> layers = m.at("layers").get<std::vector<int>>();
      if (layers.size() < 2)
        throw std::invalid_argument("model file: too few layers");
      std::vector<Eigen::MatrixXd> weights;
      std::vector<Eigen::VectorXd> biases;
      const json& jw = m.at("weights");
      const json& jb = m.at("biases");
      if (jw.size() != layers.size() - 1 || jb.size() != layers.size() - 1)
        throw std::invalid_argument("model file: layer count mismatch");
      for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
        const Eigen::Index rows = layers[k + 1];
        const Eigen::Index cols = layers[k];
        const json& flat = jw.at(k);
        if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
          throw std::invalid_argument("model file: weight size mismatch");
        Eigen::MatrixXd W(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index c = 0; c < cols; ++c)
            W(r, c) = flat.at(static_cast<std::size_t>(r * cols + c)).get<double>();
        weights.push_back(std::move(W));
        biases.push_back(vector_from_json(jb.at(k)));
      }
      MlpModel model = MlpModel::from_parameters(
          layers, std::move(weights), std::move(biases),
          vector_from_json(m.at("x_mean")), vector_from_json(m.at("x_std")),
          vector_from_json(m.at("y_mean")), vector_from_json(m.at("y_std")));
      if (model.input_dim() != layout.input_dim ||
          model.output_dim() != layout.output_dim)
        throw std::invalid_argument("model file: layout/layer mismatch");
      return wrap_mlp(std::move(model), layout);
    }
    throw std::invalid_argument("model file: unsupported kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model file: schema violation: ") +
                                e.what());
  }
}

}  // namespace bprx
