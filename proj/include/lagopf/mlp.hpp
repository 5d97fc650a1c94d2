#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lagopf/network.hpp"
#include "lagopf/rng.hpp"

namespace lagopf {

enum class Activation { relu, sigmoid, linear };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::linear: return "linear";
  }
  return "unknown";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "linear") return Activation::linear;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

/// Dense feed-forward network. weights[k] maps layer k (layer_dims[k] units) to layer k+1.
struct MlpParams {
  std::vector<int> layer_dims;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Activation activation = Activation::relu;
  Activation output_activation = Activation::linear;

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  std::size_t layers() const { return weights.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) n += weights[k].size() + biases[k].size();
    return n;
  }

  void check() const {
    if (layer_dims.size() < 2) throw std::invalid_argument("an MLP needs at least input and output layers");
    if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size())
      throw std::invalid_argument("MLP layer count mismatch");
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (layer_dims[k] < 1 || layer_dims[k + 1] < 1) throw std::invalid_argument("MLP layer dims must be positive");
      if (weights[k].rows() != layer_dims[k + 1] || weights[k].cols() != layer_dims[k] ||
          biases[k].size() != layer_dims[k + 1])
        throw std::invalid_argument("MLP layer " + std::to_string(k) + " does not match its dims");
      if (!weights[k].allFinite() || !biases[k].allFinite())
        throw std::invalid_argument("MLP layer " + std::to_string(k) + " has non-finite parameters");
    }
    if (activation == Activation::linear) throw std::invalid_argument("hidden activation must be relu or sigmoid");
    if (output_activation == Activation::relu) throw std::invalid_argument("output activation must be linear or sigmoid");
  }

  bool operator==(const MlpParams& o) const {
    if (layer_dims != o.layer_dims || activation != o.activation || output_activation != o.output_activation ||
        weights.size() != o.weights.size())
      return false;
    for (std::size_t k = 0; k < weights.size(); ++k)
      if (weights[k] != o.weights[k] || biases[k] != o.biases[k]) return false;
    return true;
  }
};

/// Per-feature affine map: scaled = (x - shift) / scale.
struct Scaler {
  std::vector<double> shift;
  std::vector<double> scale;

  std::size_t size() const { return shift.size(); }

  static Scaler identity(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)}; }

  /// Zero mean, unit variance; features with (near) zero spread keep scale 1.
  static Scaler standardize(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("cannot fit a scaler on no data");
    const std::size_t d = rows.front().size();
    Scaler s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    for (const auto& r : rows)
      for (std::size_t j = 0; j < d; ++j) s.shift[j] += r[j];
    for (double& m : s.shift) m /= static_cast<double>(rows.size());
    std::vector<double> var(d, 0.0);
    for (const auto& r : rows)
      for (std::size_t j = 0; j < d; ++j) var[j] += (r[j] - s.shift[j]) * (r[j] - s.shift[j]);
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(rows.size()));
      if (sd > 1e-12 * std::max(1.0, std::abs(s.shift[j]))) s.scale[j] = sd;
    }
    return s;
  }

  /// Maps [lo, hi] onto [0, 1]; degenerate intervals get scale 1.
  static Scaler box(const std::vector<double>& lo, const std::vector<double>& hi) {
    Scaler s{lo, std::vector<double>(lo.size(), 1.0)};
    for (std::size_t j = 0; j < lo.size(); ++j)
      if (hi[j] > lo[j]) s.scale[j] = hi[j] - lo[j];
    return s;
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - shift[j]) / scale[j];
    return out;
  }

  std::vector<double> invert(std::span<const double> y) const {
    std::vector<double> out(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) out[j] = y[j] * scale[j] + shift[j];
    return out;
  }

  void check() const {
    if (shift.size() != scale.size()) throw std::invalid_argument("scaler shift/scale length mismatch");
    for (std::size_t j = 0; j < scale.size(); ++j)
      if (!(scale[j] > 0.0) || !std::isfinite(scale[j]) || !std::isfinite(shift[j]))
        throw std::invalid_argument("scaler feature " + std::to_string(j) + " is invalid");
  }

  bool operator==(const Scaler&) const = default;
};

enum class Optimizer { sgd, adam };

struct TrainConfig {
  int hidden_width = 64;
  int epochs = 300;
  int batch_size = 32;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  double validation_fraction = 0.0;

  void check() const {
    if (hidden_width < 1 || epochs < 0 || batch_size < 1 || !(learning_rate > 0.0))
      throw std::invalid_argument("training hyperparameters must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
      throw std::invalid_argument("adam betas must lie in [0, 1) and epsilon must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction <= 0.5))
      throw std::invalid_argument("validation_fraction must lie in [0, 0.5]");
  }
};

inline int default_hidden_width(std::size_t buses) { return buses <= 40 ? 64 : 128; }

struct Architecture {
  int hidden_layers = 2;
  Activation hidden = Activation::relu;
  Activation output = Activation::linear;
};

/// Trained network together with the scalers it was fit with; predict works in raw units.
struct Model {
  MlpParams params;
  Scaler input;
  Scaler target;

  std::vector<double> predict(std::span<const double> x) const;

  bool operator==(const Model&) const = default;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, const std::string& what) : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelVersionError : public ModelFormatError {
 public:
  using ModelFormatError::ModelFormatError;
};

namespace detail {

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::linear: return z;
  }
  return z;
}

// derivative expressed through the activation output y
inline double activate_slope(Activation a, double y) {
  switch (a) {
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return y * (1.0 - y);
    case Activation::linear: return 1.0;
  }
  return 1.0;
}

inline void activate_inplace(Activation a, Eigen::MatrixXd& m) {
  if (a == Activation::linear) return;
  m = m.unaryExpr([a](double z) { return activate(a, z); });
}

inline Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows, std::size_t dim) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    if (rows[c].size() != dim) throw std::invalid_argument("row " + std::to_string(c) + " has the wrong dimension");
    for (std::size_t r = 0; r < dim; ++r) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[c][r];
  }
  return m;
}

// Column-batched forward pass keeping every layer's activations.
inline std::vector<Eigen::MatrixXd> forward_all(const MlpParams& p, const Eigen::MatrixXd& x) {
  std::vector<Eigen::MatrixXd> a;
  a.reserve(p.layers() + 1);
  a.push_back(x);
  for (std::size_t k = 0; k < p.layers(); ++k) {
    Eigen::MatrixXd z = p.weights[k] * a.back();
    z.colwise() += p.biases[k];
    activate_inplace(k + 1 == p.layers() ? p.output_activation : p.activation, z);
    a.push_back(std::move(z));
  }
  return a;
}

// Mean squared loss (sum over outputs, mean over columns) and its gradient wrt every parameter.
inline double backprop(const MlpParams& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                       std::vector<Eigen::MatrixXd>& dw, std::vector<Eigen::VectorXd>& db) {
  const auto a = forward_all(p, x);
  const double n = static_cast<double>(x.cols());
  Eigen::MatrixXd delta = a.back() - y;
  const double loss = delta.squaredNorm() / n;
  delta *= 2.0 / n;
  dw.resize(p.layers());
  db.resize(p.layers());
  for (std::size_t k = p.layers(); k-- > 0;) {
    const Activation act = k + 1 == p.layers() ? p.output_activation : p.activation;
    if (act != Activation::linear)
      delta = delta.cwiseProduct(a[k + 1].unaryExpr([act](double v) { return activate_slope(act, v); }));
    dw[k] = delta * a[k].transpose();
    db[k] = delta.rowwise().sum();
    if (k > 0) delta = p.weights[k].transpose() * delta;
  }
  return loss;
}

}  // namespace detail

/// Glorot-uniform weights, zero biases.
inline MlpParams init_params(const std::vector<int>& dims, Activation hidden, Activation output, std::uint64_t seed) {
  MlpParams p;
  p.layer_dims = dims;
  p.activation = hidden;
  p.output_activation = output;
  Rng rng(seed);
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const double limit = std::sqrt(6.0 / (dims[k] + dims[k + 1]));
    Eigen::MatrixXd w(dims[k + 1], dims[k]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(dims[k + 1]));
  }
  p.check();
  return p;
}

inline std::vector<double> forward(const MlpParams& p, std::span<const double> x) {
  if (static_cast<int>(x.size()) != p.input_dim())
    throw std::invalid_argument("input has " + std::to_string(x.size()) + " features, network expects " +
                                std::to_string(p.input_dim()));
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t k = 0; k < p.layers(); ++k) {
    Eigen::VectorXd z = p.weights[k] * a + p.biases[k];
    const Activation act = k + 1 == p.layers() ? p.output_activation : p.activation;
    for (double& v : z) v = detail::activate(act, v);
    a = std::move(z);
  }
  return {a.data(), a.data() + a.size()};
}

inline std::vector<double> Model::predict(std::span<const double> x) const {
  const std::vector<double> scaled = input.apply(x);
  return target.invert(forward(params, scaled));
}

inline double mse_loss(const std::vector<std::vector<double>>& pred, const std::vector<std::vector<double>>& target) {
  if (pred.empty() || pred.size() != target.size()) throw std::invalid_argument("mse_loss: sample count mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != target[i].size()) throw std::invalid_argument("mse_loss: output dimension mismatch");
    for (std::size_t j = 0; j < pred[i].size(); ++j) sum += (target[i][j] - pred[i][j]) * (target[i][j] - pred[i][j]);
  }
  return sum / static_cast<double>(pred.size());
}

/// Parameters flattened layer by layer: row-major weights, then biases.
inline std::vector<double> flatten(const MlpParams& p) {
  std::vector<double> out;
  out.reserve(p.parameter_count());
  for (std::size_t k = 0; k < p.layers(); ++k) {
    for (Eigen::Index r = 0; r < p.weights[k].rows(); ++r)
      for (Eigen::Index c = 0; c < p.weights[k].cols(); ++c) out.push_back(p.weights[k](r, c));
    for (double b : p.biases[k]) out.push_back(b);
  }
  return out;
}

inline void unflatten(MlpParams& p, std::span<const double> flat) {
  if (flat.size() != p.parameter_count()) throw std::invalid_argument("flat parameter vector has the wrong length");
  std::size_t at = 0;
  for (std::size_t k = 0; k < p.layers(); ++k) {
    for (Eigen::Index r = 0; r < p.weights[k].rows(); ++r)
      for (Eigen::Index c = 0; c < p.weights[k].cols(); ++c) p.weights[k](r, c) = flat[at++];
    for (double& b : p.biases[k]) b = flat[at++];
  }
}

/// mse_loss of the raw network on (xs, ys) and its gradient in flatten() order.
inline std::pair<double, std::vector<double>> loss_gradient(const MlpParams& p,
                                                            const std::vector<std::vector<double>>& xs,
                                                            const std::vector<std::vector<double>>& ys) {
  if (xs.empty() || xs.size() != ys.size()) throw std::invalid_argument("loss_gradient: sample count mismatch");
  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;
  const double loss = detail::backprop(p, detail::to_matrix(xs, p.input_dim()), detail::to_matrix(ys, p.output_dim()), dw, db);
  MlpParams g = p;
  g.weights = dw;
  g.biases = db;
  return {loss, flatten(g)};
}

struct TrainResult {
  Model model;
  std::vector<double> loss_history;        // full training-set loss after each epoch, scaled units
  std::vector<double> validation_history;  // empty when validation_fraction = 0
};

/// Mini-batch training on standardized inputs and targets. A fixed target scaler replaces the
/// standardization (used with sigmoid outputs to map a box onto the unit interval).
inline TrainResult train(const std::vector<std::vector<double>>& xs, const std::vector<std::vector<double>>& ys,
                         const TrainConfig& cfg, const Architecture& arch = {},
                         const std::optional<Scaler>& fixed_target = std::nullopt) {
  cfg.check();
  if (xs.empty() || xs.size() != ys.size()) throw std::invalid_argument("train: inputs and targets must be non-empty and paired");
  if (arch.hidden_layers < 1) throw std::invalid_argument("train: at least one hidden layer");
  const std::size_t in_dim = xs.front().size();
  const std::size_t out_dim = ys.front().size();

  Rng rng = Rng::stream(cfg.seed, 0);
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t n_val = 0;
  if (cfg.validation_fraction > 0.0) {
    rng.shuffle(order);
    n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(xs.size())));
  }
  std::vector<std::vector<double>> tx, ty, vx, vy;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dx = i < n_val ? vx : tx;
    auto& dy = i < n_val ? vy : ty;
    dx.push_back(xs[order[i]]);
    dy.push_back(ys[order[i]]);
  }
  if (tx.size() < static_cast<std::size_t>(cfg.batch_size))
    throw std::invalid_argument("train: fewer training samples than batch_size");

  TrainResult out;
  out.model.input = Scaler::standardize(tx);
  out.model.target = fixed_target ? *fixed_target : Scaler::standardize(ty);
  out.model.target.check();
  if (out.model.target.size() != out_dim) throw std::invalid_argument("train: target scaler dimension mismatch");

  auto scaled = [](const Scaler& s, const std::vector<std::vector<double>>& rows, std::size_t dim) {
    std::vector<std::vector<double>> r;
    r.reserve(rows.size());
    for (const auto& row : rows) r.push_back(s.apply(row));
    return detail::to_matrix(r, dim);
  };
  const Eigen::MatrixXd X = scaled(out.model.input, tx, in_dim);
  const Eigen::MatrixXd Y = scaled(out.model.target, ty, out_dim);
  Eigen::MatrixXd VX, VY;
  if (n_val > 0) {
    VX = scaled(out.model.input, vx, in_dim);
    VY = scaled(out.model.target, vy, out_dim);
  }

  std::vector<int> dims{static_cast<int>(in_dim)};
  for (int h = 0; h < arch.hidden_layers; ++h) dims.push_back(cfg.hidden_width);
  dims.push_back(static_cast<int>(out_dim));
  MlpParams& p = out.model.params;
  p = init_params(dims, arch.hidden, arch.output, Rng::stream(cfg.seed, 1).next());
  // training starts from the mean predictor in scaled space
  p.weights.back().setZero();

  std::vector<Eigen::MatrixXd> mw, vw, dw;
  std::vector<Eigen::VectorXd> mb, vb, db;
  for (std::size_t k = 0; k < p.layers(); ++k) {
    mw.push_back(Eigen::MatrixXd::Zero(p.weights[k].rows(), p.weights[k].cols()));
    vw.push_back(mw.back());
    mb.push_back(Eigen::VectorXd::Zero(p.biases[k].size()));
    vb.push_back(mb.back());
  }

  auto full_loss = [&p](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    return (detail::forward_all(p, x).back() - y).squaredNorm() / static_cast<double>(x.cols());
  };

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(X.cols()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng batch_rng = Rng::stream(cfg.seed, 2);
  long step = 0;
  double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const MlpParams p_prev = p;
    const auto mw_prev = mw, vw_prev = vw;
    const auto mb_prev = mb, vb_prev = vb;
    const long step_prev = step;
    batch_rng.shuffle(idx);
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Eigen::MatrixXd bx(X.rows(), static_cast<Eigen::Index>(end - start));
      Eigen::MatrixXd by(Y.rows(), static_cast<Eigen::Index>(end - start));
      for (std::size_t c = start; c < end; ++c) {
        bx.col(static_cast<Eigen::Index>(c - start)) = X.col(idx[c]);
        by.col(static_cast<Eigen::Index>(c - start)) = Y.col(idx[c]);
      }
      detail::backprop(p, bx, by, dw, db);
      ++step;
      if (cfg.optimizer == Optimizer::sgd) {
        for (std::size_t k = 0; k < p.layers(); ++k) {
          p.weights[k] -= lr * dw[k];
          p.biases[k] -= lr * db[k];
        }
        continue;
      }
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      auto adam = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
      };
      for (std::size_t k = 0; k < p.layers(); ++k) {
        adam(p.weights[k], mw[k], vw[k], dw[k]);
        adam(p.biases[k], mb[k], vb[k], db[k]);
      }
    }
    double loss = full_loss(X, Y);
    if (!std::isfinite(loss))
      throw TrainingDiverged(epoch, "training diverged at epoch " + std::to_string(epoch));
    // an epoch that raises the loss by more than 5% is undone and the step size halved
    if (!out.loss_history.empty() && loss > 1.05 * out.loss_history.back()) {
      p = p_prev;
      mw = mw_prev;
      vw = vw_prev;
      mb = mb_prev;
      vb = vb_prev;
      step = step_prev;
      lr *= 0.5;
      loss = out.loss_history.back();
    }
    out.loss_history.push_back(loss);
    if (n_val > 0) out.validation_history.push_back(full_loss(VX, VY));
  }
  return out;
}

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline void write_row(std::ostream& os, const char* key, std::span<const double> v) {
  os << key;
  for (double x : v) os << ' ' << fmt(x);
  os << '\n';
}

}  // namespace detail

/// Text layout: version, dims, activations, input/target scalers, then per layer the row-major
/// weights and the biases, closed by "end".
inline std::string save(const Model& m) {
  m.params.check();
  std::ostringstream os;
  os << "lagopf-mlp " << kModelFormatVersion << '\n';
  os << "dims";
  for (int d : m.params.layer_dims) os << ' ' << d;
  os << '\n';
  os << "activation " << to_string(m.params.activation) << '\n';
  os << "output_activation " << to_string(m.params.output_activation) << '\n';
  detail::write_row(os, "input_shift", m.input.shift);
  detail::write_row(os, "input_scale", m.input.scale);
  detail::write_row(os, "target_shift", m.target.shift);
  detail::write_row(os, "target_scale", m.target.scale);
  for (std::size_t k = 0; k < m.params.layers(); ++k) {
    std::vector<double> w;
    for (Eigen::Index r = 0; r < m.params.weights[k].rows(); ++r)
      for (Eigen::Index c = 0; c < m.params.weights[k].cols(); ++c) w.push_back(m.params.weights[k](r, c));
    detail::write_row(os, "weights", w);
    const Eigen::VectorXd& b = m.params.biases[k];
    detail::write_row(os, "biases", std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
  }
  os << "end\n";
  return os.str();
}

/// Reads one model from the stream, consuming through its "end" line.
inline Model load(std::istream& in) {
  auto next_line = [&in](const char* expect) {
    std::string line;
    if (!std::getline(in, line)) throw ModelFormatError(std::string("corrupt model: missing '") + expect + "' line");
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key != expect) throw ModelFormatError(std::string("corrupt model: expected '") + expect + "', got '" + key + "'");
    std::vector<std::string> toks;
    std::string tok;
    while (ls >> tok) toks.push_back(tok);
    return toks;
  };
  auto numbers = [](const std::vector<std::string>& toks, std::size_t want, const char* what) {
    if (toks.size() != want)
      throw ModelFormatError(std::string("corrupt model: ") + what + " has " + std::to_string(toks.size()) +
                             " values, expected " + std::to_string(want));
    std::vector<double> v;
    v.reserve(want);
    for (const auto& t : toks) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(t, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != t.size()) throw ModelFormatError(std::string("corrupt model: bad number in ") + what);
      v.push_back(x);
    }
    return v;
  };

  const auto header = next_line("lagopf-mlp");
  if (header.size() != 1) throw ModelFormatError("corrupt model: bad header");
  int version = 0;
  try {
    version = std::stoi(header[0]);
  } catch (const std::exception&) {
    throw ModelFormatError("corrupt model: bad version tag");
  }
  if (version != kModelFormatVersion)
    throw ModelVersionError("unsupported model version " + std::to_string(version) + " (reader supports " +
                            std::to_string(kModelFormatVersion) + ")");

  Model m;
  for (const auto& t : next_line("dims")) {
    try {
      m.params.layer_dims.push_back(std::stoi(t));
    } catch (const std::exception&) {
      throw ModelFormatError("corrupt model: bad dims");
    }
  }
  if (m.params.layer_dims.size() < 2) throw ModelFormatError("corrupt model: need at least two dims");
  for (int d : m.params.layer_dims)
    if (d < 1) throw ModelFormatError("corrupt model: non-positive dim");
  try {
    const auto act = next_line("activation");
    const auto out_act = next_line("output_activation");
    if (act.size() != 1 || out_act.size() != 1) throw ModelFormatError("corrupt model: bad activation line");
    m.params.activation = activation_from_string(act[0]);
    m.params.output_activation = activation_from_string(out_act[0]);
  } catch (const std::invalid_argument& e) {
    throw ModelFormatError(std::string("corrupt model: ") + e.what());
  }
  const std::size_t in_dim = static_cast<std::size_t>(m.params.layer_dims.front());
  const std::size_t out_dim = static_cast<std::size_t>(m.params.layer_dims.back());
  m.input.shift = numbers(next_line("input_shift"), in_dim, "input_shift");
  m.input.scale = numbers(next_line("input_scale"), in_dim, "input_scale");
  m.target.shift = numbers(next_line("target_shift"), out_dim, "target_shift");
  m.target.scale = numbers(next_line("target_scale"), out_dim, "target_scale");
  for (std::size_t k = 0; k + 1 < m.params.layer_dims.size(); ++k) {
    const int rows = m.params.layer_dims[k + 1];
    const int cols = m.params.layer_dims[k];
    const auto w = numbers(next_line("weights"), static_cast<std::size_t>(rows) * cols, "weights");
    const auto b = numbers(next_line("biases"), static_cast<std::size_t>(rows), "biases");
    Eigen::MatrixXd wm(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) wm(r, c) = w[static_cast<std::size_t>(r) * cols + c];
    m.params.weights.push_back(std::move(wm));
    m.params.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), rows));
  }
  next_line("end");
  try {
    m.params.check();
    m.input.check();
    m.target.check();
  } catch (const std::invalid_argument& e) {
    throw ModelFormatError(std::string("corrupt model: ") + e.what());
  }
  return m;
}

inline Model load(const std::string& text) {
  std::istringstream in(text);
  return load(in);
}

}  // namespace lagopf
