#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hyperparams.hpp"
#include "rng.hpp"

namespace specpoison {

/// One labeled feature window. Label 1 is the positive class ("busy" for the
/// transmitter, "ACK" for the adversary); label 0 is "idle" / "no ACK".
struct Sample {
  std::vector<double> features;
  int label = 0;
  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t feature_dim() const { return samples.empty() ? 0 : samples.front().features.size(); }
  std::size_t count(int label) const {
    std::size_t n = 0;
    for (const auto& s : samples) n += s.label == label ? 1 : 0;
    return n;
  }
  bool has_both_classes() const { return count(0) > 0 && count(1) > 0; }

  // Contiguous split [begin, end).
  Dataset slice(std::size_t begin, std::size_t end) const {
    Dataset d;
    d.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(begin),
                     samples.begin() + static_cast<std::ptrdiff_t>(end));
    return d;
  }
};

class DatasetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Per-feature zero-mean / unit-variance transform fitted on training data.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Dataset& d) {
    Standardizer s;
    const std::size_t dim = d.feature_dim();
    s.mean.assign(dim, 0.0);
    s.scale.assign(dim, 1.0);
    if (d.empty()) return s;
    const double n = static_cast<double>(d.size());
    for (const auto& x : d.samples)
      for (std::size_t i = 0; i < dim; ++i) s.mean[i] += x.features[i];
    for (auto& m : s.mean) m /= n;
    std::vector<double> var(dim, 0.0);
    for (const auto& x : d.samples)
      for (std::size_t i = 0; i < dim; ++i) {
        const double c = x.features[i] - s.mean[i];
        var[i] += c * c;
      }
    for (std::size_t i = 0; i < dim; ++i) {
      const double sd = std::sqrt(var[i] / n);
      s.scale[i] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  static Standardizer identity(std::size_t dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / scale[i];
    return out;
  }
  std::vector<double> invert(std::span<const double> z) const {
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * scale[i] + mean[i];
    return out;
  }

  bool operator==(const Standardizer&) const = default;
};

/// Dense ReLU network with a two-way softmax output.
template <typename Scalar = double>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix weights;  // out x in
    Vector bias;     // out
    bool operator==(const Layer& o) const { return weights == o.weights && bias == o.bias; }
  };

  static constexpr int output_dim = 2;

  Mlp() = default;

  /// Zero-initialized network with the given hidden widths.
  Mlp(int input_dim, std::span<const int> hidden) : input_dim_(input_dim) {
    if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
    int prev = input_dim;
    for (int width : hidden) {
      if (width < 1) throw std::invalid_argument("hidden width must be >= 1");
      layers_.push_back({Matrix::Zero(width, prev), Vector::Zero(width)});
      prev = width;
    }
    layers_.push_back({Matrix::Zero(output_dim, prev), Vector::Zero(output_dim)});
  }

  // He-style uniform fan-in scaling, zero biases.
  void initialize(RngStream& rng) {
    for (auto& l : layers_) {
      const Scalar limit = std::sqrt(Scalar(6) / static_cast<Scalar>(l.weights.cols()));
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
          l.weights(r, c) = static_cast<Scalar>((2.0 * uniform01(rng) - 1.0)) * limit;
      l.bias.setZero();
    }
  }

  int input_dim() const { return input_dim_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }

  /// Column-wise class probabilities for a batch of inputs (input_dim x batch).
  Matrix probabilities(const Matrix& inputs) const {
    Matrix a = inputs;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Matrix z = (layers_[i].weights * a).colwise() + layers_[i].bias;
      if (i + 1 < layers_.size())
        a = z.cwiseMax(Scalar(0));
      else
        a = softmax(z);
    }
    return a;
  }

  /// Softmax output for a single feature vector.
  Vector forward(std::span<const double> features) const {
    check_dim(features.size());
    Matrix x(input_dim_, 1);
    for (int i = 0; i < input_dim_; ++i) x(i, 0) = static_cast<Scalar>(features[i]);
    return probabilities(x).col(0);
  }

  /// Probability of the positive class.
  double score(std::span<const double> features) const { return static_cast<double>(forward(features)(1)); }

  /// Mean cross-entropy over a batch; `labels` holds 0/1 per column.
  Scalar loss(const Matrix& inputs, std::span<const int> labels) const {
    const Matrix p = probabilities(inputs);
    Scalar total = 0;
    for (Eigen::Index c = 0; c < p.cols(); ++c)
      total -= std::log(std::max(p(labels[c], c), std::numeric_limits<Scalar>::min()));
    return total / static_cast<Scalar>(p.cols());
  }

  /// Gradient of the mean cross-entropy w.r.t. every parameter, same layout as
  /// layers(). The batch loss from the same forward pass goes to `loss_out`.
  std::vector<Layer> gradient(const Matrix& inputs, std::span<const int> labels, Scalar* loss_out = nullptr) const {
    const std::size_t depth = layers_.size();
    std::vector<Matrix> acts;  // acts[0] = input, acts[i] = output of layer i-1
    std::vector<Matrix> pre;
    acts.reserve(depth + 1);
    pre.reserve(depth);
    acts.push_back(inputs);
    for (std::size_t i = 0; i < depth; ++i) {
      pre.push_back((layers_[i].weights * acts.back()).colwise() + layers_[i].bias);
      acts.push_back(i + 1 < depth ? Matrix(pre.back().cwiseMax(Scalar(0))) : softmax(pre.back()));
    }
    const Eigen::Index batch = inputs.cols();
    if (loss_out) {
      Scalar total = 0;
      for (Eigen::Index c = 0; c < batch; ++c)
        total -= std::log(std::max(acts.back()(labels[c], c), std::numeric_limits<Scalar>::min()));
      *loss_out = total / static_cast<Scalar>(batch);
    }
    Matrix delta = acts.back();
    for (Eigen::Index c = 0; c < batch; ++c) delta(labels[c], c) -= Scalar(1);
    delta /= static_cast<Scalar>(batch);

    std::vector<Layer> grads(depth);
    for (std::size_t k = depth; k-- > 0;) {
      grads[k].weights = delta * acts[k].transpose();
      grads[k].bias = delta.rowwise().sum();
      if (k == 0) break;
      Matrix back = layers_[k].weights.transpose() * delta;
      delta = back.cwiseProduct((pre[k - 1].array() > Scalar(0)).matrix().template cast<Scalar>());
    }
    return grads;
  }

  void apply_update(const std::vector<Layer>& grads, Scalar learning_rate) {
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      layers_[k].weights.noalias() -= learning_rate * grads[k].weights;
      layers_[k].bias.noalias() -= learning_rate * grads[k].bias;
    }
  }

  bool operator==(const Mlp& o) const { return input_dim_ == o.input_dim_ && layers_ == o.layers_; }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> out;
    out.input_dim_ = input_dim_;
    for (const auto& l : layers_)
      out.layers_.push_back({l.weights.template cast<Other>(), l.bias.template cast<Other>()});
    return out;
  }

 private:
  static Matrix softmax(const Matrix& z) {
    Matrix out(z.rows(), z.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      const Scalar m = z.col(c).maxCoeff();
      out.col(c) = (z.col(c).array() - m).exp().matrix();
      out.col(c) /= out.col(c).sum();
    }
    return out;
  }

  void check_dim(std::size_t n) const {
    if (static_cast<int>(n) != input_dim_)
      throw std::invalid_argument("feature length " + std::to_string(n) + " does not match input_dim " +
                                  std::to_string(input_dim_));
  }

  template <typename>
  friend class Mlp;

  int input_dim_ = 0;
  std::vector<Layer> layers_;
};

/// A trained network together with its input transform and decision boundary.
struct Classifier {
  Mlp<double> net;
  Standardizer scaler;
  double decision_boundary = 0.5;

  double score(std::span<const double> features) const { return net.score(scaler.apply(features)); }

  // Positive class iff score >= boundary.
  int classify(std::span<const double> features) const {
    return classify_score(score(features), decision_boundary);
  }

  static int classify_score(double score, double boundary) { return score < boundary ? 0 : 1; }

  bool operator==(const Classifier&) const = default;
};

inline int classify(const Classifier& c, std::span<const double> features, double boundary) {
  return Classifier::classify_score(c.score(features), boundary);
}

namespace detail {

inline Eigen::MatrixXd standardized_matrix(const Dataset& d, const Standardizer& s) {
  const auto dim = static_cast<Eigen::Index>(d.feature_dim());
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(d.size()));
  for (std::size_t c = 0; c < d.size(); ++c)
    for (Eigen::Index r = 0; r < dim; ++r)
      x(r, static_cast<Eigen::Index>(c)) = (d.samples[c].features[r] - s.mean[r]) / s.scale[r];
  return x;
}

}  // namespace detail

/// Minibatch SGD on softmax cross-entropy. The trainer can be resumed, which
/// lets successive halving extend the budget of surviving candidates.
/// Updates run in single precision; the returned classifier is promoted to
/// double, so scoring and gradient checks stay in double.
class Trainer {
 public:
  using Net = Mlp<float>;

  Trainer(const Dataset& data, const Hyperparams& h, std::uint64_t seed) : hyper_(h) {
    if (data.empty()) throw DatasetError("training data is empty");
    if (!data.has_both_classes()) throw DatasetError("training data contains a single class");
    auto issues = hyperparam_violations(h);
    if (!issues.empty()) throw std::invalid_argument("invalid hyperparameters: " + issues.front());
    scaler_ = Standardizer::fit(data);
    net_ = Net(static_cast<int>(data.feature_dim()), h.neurons_per_layer);
    RngStream init = make_stream(seed, StreamTag::classifier_init);
    net_.initialize(init);
    batches_ = make_stream(seed, StreamTag::minibatch);
    inputs_ = detail::standardized_matrix(data, scaler_).cast<float>();
    labels_.reserve(data.size());
    for (const auto& s : data.samples) labels_.push_back(s.label);
  }

  /// Runs `steps` more updates; returns the minibatch loss of each step.
  std::vector<double> run(int steps) {
    std::vector<double> losses;
    losses.reserve(static_cast<std::size_t>(std::max(steps, 0)));
    const int batch = hyper_.batch_size;
    Net::Matrix x(inputs_.rows(), batch);
    std::vector<int> y(static_cast<std::size_t>(batch));
    const auto lr = static_cast<float>(hyper_.learning_rate);
    for (int s = 0; s < steps; ++s) {
      for (int b = 0; b < batch; ++b) {
        const std::size_t idx = uniform_index(batches_, labels_.size());
        x.col(b) = inputs_.col(static_cast<Eigen::Index>(idx));
        y[static_cast<std::size_t>(b)] = labels_[idx];
      }
      float loss = 0.0f;
      net_.apply_update(net_.gradient(x, y, &loss), lr);
      losses.push_back(loss);
      ++steps_done_;
    }
    return losses;
  }

  Classifier model() const { return {net_.cast<double>(), scaler_, hyper_.decision_boundary}; }
  int steps_done() const { return steps_done_; }

 private:
  Hyperparams hyper_;
  Net net_;
  Standardizer scaler_;
  RngStream batches_;
  Net::Matrix inputs_;
  std::vector<int> labels_;
  int steps_done_ = 0;
};

/// Trains a fresh classifier for `h.training_steps` steps.
inline Classifier train(const Dataset& data, const Hyperparams& h, std::uint64_t seed,
                        std::vector<double>* losses = nullptr) {
  Trainer t(data, h, seed);
  auto l = t.run(h.training_steps);
  if (losses) *losses = std::move(l);
  return t.model();
}

// ---------------------------------------------------------------------------
// Gradient verification by central finite differences.

/// Flattens layer-shaped parameters (weights column-major, then bias, per layer).
template <typename Layers>
std::vector<double> flatten(const Layers& layers) {
  std::vector<double> out;
  for (const auto& l : layers) {
    out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

inline std::vector<double> analytic_gradient(const Mlp<double>& net, const Sample& s) {
  Eigen::MatrixXd x(net.input_dim(), 1);
  for (int i = 0; i < net.input_dim(); ++i) x(i, 0) = s.features[static_cast<std::size_t>(i)];
  const int label = s.label;
  return flatten(net.gradient(x, std::span<const int>(&label, 1)));
}

inline std::vector<double> numeric_gradient(const Mlp<double>& net, const Sample& s, double step = 1e-5) {
  Eigen::MatrixXd x(net.input_dim(), 1);
  for (int i = 0; i < net.input_dim(); ++i) x(i, 0) = s.features[static_cast<std::size_t>(i)];
  const int label = s.label;
  const std::span<const int> y(&label, 1);
  Mlp<double> probe = net;
  std::vector<double> out;
  out.reserve(net.parameter_count());
  auto visit = [&](double& p) {
    const double saved = p;
    p = saved + step;
    const double up = probe.loss(x, y);
    p = saved - step;
    const double down = probe.loss(x, y);
    p = saved;
    out.push_back((up - down) / (2.0 * step));
  };
  for (auto& l : probe.layers()) {
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) visit(l.weights.data()[i]);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) visit(l.bias.data()[i]);
  }
  return out;
}

/// Largest |a - n| / max(|a|, |n|) over entries; pairs where both magnitudes
/// are below `floor` count as agreeing.
inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                                 double floor = 1e-8) {
  if (analytic.size() != numeric.size()) throw std::invalid_argument("gradient length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    if (scale < floor) continue;
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

inline double gradient_check(const Mlp<double>& net, const Sample& s) {
  const auto a = analytic_gradient(net, s);
  const auto n = numeric_gradient(net, s);
  return max_relative_error(a, n);
}

// ---------------------------------------------------------------------------
// Serialization: layer dims, row-major weights, biases, scaler, boundary.

inline nlohmann::json to_json(const Classifier& c) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : c.net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index col = 0; col < l.weights.cols(); ++col) w.push_back(l.weights(r, col));
    layers.push_back({{"rows", l.weights.rows()},
                      {"cols", l.weights.cols()},
                      {"weights", w},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return {{"input_dim", c.net.input_dim()},
          {"layers", layers},
          {"scaler", {{"mean", c.scaler.mean}, {"scale", c.scaler.scale}}},
          {"decision_boundary", c.decision_boundary}};
}

inline Classifier classifier_from_json(const nlohmann::json& j) {
  Classifier c;
  const int input_dim = j.at("input_dim").get<int>();
  std::vector<int> hidden;
  const auto& layers = j.at("layers");
  if (layers.empty()) throw std::invalid_argument("model has no layers");
  int prev = input_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const int rows = layers[i].at("rows").get<int>();
    const int cols = layers[i].at("cols").get<int>();
    if (cols != prev) throw std::invalid_argument("layer dimensions do not chain");
    if (i + 1 < layers.size()) hidden.push_back(rows);
    else if (rows != Mlp<double>::output_dim) throw std::invalid_argument("output layer must have 2 units");
    prev = rows;
  }
  c.net = Mlp<double>(input_dim, hidden);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = c.net.layers()[i];
    const auto w = layers[i].at("weights").get<std::vector<double>>();
    const auto b = layers[i].at("bias").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(l.weights.size()) || b.size() != static_cast<std::size_t>(l.bias.size()))
      throw std::invalid_argument("parameter count mismatch");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index col = 0; col < l.weights.cols(); ++col) l.weights(r, col) = w[k++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = b[static_cast<std::size_t>(r)];
  }
  c.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
  c.scaler.scale = j.at("scaler").at("scale").get<std::vector<double>>();
  c.decision_boundary = j.at("decision_boundary").get<double>();
  return c;
}

}  // namespace specpoison
