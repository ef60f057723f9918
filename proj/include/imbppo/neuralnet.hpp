#pragma once

// Fixed-topology multilayer perceptrons with hand-written reverse mode,
// Adam, and a versioned text persistence format.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "imbppo/error.hpp"
#include "imbppo/random.hpp"

namespace imbppo {

enum class Activation { ReLU, Tanh };
enum class OutputKind { Logits, Scalar };

inline std::string to_string(Activation a) { return a == Activation::ReLU ? "relu" : "tanh"; }
inline std::string to_string(OutputKind k) { return k == OutputKind::Logits ? "logits" : "scalar"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  throw InputError("neuralnet", "unknown activation '" + s + "'");
}

inline OutputKind parse_output_kind(const std::string& s) {
  if (s == "logits") return OutputKind::Logits;
  if (s == "scalar") return OutputKind::Scalar;
  throw InputError("neuralnet", "unknown output kind '" + s + "'");
}

struct Mlp {
  std::vector<int> layer_sizes;
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases;
  Activation hidden_activation = Activation::ReLU;
  OutputKind output_kind = OutputKind::Logits;

  std::size_t n_layers() const { return weights.size(); }
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
      n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    return n;
  }
};

// Zero-initialised network with the given topology.
inline Mlp make_mlp(const std::vector<int>& layer_sizes, Activation hidden, OutputKind output) {
  if (layer_sizes.size() < 2) throw InputError("neuralnet", "an MLP needs at least input and output sizes");
  for (int s : layer_sizes)
    if (s <= 0) throw InputError("neuralnet", "layer sizes must be positive");
  if (output == OutputKind::Scalar && layer_sizes.back() != 1)
    throw InputError("neuralnet", "scalar output head must have width 1");
  Mlp net;
  net.layer_sizes = layer_sizes;
  net.hidden_activation = hidden;
  net.output_kind = output;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    net.weights.push_back(Eigen::MatrixXd::Zero(layer_sizes[l + 1], layer_sizes[l]));
    net.biases.push_back(Eigen::VectorXd::Zero(layer_sizes[l + 1]));
  }
  return net;
}

// Glorot-uniform weights, zero biases.
inline void init_glorot(Mlp& net, Rng& rng) {
  for (auto& w : net.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = (2.0 * uniform_unit(rng) - 1.0) * limit;
  }
  for (auto& b : net.biases) b.setZero();
}

inline Mlp make_mlp(const std::vector<int>& layer_sizes, Activation hidden, OutputKind output, Rng& rng) {
  Mlp net = make_mlp(layer_sizes, hidden, output);
  init_glorot(net, rng);
  return net;
}

// input -> hidden x n_hidden -> output
inline std::vector<int> mlp_topology(int input, int hidden_width, int n_hidden, int output) {
  std::vector<int> sizes{input};
  for (int i = 0; i < n_hidden; ++i) sizes.push_back(hidden_width);
  sizes.push_back(output);
  return sizes;
}

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static Gradients zeros_like(const Mlp& net) {
    Gradients g;
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
      g.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
      g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return g;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l)
      if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    return true;
  }

  bool congruent_with(const Mlp& net) const {
    if (weights.size() != net.n_layers() || biases.size() != net.n_layers()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != net.weights[l].rows() || weights[l].cols() != net.weights[l].cols()) return false;
      if (biases[l].size() != net.biases[l].size()) return false;
    }
    return true;
  }

  Gradients& operator+=(const Gradients& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += other.weights[l];
      biases[l] += other.biases[l];
    }
    return *this;
  }
};

// Layer inputs and hidden pre-activations of a batched forward pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> layer_inputs;  // layer_inputs[l]: sizes[l] x N
  std::vector<Eigen::MatrixXd> pre_activations;
};

namespace detail {

inline void activate(Activation a, Eigen::MatrixXd& z) {
  if (a == Activation::ReLU) {
    z = z.cwiseMax(0.0);
  } else {
    z = z.array().tanh().matrix();
  }
}

// Multiplies grad in place by the activation derivative at pre-activation z.
inline void activation_backward(Activation a, const Eigen::MatrixXd& z, Eigen::MatrixXd& grad) {
  if (a == Activation::ReLU) {
    grad = (z.array() > 0.0).select(grad, 0.0);
  } else {
    grad = (grad.array() * (1.0 - z.array().tanh().square())).matrix();
  }
}

}  // namespace detail

// Columns of `inputs` are samples. Returns output_size x N.
inline Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs, ForwardCache* cache = nullptr) {
  if (inputs.rows() != net.input_size())
    throw InputError("neuralnet", "expected input of size " + std::to_string(net.input_size()) + ", found " +
                                      std::to_string(inputs.rows()));
  if (cache) {
    cache->layer_inputs.clear();
    cache->pre_activations.clear();
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    Eigen::MatrixXd z = net.weights[l] * a;
    z.colwise() += net.biases[l];
    if (cache) cache->layer_inputs.push_back(a);
    if (l + 1 == net.n_layers()) return z;
    if (cache) cache->pre_activations.push_back(z);
    detail::activate(net.hidden_activation, z);
    a = std::move(z);
  }
  return a;
}

inline Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input) {
  return forward_batch(net, input);
}

// Reverse pass for the scalar loss whose gradient with respect to the outputs
// is `output_grad` (output_size x N). Per-sample contributions are summed.
inline Gradients backward_batch(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& output_grad) {
  if (cache.layer_inputs.size() != net.n_layers())
    throw InputError("neuralnet", "forward cache does not match the network");
  if (output_grad.rows() != net.output_size() || output_grad.cols() != cache.layer_inputs.front().cols())
    throw InputError("neuralnet", "output gradient shape mismatch");
  Gradients g = Gradients::zeros_like(net);
  Eigen::MatrixXd delta = output_grad;
  for (std::size_t l = net.n_layers(); l-- > 0;) {
    g.weights[l].noalias() = delta * cache.layer_inputs[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd upstream = net.weights[l].transpose() * delta;
    detail::activation_backward(net.hidden_activation, cache.pre_activations[l - 1], upstream);
    delta = std::move(upstream);
  }
  return g;
}

inline Gradients backward(const Mlp& net, const Eigen::VectorXd& input, const Eigen::VectorXd& output_grad) {
  ForwardCache cache;
  forward_batch(net, input, &cache);
  return backward_batch(net, cache, output_grad);
}

// Numerically stable log-softmax (max subtraction).
inline Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const Eigen::ArrayXd shifted = logits.array() - m;
  const double lse = std::log(shifted.exp().sum());
  return (shifted - lse).matrix();
}

// Column-wise log-softmax of a classes x N logit matrix.
inline Eigen::MatrixXd log_softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) out.col(c) = log_softmax(logits.col(c));
  return out;
}

struct AdamState {
  Gradients m;
  Gradients v;
  std::int64_t t = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_net(const Mlp& net, double learning_rate) {
    AdamState s;
    s.m = Gradients::zeros_like(net);
    s.v = Gradients::zeros_like(net);
    s.learning_rate = learning_rate;
    return s;
  }
};

inline void adam_step(AdamState& state, Mlp& net, const Gradients& grads) {
  if (!grads.congruent_with(net) || !state.m.congruent_with(net) || !state.v.congruent_with(net))
    throw InputError("neuralnet", "Adam: gradient/moment shapes do not match the network");
  if (!grads.all_finite()) throw NumericError("neuralnet", "Adam: non-finite gradient entry");
  ++state.t;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = (b2 * v.array() + (1.0 - b2) * g.array().square()).matrix();
    param.array() -= state.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  };
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    update(net.weights[l], state.m.weights[l], state.v.weights[l], grads.weights[l]);
    update(net.biases[l], state.m.biases[l], state.v.biases[l], grads.biases[l]);
  }
}

// Persistence. Line 1: "imbppo-mlp 1 <activation> <output kind>"; line 2:
// layer sizes; then, per layer, one line per weight row followed by one line
// of biases. Values use 17 significant digits.

inline constexpr const char* kMlpFormatTag = "imbppo-mlp";
inline constexpr int kMlpFormatVersion = 1;

namespace detail {
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

inline void save_mlp(std::ostream& out, const Mlp& net) {
  out << kMlpFormatTag << ' ' << kMlpFormatVersion << ' ' << to_string(net.hidden_activation) << ' '
      << to_string(net.output_kind) << '\n';
  for (std::size_t i = 0; i < net.layer_sizes.size(); ++i) out << (i ? " " : "") << net.layer_sizes[i];
  out << '\n';
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const auto& w = net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) out << (c ? " " : "") << detail::fmt17(w(r, c));
      out << '\n';
    }
    const auto& b = net.biases[l];
    for (Eigen::Index r = 0; r < b.size(); ++r) out << (r ? " " : "") << detail::fmt17(b(r));
    out << '\n';
  }
}

inline Mlp load_mlp(std::istream& in) {
  std::string tag, act, kind;
  int version = 0;
  std::string header;
  if (!std::getline(in, header)) throw InputError("neuralnet", "model file is empty");
  std::istringstream hs(header);
  if (!(hs >> tag >> version >> act >> kind) || tag != kMlpFormatTag)
    throw InputError("neuralnet", "not an imbppo-mlp model file");
  if (version != kMlpFormatVersion)
    throw InputError("neuralnet", "unsupported model format version " + std::to_string(version));

  std::string sizes_line;
  std::getline(in, sizes_line);
  std::istringstream ss(sizes_line);
  std::vector<int> sizes;
  for (int s; ss >> s;) sizes.push_back(s);
  Mlp net = make_mlp(sizes, parse_activation(act), parse_output_kind(kind));
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    auto& w = net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        if (!(in >> w(r, c))) throw InputError("neuralnet", "truncated weights in layer " + std::to_string(l));
    auto& b = net.biases[l];
    for (Eigen::Index r = 0; r < b.size(); ++r)
      if (!(in >> b(r))) throw InputError("neuralnet", "truncated biases in layer " + std::to_string(l));
  }
  return net;
}

inline Mlp load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("neuralnet", "cannot open model file '" + path.string() + "'");
  return load_mlp(in);
}

inline std::string to_text(const Mlp& net) {
  std::ostringstream os;
  save_mlp(os, net);
  return os.str();
}

}  // namespace imbppo
