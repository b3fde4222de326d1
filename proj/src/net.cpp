#include "distq/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "distq/error.hpp"
#include "distq/rng.hpp"

namespace distq {

namespace {

constexpr int kCheckpointVersion = 1;

void apply_activation(Activation act, std::span<double> z) {
  switch (act) {
    case Activation::relu:
      for (double& v : z) if (v < 0.0) v = 0.0;
      break;
    case Activation::sigmoid:
      for (double& v : z) v = 1.0 / (1.0 + std::exp(-v));
      break;
    case Activation::tanh:
      for (double& v : z) v = std::tanh(v);
      break;
    case Activation::softmax: {
      const double top = *std::max_element(z.begin(), z.end());
      double total = 0.0;
      for (double& v : z) {
        v = std::exp(v - top);
        total += v;
      }
      for (double& v : z) v /= total;
      break;
    }
    case Activation::identity:
      break;
  }
}

// Turns d/d(output) into d/d(pre-activation), in place.
void activation_backward(Activation act, std::span<const double> y, std::span<double> g) {
  switch (act) {
    case Activation::relu:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = y[i] > 0.0 ? g[i] : 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - y[i] * y[i];
      break;
    case Activation::softmax: {
      double dot = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = y[i] * (g[i] - dot);
      break;
    }
    case Activation::identity:
      break;
  }
}

}  // namespace

std::string_view activation_name(Activation act) noexcept {
  switch (act) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::softmax: return "softmax";
    case Activation::identity: return "identity";
  }
  return "identity";
}

Activation activation_from_name(std::string_view name) {
  for (Activation act : {Activation::relu, Activation::sigmoid, Activation::tanh,
                         Activation::softmax, Activation::identity}) {
    if (activation_name(act) == name) return act;
  }
  throw Error(ErrorCategory::configuration, "unknown activation '" + std::string(name) + "'");
}

Mlp::Mlp(const std::vector<std::size_t>& layer_sizes,
         const std::vector<Activation>& activations) {
  require(layer_sizes.size() >= 2 && activations.size() + 1 == layer_sizes.size(),
          ErrorCategory::configuration,
          "mlp: need |activations| = |layer_sizes| - 1 and at least one layer");
  std::size_t offset = 0;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    const std::size_t in = layer_sizes[i];
    const std::size_t out = layer_sizes[i + 1];
    require(in > 0 && out > 0, ErrorCategory::configuration, "mlp: zero-width layer");
    LayerShape shape{in, out, activations[i], offset, offset + in * out};
    offset += in * out + out;
    layers_.push_back(shape);
  }
  params_.assign(offset, 0.0);
}

std::vector<std::size_t> Mlp::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (layers_.empty()) return sizes;
  sizes.push_back(layers_.front().in);
  for (const auto& l : layers_) sizes.push_back(l.out);
  return sizes;
}

std::vector<Activation> Mlp::activations() const {
  std::vector<Activation> acts;
  for (const auto& l : layers_) acts.push_back(l.activation);
  return acts;
}

std::span<double> Mlp::weights(std::size_t i) {
  const auto& l = layers_.at(i);
  return std::span<double>(params_).subspan(l.weight_offset, l.in * l.out);
}
std::span<double> Mlp::biases(std::size_t i) {
  const auto& l = layers_.at(i);
  return std::span<double>(params_).subspan(l.bias_offset, l.out);
}
std::span<const double> Mlp::weights(std::size_t i) const {
  const auto& l = layers_.at(i);
  return std::span<const double>(params_).subspan(l.weight_offset, l.in * l.out);
}
std::span<const double> Mlp::biases(std::size_t i) const {
  const auto& l = layers_.at(i);
  return std::span<const double>(params_).subspan(l.bias_offset, l.out);
}

std::vector<double> Mlp::forward(std::span<const double> x, ForwardTrace& trace) const {
  require(x.size() == input_dim(), ErrorCategory::configuration, "mlp: input size mismatch");
  for (double v : x) {
    require(std::isfinite(v), ErrorCategory::numeric_domain, "mlp: non-finite input");
  }
  trace.values.resize(layers_.size() + 1);
  trace.values[0].assign(x.begin(), x.end());
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const auto& l = layers_[li];
    const auto& in = trace.values[li];
    auto& out = trace.values[li + 1];
    out.resize(l.out);
    const double* w = params_.data() + l.weight_offset;
    const double* b = params_.data() + l.bias_offset;
    for (std::size_t r = 0; r < l.out; ++r) {
      double acc = b[r];
      const double* row = w + r * l.in;
      for (std::size_t c = 0; c < l.in; ++c) acc += row[c] * in[c];
      out[r] = acc;
    }
    apply_activation(l.activation, out);
  }
  return trace.values.back();
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  ForwardTrace trace;
  return forward(x, trace);
}

double Mlp::forward_scalar(double x) const {
  ForwardTrace trace;
  return forward(std::span<const double>(&x, 1), trace).front();
}

std::vector<double> Mlp::backward(const ForwardTrace& trace, std::span<const double> upstream,
                                  std::span<double> param_grad) const {
  require(trace.values.size() == layers_.size() + 1 && upstream.size() == output_dim() &&
              param_grad.size() == params_.size(),
          ErrorCategory::configuration, "mlp: backward shape mismatch");
  std::vector<double> g(upstream.begin(), upstream.end());
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& l = layers_[li];
    const auto& in = trace.values[li];
    activation_backward(l.activation, trace.values[li + 1], g);
    const double* w = params_.data() + l.weight_offset;
    double* gw = param_grad.data() + l.weight_offset;
    double* gb = param_grad.data() + l.bias_offset;
    std::vector<double> g_in(l.in, 0.0);
    for (std::size_t r = 0; r < l.out; ++r) {
      const double gr = g[r];
      gb[r] += gr;
      if (gr == 0.0) continue;
      const double* row = w + r * l.in;
      double* grow = gw + r * l.in;
      for (std::size_t c = 0; c < l.in; ++c) {
        grow[c] += gr * in[c];
        g_in[c] += gr * row[c];
      }
    }
    g = std::move(g_in);
  }
  return g;
}

Mlp init_mlp(const std::vector<std::size_t>& layer_sizes,
             const std::vector<Activation>& activations, std::uint64_t seed) {
  Mlp net(layer_sizes, activations);
  for (std::size_t li = 0; li < net.layer_count(); ++li) {
    const auto& l = net.layer(li);
    // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases alike. Random
    // biases spread the initial ReLU kinks over the input range.
    const double scale = 1.0 / std::sqrt(static_cast<double>(l.in));
    rng::Stream stream(seed, rng::Purpose::init, li);
    for (double& w : net.weights(li)) w = scale * (2.0 * stream.uniform() - 1.0);
    for (double& b : net.biases(li)) b = scale * (2.0 * stream.uniform() - 1.0);
  }
  return net;
}

Mlp make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
             std::size_t output_dim, Activation head, std::uint64_t seed) {
  std::vector<std::size_t> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output_dim);
  std::vector<Activation> acts(hidden.size(), Activation::relu);
  acts.push_back(head);
  return init_mlp(sizes, acts, seed);
}

Adam::Adam(std::size_t parameter_count, AdamConfig config)
    : config_(config), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  require(params.size() == m_.size() && grads.size() == m_.size(), ErrorCategory::configuration,
          "adam: shape mismatch");
  for (double g : grads) {
    require(std::isfinite(g), ErrorCategory::numeric_domain, "adam: non-finite gradient");
  }
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

nlohmann::json mlp_to_json(const Mlp& net, std::uint64_t seed) {
  nlohmann::json doc;
  doc["format"] = "distq-mlp";
  doc["version"] = kCheckpointVersion;
  doc["seed"] = seed;
  doc["layer_sizes"] = net.layer_sizes();
  auto& acts = doc["activations"] = nlohmann::json::array();
  for (Activation a : net.activations()) acts.push_back(std::string(activation_name(a)));
  auto& layers = doc["layers"] = nlohmann::json::array();
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const auto w = net.weights(i);
    const auto b = net.biases(i);
    layers.push_back({{"weights", std::vector<double>(w.begin(), w.end())},
                      {"biases", std::vector<double>(b.begin(), b.end())}});
  }
  return doc;
}

Mlp mlp_from_json(const nlohmann::json& doc, std::uint64_t* seed) {
  try {
    require(doc.at("format") == "distq-mlp", ErrorCategory::configuration,
            "checkpoint is not a distq-mlp document");
    require(doc.at("version").get<int>() == kCheckpointVersion, ErrorCategory::configuration,
            "unsupported checkpoint version");
    const auto sizes = doc.at("layer_sizes").get<std::vector<std::size_t>>();
    std::vector<Activation> acts;
    for (const auto& a : doc.at("activations")) acts.push_back(activation_from_name(a.get<std::string>()));
    Mlp net(sizes, acts);
    const auto& layers = doc.at("layers");
    require(layers.size() == net.layer_count(), ErrorCategory::configuration,
            "checkpoint layer count mismatch");
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
      const auto w = layers[i].at("weights").get<std::vector<double>>();
      const auto b = layers[i].at("biases").get<std::vector<double>>();
      auto dw = net.weights(i);
      auto db = net.biases(i);
      require(w.size() == dw.size() && b.size() == db.size(), ErrorCategory::configuration,
              "checkpoint layer shape mismatch");
      std::copy(w.begin(), w.end(), dw.begin());
      std::copy(b.begin(), b.end(), db.begin());
    }
    if (seed) *seed = doc.at("seed").get<std::uint64_t>();
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::configuration, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_json(const std::string& path, const nlohmann::json& doc) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    require(static_cast<bool>(out), ErrorCategory::io, "cannot write " + path);
    out << doc.dump(1) << '\n';
    require(static_cast<bool>(out), ErrorCategory::io, "write failed for " + path);
  }
  require(std::rename(tmp.c_str(), path.c_str()) == 0, ErrorCategory::io,
          "cannot move checkpoint into place at " + path);
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCategory::io, "cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::configuration, "cannot parse " + path + ": " + e.what());
  }
}

}  // namespace distq
