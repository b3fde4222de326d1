#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace distq {

enum class Activation { relu, sigmoid, tanh, softmax, identity };

std::string_view activation_name(Activation act) noexcept;
Activation activation_from_name(std::string_view name);

struct LayerShape {
  std::size_t in;
  std::size_t out;
  Activation activation;
  std::size_t weight_offset;  // row-major out x in block
  std::size_t bias_offset;

  bool operator==(const LayerShape&) const = default;
};

// Post-activation values of every layer for one input; layer i reads
// values[i] and writes values[i + 1].
struct ForwardTrace {
  std::vector<std::vector<double>> values;
};

// Feed-forward network with all parameters in one contiguous buffer so the
// optimizer can treat them as a flat vector.
class Mlp {
 public:
  Mlp() = default;
  // Parameters start at zero; use init_mlp for a random start.
  Mlp(const std::vector<std::size_t>& layer_sizes, const std::vector<Activation>& activations);

  std::size_t input_dim() const noexcept { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t output_dim() const noexcept { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  const LayerShape& layer(std::size_t i) const { return layers_.at(i); }
  std::vector<std::size_t> layer_sizes() const;
  std::vector<Activation> activations() const;
  Activation head() const { return layers_.back().activation; }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> weights(std::size_t layer);
  std::span<double> biases(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<const double> biases(std::size_t layer) const;

  std::vector<double> forward(std::span<const double> x) const;
  std::vector<double> forward(std::span<const double> x, ForwardTrace& trace) const;
  double forward_scalar(double x) const;

  // Gradient of <upstream, forward(x)>. Parameter gradients are accumulated
  // (added) into param_grad; the input gradient is returned.
  std::vector<double> backward(const ForwardTrace& trace, std::span<const double> upstream,
                               std::span<double> param_grad) const;

  bool operator==(const Mlp& other) const = default;

 private:
  std::vector<LayerShape> layers_;
  std::vector<double> params_;
};

Mlp init_mlp(const std::vector<std::size_t>& layer_sizes,
             const std::vector<Activation>& activations, std::uint64_t seed);

// Hidden stack of `hidden` widths with relu activations and the given head.
Mlp make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
             std::size_t output_dim, Activation head, std::uint64_t seed);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t parameter_count, AdamConfig config = {});

  // Throws numeric_domain (and leaves params untouched) on non-finite grads.
  void step(std::span<double> params, std::span<const double> grads);

  std::size_t step_count() const noexcept { return step_count_; }
  const AdamConfig& config() const noexcept { return config_; }
  std::span<const double> first_moment() const noexcept { return m_; }
  std::span<const double> second_moment() const noexcept { return v_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t step_count_ = 0;
};

// Checkpoint encoding: {"format":"distq-mlp","version":1,...}.
nlohmann::json mlp_to_json(const Mlp& net, std::uint64_t seed);
Mlp mlp_from_json(const nlohmann::json& doc, std::uint64_t* seed = nullptr);
void save_json(const std::string& path, const nlohmann::json& doc);
nlohmann::json load_json(const std::string& path);

}  // namespace distq
