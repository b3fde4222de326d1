#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distq/model.hpp"
#include "distq/net.hpp"
#include "distq/rng.hpp"

namespace distq {

enum class SchemeKind { binary, parallel, onehot };

struct Scheme {
  SchemeKind kind = SchemeKind::binary;
  unsigned bits = 1;

  static Scheme binary() { return {SchemeKind::binary, 1}; }
  static Scheme parallel(unsigned bits);
  static Scheme onehot(unsigned bits);
  // "binary", "parallel-<M>" or "onehot-<M>".
  static Scheme from_name(const std::string& name);

  std::string name() const;
  std::size_t symbol_count() const noexcept { return std::size_t{1} << bits; }
  // Length of gamma and of the fused statistic: 1, M or 2^M.
  std::size_t gamma_dim() const noexcept;
  std::size_t controller_count() const noexcept {
    return kind == SchemeKind::parallel ? bits : 1;
  }

  bool operator==(const Scheme&) const = default;
};

// Probability controller G: either a network or a closed-form map.
class Controller {
 public:
  using Fn = std::function<void(double x, std::span<double> out)>;

  explicit Controller(Mlp net);
  static Controller analytic(std::string name, std::size_t output_dim, Fn fn);

  std::size_t output_dim() const noexcept { return output_dim_; }
  bool is_network() const noexcept { return net_.has_value(); }
  const std::string& name() const noexcept { return name_; }
  const Mlp& net() const;
  Mlp& net();

  void evaluate(double x, std::span<double> out) const;
  double evaluate_scalar(double x) const;

 private:
  Controller() = default;

  std::string name_;
  std::size_t output_dim_ = 0;
  std::optional<Mlp> net_;
  Fn fn_;
};

class QuantizerSpec {
 public:
  QuantizerSpec(Scheme scheme, std::vector<Controller> controllers);

  const Scheme& scheme() const noexcept { return scheme_; }
  const std::vector<Controller>& controllers() const noexcept { return controllers_; }
  std::vector<Controller>& controllers() noexcept { return controllers_; }

  // Per-bit probabilities (binary/parallel) or the symbol vector (one-hot).
  void controller_outputs(double x, std::span<double> out) const;
  std::vector<double> controller_outputs(double x) const;
  // p(u = m | X = x) over all 2^M symbols, MSB-first bit order.
  std::vector<double> symbol_probabilities(double x) const;

 private:
  Scheme scheme_;
  std::vector<Controller> controllers_;
};

// Sigmoid-headed nets for binary/parallel, one softmax-headed net for one-hot.
QuantizerSpec make_network_quantizer(Scheme scheme, const std::vector<std::size_t>& hidden,
                                     std::uint64_t seed);

struct QuantizedMessage {
  std::vector<std::uint8_t> bits;  // MSB first
  std::uint32_t symbol = 0;

  static QuantizedMessage from_symbol(std::uint32_t symbol, unsigned bit_count);
  static QuantizedMessage from_bits(std::vector<std::uint8_t> bits);

  bool operator==(const QuantizedMessage&) const = default;
};

int quantize_binary(double g, double dither);
QuantizedMessage quantize_parallel(const QuantizerSpec& spec, double x, rng::Stream& dither);
QuantizedMessage quantize_onehot(const QuantizerSpec& spec, double x, double dither);
// Scheme dispatch; draws one dither per bit (parallel) or one per message.
QuantizedMessage quantize(const QuantizerSpec& spec, double x, rng::Stream& dither);

struct GammaEstimate {
  std::vector<double> values;
  double refinement_delta = 0.0;
  bool converged = true;
};

inline constexpr std::size_t kHermiteNodes = 65;
inline constexpr double kHermiteTolerance = 1e-8;

// E[G(X) | theta] by Gauss-Hermite (gaussian noise) or direct evaluation
// (noiseless). With refine set, the rule is re-run at twice the node count
// and `converged` reports whether the two agree within kHermiteTolerance.
GammaEstimate gamma_exact(const QuantizerSpec& spec, const NoiseModel& noise, double theta,
                          bool refine = true);
std::function<std::vector<double>(double)> gamma_exact_fn(const QuantizerSpec& spec,
                                                          const NoiseModel& noise);

double gamma_empirical(const Controller& controller, std::span<const double> observations);
std::vector<double> gamma_empirical(const QuantizerSpec& spec,
                                    std::span<const double> observations);

// Normalised weights f(x|theta) / sum_O f(x'|theta) over the grid nodes.
std::vector<double> grid_weights(const ObservationGrid& grid, const NoiseModel& noise,
                                 double theta);
double gamma_grid(const Controller& controller, const ObservationGrid& grid,
                  const NoiseModel& noise, double theta);
std::vector<double> gamma_grid(const QuantizerSpec& spec, const ObservationGrid& grid,
                               const NoiseModel& noise, double theta);

// One-hot spec whose symbol probabilities are the bit-probability products of
// a parallel spec, so both induce the same p(u | X).
QuantizerSpec embed_parallel_in_onehot(const QuantizerSpec& parallel);

}  // namespace distq
