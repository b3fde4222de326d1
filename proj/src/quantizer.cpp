#include "distq/quantizer.hpp"

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include "distq/error.hpp"

namespace distq {

namespace {

struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // already divided by sqrt(pi)
};

HermiteRule make_hermite_rule(std::size_t n) {
  gsl_integration_fixed_workspace* ws =
      gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, n, 0.0, 1.0, 0.0, 0.0);
  require(ws != nullptr, ErrorCategory::numeric_domain, "cannot build Gauss-Hermite rule");
  HermiteRule rule;
  const double* x = gsl_integration_fixed_nodes(ws);
  const double* w = gsl_integration_fixed_weights(ws);
  const double norm = 1.0 / std::sqrt(M_PI);
  for (std::size_t i = 0; i < n; ++i) {
    rule.nodes.push_back(x[i]);
    rule.weights.push_back(w[i] * norm);
  }
  gsl_integration_fixed_free(ws);
  return rule;
}

const HermiteRule& hermite_rule(std::size_t n) {
  static const HermiteRule base = make_hermite_rule(kHermiteNodes);
  static const HermiteRule refined = make_hermite_rule(2 * kHermiteNodes);
  return n == kHermiteNodes ? base : refined;
}

std::vector<double> hermite_expectation(const QuantizerSpec& spec, double sigma, double theta,
                                        const HermiteRule& rule) {
  const std::size_t dim = spec.scheme().gamma_dim();
  std::vector<double> acc(dim, 0.0), out(dim);
  const double scale = std::sqrt(2.0) * sigma;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    spec.controller_outputs(theta + scale * rule.nodes[i], out);
    for (std::size_t d = 0; d < dim; ++d) acc[d] += rule.weights[i] * out[d];
  }
  for (double& v : acc) v = std::clamp(v, 0.0, 1.0);
  return acc;
}

}  // namespace

Scheme Scheme::parallel(unsigned bits) {
  require(bits >= 1 && bits <= 8, ErrorCategory::configuration, "parallel scheme needs 1..8 bits");
  return {SchemeKind::parallel, bits};
}

Scheme Scheme::onehot(unsigned bits) {
  require(bits >= 1 && bits <= 8, ErrorCategory::configuration, "one-hot scheme needs 1..8 bits");
  return {SchemeKind::onehot, bits};
}

Scheme Scheme::from_name(const std::string& name) {
  if (name == "binary") return binary();
  const auto dash = name.find('-');
  if (dash != std::string::npos) {
    const std::string head = name.substr(0, dash);
    unsigned bits = 0;
    try {
      bits = static_cast<unsigned>(std::stoul(name.substr(dash + 1)));
    } catch (const std::exception&) {
      throw Error(ErrorCategory::configuration, "bad bit count in scheme '" + name + "'");
    }
    if (head == "parallel") return parallel(bits);
    if (head == "onehot") return onehot(bits);
  }
  throw Error(ErrorCategory::configuration, "unknown scheme '" + name + "'");
}

std::string Scheme::name() const {
  switch (kind) {
    case SchemeKind::binary: return "binary";
    case SchemeKind::parallel: return "parallel-" + std::to_string(bits);
    case SchemeKind::onehot: return "onehot-" + std::to_string(bits);
  }
  return "binary";
}

std::size_t Scheme::gamma_dim() const noexcept {
  switch (kind) {
    case SchemeKind::binary: return 1;
    case SchemeKind::parallel: return bits;
    case SchemeKind::onehot: return symbol_count();
  }
  return 1;
}

Controller::Controller(Mlp net)
    : name_("network"), output_dim_(net.output_dim()), net_(std::move(net)) {
  require(net_->input_dim() == 1, ErrorCategory::configuration,
          "controller networks take a scalar observation");
}

Controller Controller::analytic(std::string name, std::size_t output_dim, Fn fn) {
  Controller c;
  c.name_ = std::move(name);
  c.output_dim_ = output_dim;
  c.fn_ = std::move(fn);
  return c;
}

const Mlp& Controller::net() const {
  require(is_network(), ErrorCategory::contract, "controller '" + name_ + "' has no network");
  return *net_;
}

Mlp& Controller::net() {
  require(is_network(), ErrorCategory::contract, "controller '" + name_ + "' has no network");
  return *net_;
}

void Controller::evaluate(double x, std::span<double> out) const {
  if (net_) {
    thread_local ForwardTrace trace;
    const auto y = net_->forward(std::span<const double>(&x, 1), trace);
    std::copy(y.begin(), y.end(), out.begin());
  } else {
    fn_(x, out);
  }
}

double Controller::evaluate_scalar(double x) const {
  double y = 0.0;
  evaluate(x, std::span<double>(&y, 1));
  return y;
}

QuantizerSpec::QuantizerSpec(Scheme scheme, std::vector<Controller> controllers)
    : scheme_(scheme), controllers_(std::move(controllers)) {
  require(controllers_.size() == scheme_.controller_count(), ErrorCategory::configuration,
          "scheme " + scheme_.name() + " needs " + std::to_string(scheme_.controller_count()) +
              " controllers");
  const std::size_t want = scheme_.kind == SchemeKind::onehot ? scheme_.symbol_count() : 1;
  for (const auto& c : controllers_) {
    require(c.output_dim() == want, ErrorCategory::configuration,
            "controller output dimension does not match scheme " + scheme_.name());
  }
}

void QuantizerSpec::controller_outputs(double x, std::span<double> out) const {
  if (scheme_.kind == SchemeKind::onehot) {
    controllers_.front().evaluate(x, out);
    return;
  }
  for (std::size_t m = 0; m < controllers_.size(); ++m) out[m] = controllers_[m].evaluate_scalar(x);
}

std::vector<double> QuantizerSpec::controller_outputs(double x) const {
  std::vector<double> out(scheme_.gamma_dim());
  controller_outputs(x, out);
  return out;
}

std::vector<double> QuantizerSpec::symbol_probabilities(double x) const {
  const auto g = controller_outputs(x);
  if (scheme_.kind == SchemeKind::onehot) return g;
  const unsigned bits = scheme_.bits;
  std::vector<double> p(scheme_.symbol_count(), 1.0);
  for (std::size_t m = 0; m < p.size(); ++m) {
    for (unsigned b = 0; b < bits; ++b) {
      const bool one = (m >> (bits - 1 - b)) & 1u;
      p[m] *= one ? g[b] : 1.0 - g[b];
    }
  }
  return p;
}

QuantizerSpec make_network_quantizer(Scheme scheme, const std::vector<std::size_t>& hidden,
                                     std::uint64_t seed) {
  std::vector<Controller> controllers;
  if (scheme.kind == SchemeKind::onehot) {
    controllers.emplace_back(
        make_mlp(1, hidden, scheme.symbol_count(), Activation::softmax, seed));
  } else {
    for (std::size_t m = 0; m < scheme.controller_count(); ++m) {
      controllers.emplace_back(
          make_mlp(1, hidden, 1, Activation::sigmoid, rng::mix64(seed + 0x51ed * (m + 1))));
    }
  }
  return QuantizerSpec(scheme, std::move(controllers));
}

QuantizedMessage QuantizedMessage::from_symbol(std::uint32_t symbol, unsigned bit_count) {
  require(bit_count >= 1 && bit_count <= 31 && symbol < (1u << bit_count),
          ErrorCategory::contract, "symbol out of range for bit count");
  QuantizedMessage msg;
  msg.symbol = symbol;
  msg.bits.resize(bit_count);
  for (unsigned b = 0; b < bit_count; ++b) msg.bits[b] = (symbol >> (bit_count - 1 - b)) & 1u;
  return msg;
}

QuantizedMessage QuantizedMessage::from_bits(std::vector<std::uint8_t> bits) {
  require(!bits.empty() && bits.size() <= 31, ErrorCategory::contract, "bad bit-vector length");
  QuantizedMessage msg;
  for (auto b : bits) {
    require(b <= 1, ErrorCategory::contract, "bit values must be 0 or 1");
    msg.symbol = (msg.symbol << 1) | b;
  }
  msg.bits = std::move(bits);
  return msg;
}

int quantize_binary(double g, double dither) {
  require(g >= 0.0 && g <= 1.0, ErrorCategory::contract, "quantize_binary: g outside [0,1]");
  require(dither >= 0.0 && dither < 1.0, ErrorCategory::contract,
          "quantize_binary: dither outside [0,1)");
  // (1 + sgn(g - z)) / 2 with the measure-zero tie g == z sent to 0.
  return g > dither ? 1 : 0;
}

QuantizedMessage quantize_parallel(const QuantizerSpec& spec, double x, rng::Stream& dither) {
  require(spec.scheme().kind != SchemeKind::onehot, ErrorCategory::contract,
          "quantize_parallel needs a binary or parallel spec");
  const auto g = spec.controller_outputs(x);
  std::vector<std::uint8_t> bits(g.size());
  for (std::size_t m = 0; m < g.size(); ++m) {
    bits[m] = static_cast<std::uint8_t>(quantize_binary(g[m], dither.uniform()));
  }
  return QuantizedMessage::from_bits(std::move(bits));
}

QuantizedMessage quantize_onehot(const QuantizerSpec& spec, double x, double dither) {
  require(spec.scheme().kind == SchemeKind::onehot, ErrorCategory::contract,
          "quantize_onehot needs a one-hot spec");
  require(dither >= 0.0 && dither < 1.0, ErrorCategory::contract,
          "quantize_onehot: dither outside [0,1)");
  const auto p = spec.controller_outputs(x);
  double cumulative = 0.0;
  std::uint32_t last_positive = 0;
  for (std::uint32_t m = 0; m < p.size(); ++m) {
    if (p[m] > 0.0) last_positive = m;
    cumulative += p[m];
    if (dither < cumulative) return QuantizedMessage::from_symbol(m, spec.scheme().bits);
  }
  // Rounding left the total just below the dither.
  return QuantizedMessage::from_symbol(last_positive, spec.scheme().bits);
}

QuantizedMessage quantize(const QuantizerSpec& spec, double x, rng::Stream& dither) {
  if (spec.scheme().kind == SchemeKind::onehot) return quantize_onehot(spec, x, dither.uniform());
  return quantize_parallel(spec, x, dither);
}

GammaEstimate gamma_exact(const QuantizerSpec& spec, const NoiseModel& noise, double theta,
                          bool refine) {
  GammaEstimate est;
  if (noise.kind == NoiseKind::noiseless) {
    est.values = spec.controller_outputs(theta);
    return est;
  }
  est.values = hermite_expectation(spec, noise.sigma, theta, hermite_rule(kHermiteNodes));
  if (refine) {
    const auto fine = hermite_expectation(spec, noise.sigma, theta, hermite_rule(2 * kHermiteNodes));
    for (std::size_t d = 0; d < fine.size(); ++d) {
      est.refinement_delta = std::max(est.refinement_delta, std::abs(fine[d] - est.values[d]));
    }
    est.converged = est.refinement_delta <= kHermiteTolerance;
  }
  return est;
}

std::function<std::vector<double>(double)> gamma_exact_fn(const QuantizerSpec& spec,
                                                          const NoiseModel& noise) {
  return [spec, noise](double theta) { return gamma_exact(spec, noise, theta, false).values; };
}

double gamma_empirical(const Controller& controller, std::span<const double> observations) {
  require(!observations.empty(), ErrorCategory::contract, "gamma_empirical: no observations");
  double sum = 0.0;
  for (double x : observations) sum += controller.evaluate_scalar(x);
  return std::clamp(sum / static_cast<double>(observations.size()), 0.0, 1.0);
}

std::vector<double> gamma_empirical(const QuantizerSpec& spec,
                                    std::span<const double> observations) {
  require(!observations.empty(), ErrorCategory::contract, "gamma_empirical: no observations");
  const std::size_t dim = spec.scheme().gamma_dim();
  std::vector<double> acc(dim, 0.0), out(dim);
  for (double x : observations) {
    spec.controller_outputs(x, out);
    for (std::size_t d = 0; d < dim; ++d) acc[d] += out[d];
  }
  for (double& v : acc) v = std::clamp(v / static_cast<double>(observations.size()), 0.0, 1.0);
  return acc;
}

std::vector<double> grid_weights(const ObservationGrid& grid, const NoiseModel& noise,
                                 double theta) {
  require(!grid.nodes.empty(), ErrorCategory::contract, "grid_weights: empty grid");
  std::vector<double> w(grid.nodes.size(), 0.0);
  if (noise.kind == NoiseKind::noiseless) {
    // Zero-noise limit: all mass on the nearest node, split on exact ties.
    require(std::isfinite(theta), ErrorCategory::degenerate_support,
            "grid_weights: non-finite theta");
    double best = std::numeric_limits<double>::infinity();
    for (double x : grid.nodes) best = std::min(best, std::abs(x - theta));
    double ties = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (std::abs(grid.nodes[i] - theta) == best) {
        w[i] = 1.0;
        ties += 1.0;
      }
    }
    for (double& v : w) v /= ties;
    return w;
  }
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = noise.log_density(grid.nodes[i], theta);
    top = std::max(top, w[i]);
  }
  if (!std::isfinite(top)) {
    throw Error(ErrorCategory::degenerate_support,
                "grid_weights: noise density vanishes on every grid node");
  }
  double total = 0.0;
  for (double& v : w) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

double gamma_grid(const Controller& controller, const ObservationGrid& grid,
                  const NoiseModel& noise, double theta) {
  const auto w = grid_weights(grid, noise, theta);
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] != 0.0) acc += w[i] * controller.evaluate_scalar(grid.nodes[i]);
  }
  return std::clamp(acc, 0.0, 1.0);
}

std::vector<double> gamma_grid(const QuantizerSpec& spec, const ObservationGrid& grid,
                               const NoiseModel& noise, double theta) {
  const auto w = grid_weights(grid, noise, theta);
  const std::size_t dim = spec.scheme().gamma_dim();
  std::vector<double> acc(dim, 0.0), out(dim);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0) continue;
    spec.controller_outputs(grid.nodes[i], out);
    for (std::size_t d = 0; d < dim; ++d) acc[d] += w[i] * out[d];
  }
  for (double& v : acc) v = std::clamp(v, 0.0, 1.0);
  return acc;
}

QuantizerSpec embed_parallel_in_onehot(const QuantizerSpec& parallel) {
  require(parallel.scheme().kind != SchemeKind::onehot, ErrorCategory::contract,
          "embed_parallel_in_onehot needs a binary or parallel spec");
  const unsigned bits = parallel.scheme().bits;
  auto source = std::make_shared<QuantizerSpec>(parallel);
  Controller product = Controller::analytic(
      "parallel-embedding", std::size_t{1} << bits, [source](double x, std::span<double> out) {
        const auto p = source->symbol_probabilities(x);
        std::copy(p.begin(), p.end(), out.begin());
      });
  return QuantizerSpec(Scheme::onehot(bits), {product});
}

}  // namespace distq
