#pragma once

// Seeded generators for property tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "distq/quantizer.hpp"

namespace gen {

class Source {
 public:
  explicit Source(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  std::size_t integer(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(eng_);
  }
  std::vector<double> probability_vector(std::size_t n) {
    std::vector<double> p(n);
    double total = 0.0;
    for (double& v : p) total += (v = uniform(0.05, 1.0));
    for (double& v : p) v /= total;
    return p;
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

// Smooth controller x -> sigmoid(a + b x + c sin(d x)).
inline distq::Controller smooth_scalar_controller(Source& src) {
  const double a = src.uniform(-1.0, 1.0), b = src.uniform(-4.0, 4.0);
  const double c = src.uniform(-1.0, 1.0), d = src.uniform(0.5, 3.0);
  return distq::Controller::analytic("random-smooth", 1, [=](double x, std::span<double> out) {
    out[0] = 1.0 / (1.0 + std::exp(-(a + b * x + c * std::sin(d * x))));
  });
}

// Smooth softmax controller over L symbols.
inline distq::Controller smooth_softmax_controller(Source& src, std::size_t L) {
  std::vector<double> a(L), b(L), c(L);
  for (std::size_t l = 0; l < L; ++l) {
    a[l] = src.uniform(-1.0, 1.0);
    b[l] = src.uniform(-3.0, 3.0);
    c[l] = src.uniform(-1.0, 1.0);
  }
  return distq::Controller::analytic("random-softmax", L, [=](double x, std::span<double> out) {
    double top = -INFINITY;
    for (std::size_t l = 0; l < a.size(); ++l) {
      out[l] = a[l] + b[l] * x + c[l] * std::sin(2.0 * x);
      top = std::max(top, out[l]);
    }
    double total = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) total += (out[l] = std::exp(out[l] - top));
    for (std::size_t l = 0; l < a.size(); ++l) out[l] /= total;
  });
}

inline distq::QuantizerSpec random_quantizer(Source& src, const distq::Scheme& scheme) {
  std::vector<distq::Controller> cs;
  if (scheme.kind == distq::SchemeKind::onehot) {
    cs.push_back(smooth_softmax_controller(src, scheme.symbol_count()));
  } else {
    for (std::size_t m = 0; m < scheme.controller_count(); ++m) cs.push_back(smooth_scalar_controller(src));
  }
  return distq::QuantizerSpec(scheme, std::move(cs));
}

}  // namespace gen
