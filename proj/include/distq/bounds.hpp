#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "distq/fusion.hpp"
#include "distq/law.hpp"
#include "distq/model.hpp"
#include "distq/quantizer.hpp"

namespace distq {

// Law of the fused statistic induced by a quantizer under a noise model, with
// gamma from Gauss-Hermite quadrature.
ConditionalLaw law_for(const QuantizerSpec& spec, const NoiseModel& noise, std::size_t K);

// E[theta^2] - sum_s N_s^2 / D_s.
double mse_lower_bound(const LawMoments& moments);
double mse_lower_bound(const ConditionalLaw& law, const PriorModel& prior);

// Exact E[(theta - F(s))^2] of an estimator over the law and prior.
double population_mse(const LawMoments& moments, const ConditionalLaw& law,
                      const Estimator& estimator);
double population_mse(const ConditionalLaw& law, const PriorModel& prior,
                      const Estimator& estimator);

inline constexpr double kFisherStep = 1e-6;

// K gamma'^2 / (gamma (1 - gamma)); gamma' by central differences.
double fisher_info(const ScalarFn& gamma, double theta, std::size_t K);
double fisher_info(const ScalarFn& gamma, const ScalarFn& derivative, double theta, std::size_t K);

double pcrlb_binary(std::size_t K);

// p(u = m | theta) for every per-sensor symbol m.
using SymbolLawFn = std::function<std::vector<double>(double)>;

// Symbol law built from gamma: bit products (MSB first) for binary/parallel,
// the vector itself for one-hot.
SymbolLawFn symbol_law(const Scheme& scheme, GammaFn gamma);

inline constexpr std::size_t kMaxMessageMatrices = std::size_t{1} << 20;

struct BruteForceResult {
  double mmse = 0.0;
  std::size_t symbols = 0;
  std::size_t sensors = 0;
  // Indexed by code = sum_k u_k * symbols^k.
  std::vector<double> posterior;
  std::vector<double> marginal;

  std::vector<std::uint32_t> decode(std::size_t code) const;
};

// Exact MMSE by enumerating every message matrix of K sensors.
BruteForceResult brute_force_mmse(const SymbolLawFn& law, std::size_t symbols, std::size_t K,
                                  const PriorModel& prior);

}  // namespace distq
