#pragma once

#include <cstddef>
#include <cstdint>

#include "distq/fusion.hpp"
#include "distq/model.hpp"
#include "distq/quantizer.hpp"

namespace distq {

// [1 + sin(pi x / 2)] / 2 with x clamped to [-1, 1].
double g_sine(double x);
double g_sine_derivative(double x);

Controller sine_controller();
QuantizerSpec sine_quantizer();

// Binomial ML inversion of the sine controller: (2/pi) asin(2 ubar - 1).
double sqmlf_estimate(const FusedStatistic& ubar);
double sqmlf_estimate(double ubar);
Estimator sqmlf_estimator();

struct MonteCarloResult;

// Monte-Carlo MSE of sine quantization with ML fusion, uniform[-1,1] prior.
MonteCarloResult sqmlf_reference(std::size_t K, const NoiseModel& noise, std::size_t n_trials,
                                 std::uint64_t seed);
double sqmlf_reference_mse(std::size_t K, const NoiseModel& noise, std::size_t n_trials,
                           std::uint64_t seed);

}  // namespace distq
