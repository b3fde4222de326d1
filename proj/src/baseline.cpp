#include "distq/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "distq/error.hpp"
#include "distq/monte_carlo.hpp"

namespace distq {

double g_sine(double x) {
  const double c = std::clamp(x, -1.0, 1.0);
  return 0.5 * (1.0 + std::sin(0.5 * std::numbers::pi * c));
}

double g_sine_derivative(double x) {
  if (x < -1.0 || x > 1.0) return 0.0;
  return 0.25 * std::numbers::pi * std::cos(0.5 * std::numbers::pi * x);
}

Controller sine_controller() {
  return Controller::analytic("sine", 1,
                              [](double x, std::span<double> out) { out[0] = g_sine(x); });
}

QuantizerSpec sine_quantizer() { return QuantizerSpec(Scheme::binary(), {sine_controller()}); }

double sqmlf_estimate(double ubar) {
  require(ubar >= 0.0 && ubar <= 1.0, ErrorCategory::contract,
          "sqmlf_estimate needs ubar in [0, 1]");
  return 2.0 / std::numbers::pi * std::asin(std::clamp(2.0 * ubar - 1.0, -1.0, 1.0));
}

double sqmlf_estimate(const FusedStatistic& ubar) { return sqmlf_estimate(ubar.scalar()); }

Estimator sqmlf_estimator() {
  return [](const FusedStatistic& s) { return sqmlf_estimate(s); };
}

MonteCarloResult sqmlf_reference(std::size_t K, const NoiseModel& noise, std::size_t n_trials,
                                 std::uint64_t seed) {
  require(n_trials >= 1000, ErrorCategory::contract, "sqmlf_reference needs n_trials >= 1000");
  Scenario scenario{PriorModel::uniform(-1.0, 1.0), noise};
  return run_monte_carlo(scenario, sine_quantizer(), sqmlf_estimator(), K, n_trials, seed);
}

double sqmlf_reference_mse(std::size_t K, const NoiseModel& noise, std::size_t n_trials,
                           std::uint64_t seed) {
  return sqmlf_reference(K, noise, n_trials, seed).mse;
}

}  // namespace distq
