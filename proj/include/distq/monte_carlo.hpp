#pragma once

#include <cstddef>
#include <cstdint>

#include "distq/fusion.hpp"
#include "distq/model.hpp"
#include "distq/quantizer.hpp"

namespace distq {

struct Scenario {
  PriorModel prior = PriorModel::uniform(-1.0, 1.0);
  NoiseModel noise = NoiseModel::noiseless();
};

struct MonteCarloResult {
  double mse = 0.0;
  double standard_error = 0.0;
  std::size_t n_trials = 0;
};

// Per trial: theta from the prior, K_eval sensors observe, quantize with
// independent dithers, the messages are mean-fused and the estimator applied.
// Trial t uses streams keyed by (seed, purpose, t, k) so results do not depend
// on thread count.
MonteCarloResult run_monte_carlo(const Scenario& scenario, const QuantizerSpec& quantizer,
                                 const Estimator& estimator, std::size_t K_eval,
                                 std::size_t n_trials, std::uint64_t seed,
                                 std::size_t workers = 1);

}  // namespace distq
