#include "distq/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "distq/error.hpp"

namespace distq {

namespace {

double run_trial(const Scenario& scenario, const QuantizerSpec& quantizer,
                 const Estimator& estimator, std::size_t K, std::size_t t, std::uint64_t seed,
                 std::vector<double>& g, std::vector<std::size_t>& counts) {
  const Scheme& scheme = quantizer.scheme();
  rng::Stream prior_stream(seed, rng::Purpose::prior, t);
  rng::Stream obs_stream(seed, rng::Purpose::observation, t);
  rng::Stream dither_stream(seed, rng::Purpose::dither, t);
  const double theta = scenario.prior.draw(prior_stream);
  std::fill(counts.begin(), counts.end(), 0);
  for (std::size_t k = 0; k < K; ++k) {
    const double x = scenario.noise.draw(theta, obs_stream);
    if (scheme.kind == SchemeKind::onehot) {
      counts[quantize_onehot(quantizer, x, dither_stream.uniform()).symbol] += 1;
    } else {
      quantizer.controller_outputs(x, g);
      for (std::size_t m = 0; m < g.size(); ++m) {
        counts[m] += static_cast<std::size_t>(quantize_binary(g[m], dither_stream.uniform()));
      }
    }
  }
  const double est = estimator(FusedStatistic(scheme, K, counts));
  if (!std::isfinite(est)) {
    throw Error(ErrorCategory::numeric_domain, "estimator returned a non-finite value");
  }
  return (theta - est) * (theta - est);
}

}  // namespace

MonteCarloResult run_monte_carlo(const Scenario& scenario, const QuantizerSpec& quantizer,
                                 const Estimator& estimator, std::size_t K_eval,
                                 std::size_t n_trials, std::uint64_t seed, std::size_t workers) {
  require(K_eval >= 1, ErrorCategory::configuration, "K_eval must be at least 1");
  require(n_trials >= 2, ErrorCategory::configuration, "Monte-Carlo needs at least two trials");
  std::vector<double> sq(n_trials);
  workers = std::clamp<std::size_t>(workers, 1, n_trials);

  auto body = [&](std::size_t begin, std::size_t end) {
    std::vector<double> g(quantizer.scheme().controller_count());
    std::vector<std::size_t> counts(quantizer.scheme().gamma_dim());
    for (std::size_t t = begin; t < end; ++t) {
      sq[t] = run_trial(scenario, quantizer, estimator, K_eval, t, seed, g, counts);
    }
  };
  if (workers == 1) {
    body(0, n_trials);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n_trials + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n_trials, begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        try {
          body(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  double mean = 0.0;
  for (double v : sq) mean += v;
  mean /= static_cast<double>(n_trials);
  double var = 0.0;
  for (double v : sq) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n_trials - 1);
  return {mean, std::sqrt(var / static_cast<double>(n_trials)), n_trials};
}

}  // namespace distq
