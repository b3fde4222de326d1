#include "distq/bounds.hpp"

#include <cmath>
#include <numbers>
#include <iomanip>
#include <sstream>

#include "distq/error.hpp"

namespace distq {

ConditionalLaw law_for(const QuantizerSpec& spec, const NoiseModel& noise, std::size_t K) {
  return ConditionalLaw(FusedSupport(spec.scheme(), K), gamma_exact_fn(spec, noise));
}

double mse_lower_bound(const LawMoments& moments) {
  double explained = 0.0;
  for (std::size_t s = 0; s < moments.mass.size(); ++s) {
    if (moments.mass[s] > 0.0) explained += moments.first[s] * moments.first[s] / moments.mass[s];
  }
  const double bound = moments.prior_second_moment - explained;
  if (bound < -1e-10) {
    std::ostringstream msg;
    msg << "lower bound evaluated to " << bound << " (E[theta^2]=" << moments.prior_second_moment
        << ")";
    throw Error(ErrorCategory::numerical_integrity, msg.str());
  }
  return std::max(bound, 0.0);
}

double mse_lower_bound(const ConditionalLaw& law, const PriorModel& prior) {
  return mse_lower_bound(integrate_law(law, prior));
}

double population_mse(const LawMoments& moments, const ConditionalLaw& law,
                      const Estimator& estimator) {
  const auto& support = law.support();
  double total = 0.0;
  for (std::size_t s = 0; s < support.size(); ++s) {
    if (moments.mass[s] == 0.0) continue;
    const double f = estimator(support.statistic(s));
    total += moments.second[s] - 2.0 * f * moments.first[s] + f * f * moments.mass[s];
  }
  return total;
}

double population_mse(const ConditionalLaw& law, const PriorModel& prior,
                      const Estimator& estimator) {
  return population_mse(integrate_law(law, prior), law, estimator);
}

namespace {

double fisher_from(double g, double dg, double theta, std::size_t K) {
  if (!(g > 0.0 && g < 1.0)) {
    std::ostringstream msg;
    msg << "quantization probability " << g << " at theta=" << theta
        << " makes the Fisher information singular";
    throw Error(ErrorCategory::singularity, msg.str());
  }
  return static_cast<double>(K) * dg * dg / (g * (1.0 - g));
}

}  // namespace

double fisher_info(const ScalarFn& gamma, double theta, std::size_t K) {
  const double dg = (gamma(theta + kFisherStep) - gamma(theta - kFisherStep)) / (2.0 * kFisherStep);
  return fisher_from(gamma(theta), dg, theta, K);
}

double fisher_info(const ScalarFn& gamma, const ScalarFn& derivative, double theta,
                   std::size_t K) {
  return fisher_from(gamma(theta), derivative(theta), theta, K);
}

double pcrlb_binary(std::size_t K) {
  require(K >= 1, ErrorCategory::contract, "pcrlb_binary needs K >= 1");
  return 4.0 / (std::numbers::pi * std::numbers::pi * static_cast<double>(K));
}

SymbolLawFn symbol_law(const Scheme& scheme, GammaFn gamma) {
  if (scheme.kind == SchemeKind::onehot) return gamma;
  const unsigned bits = scheme.bits;
  return [gamma = std::move(gamma), bits](double theta) {
    const auto g = gamma(theta);
    const std::size_t L = std::size_t{1} << bits;
    std::vector<double> p(L, 1.0);
    for (std::size_t m = 0; m < L; ++m) {
      for (unsigned b = 0; b < bits; ++b) {
        const bool one = (m >> (bits - 1 - b)) & 1U;
        p[m] *= one ? g[b] : 1.0 - g[b];
      }
    }
    return p;
  };
}

std::vector<std::uint32_t> BruteForceResult::decode(std::size_t code) const {
  std::vector<std::uint32_t> u(sensors);
  for (std::size_t k = 0; k < sensors; ++k) {
    u[k] = static_cast<std::uint32_t>(code % symbols);
    code /= symbols;
  }
  return u;
}

BruteForceResult brute_force_mmse(const SymbolLawFn& law, std::size_t symbols, std::size_t K,
                                  const PriorModel& prior) {
  require(symbols >= 2 && K >= 1, ErrorCategory::contract,
          "brute_force_mmse needs at least two symbols and one sensor");
  const double space = std::pow(static_cast<double>(symbols), static_cast<double>(K));
  if (space > static_cast<double>(kMaxMessageMatrices)) {
    std::ostringstream msg;
    msg << "message space of " << K << " sensors with " << symbols << " symbols has " << std::fixed
        << std::setprecision(0) << space
        << " matrices (limit " << kMaxMessageMatrices << ")";
    throw Error(ErrorCategory::capacity, msg.str());
  }
  const auto n = static_cast<std::size_t>(space);
  BruteForceResult r;
  r.symbols = symbols;
  r.sensors = K;
  r.marginal.assign(n, 0.0);
  std::vector<double> first(n, 0.0);
  std::vector<double> prob(n);
  double second = 0.0;
  for (const auto& node : prior.quadrature()) {
    const auto p = law(node.theta);
    require(p.size() == symbols, ErrorCategory::contract, "symbol law has the wrong length");
    // prob[code] = prod_k p[u_k], built one sensor at a time.
    prob[0] = 1.0;
    std::size_t filled = 1;
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t m = symbols; m-- > 0;) {
        for (std::size_t c = 0; c < filled; ++c) prob[m * filled + c] = prob[c] * p[m];
      }
      filled *= symbols;
    }
    second += node.weight * node.theta * node.theta;
    for (std::size_t c = 0; c < n; ++c) {
      const double wp = node.weight * prob[c];
      r.marginal[c] += wp;
      first[c] += wp * node.theta;
    }
  }
  r.posterior.assign(n, prior.mean());
  double explained = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    if (r.marginal[c] > 0.0) {
      r.posterior[c] = first[c] / r.marginal[c];
      explained += first[c] * first[c] / r.marginal[c];
    }
  }
  r.mmse = second - explained;
  return r;
}

}  // namespace distq
