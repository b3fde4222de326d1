#include "distq/model.hpp"

#include <gsl/gsl_integration.h>

#include <cmath>
#include <limits>
#include <memory>

#include "distq/error.hpp"

namespace distq {

namespace {

constexpr std::size_t kPanels = 400;
constexpr std::size_t kPointsPerPanel = 5;

std::vector<QuadratureNode> composite_gauss_legendre(double low, double high) {
  if (low == high) return {{low, 1.0}};
  std::unique_ptr<gsl_integration_glfixed_table, decltype(&gsl_integration_glfixed_table_free)>
      table(gsl_integration_glfixed_table_alloc(kPointsPerPanel),
            &gsl_integration_glfixed_table_free);
  std::vector<QuadratureNode> nodes;
  nodes.reserve(kPanels * kPointsPerPanel);
  const double width = (high - low) / static_cast<double>(kPanels);
  const double density = 1.0 / (high - low);
  for (std::size_t p = 0; p < kPanels; ++p) {
    const double a = low + width * static_cast<double>(p);
    const double b = (p + 1 == kPanels) ? high : a + width;
    for (std::size_t i = 0; i < kPointsPerPanel; ++i) {
      double x = 0.0, w = 0.0;
      gsl_integration_glfixed_point(a, b, i, &x, &w, table.get());
      nodes.push_back({x, w * density});
    }
  }
  return nodes;
}

}  // namespace

PriorModel::PriorModel(double low, double high)
    : low_(low),
      high_(high),
      second_moment_((low * low + low * high + high * high) / 3.0),
      quadrature_(composite_gauss_legendre(low, high)) {}

PriorModel PriorModel::uniform(double low, double high) {
  require(std::isfinite(low) && std::isfinite(high) && low <= high,
          ErrorCategory::configuration, "uniform prior needs finite low <= high");
  return PriorModel(low, high);
}

PriorModel PriorModel::from_name(const std::string& kind, double low, double high) {
  if (kind != "uniform") {
    throw Error(ErrorCategory::configuration, "unsupported prior kind '" + kind + "'");
  }
  return uniform(low, high);
}

double PriorModel::draw(rng::Stream& stream) const noexcept {
  return low_ + (high_ - low_) * stream.uniform();
}

NoiseModel NoiseModel::noiseless(double observation_bound) {
  require(observation_bound > 0.0, ErrorCategory::configuration,
          "observation bound must be positive");
  return {NoiseKind::noiseless, 0.0, observation_bound};
}

NoiseModel NoiseModel::gaussian(double sigma, double observation_bound) {
  require(observation_bound > 0.0, ErrorCategory::configuration,
          "observation bound must be positive");
  require(std::isfinite(sigma) && sigma >= 0.0, ErrorCategory::configuration,
          "noise sigma must be finite and non-negative");
  if (sigma == 0.0) return noiseless(observation_bound);
  return {NoiseKind::gaussian_additive, sigma, observation_bound};
}

double NoiseModel::log_density(double x, double theta) const {
  const double d = x - theta;
  if (kind == NoiseKind::noiseless) {
    return d == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  return -0.5 * d * d / (sigma * sigma) - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
}

double NoiseModel::density(double x, double theta) const {
  return std::exp(log_density(x, theta));
}

double NoiseModel::draw(double theta, rng::Stream& stream) const {
  if (kind == NoiseKind::noiseless) return theta;
  return theta + sigma * stream.normal();
}

std::vector<double> sample_prior(const PriorModel& prior, std::size_t n, std::uint64_t seed) {
  require(n >= 1, ErrorCategory::contract, "sample_prior: n must be >= 1");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    rng::Stream stream(seed, rng::Purpose::prior, i);
    out[i] = prior.draw(stream);
  }
  return out;
}

std::vector<double> observe(const NoiseModel& noise, double theta, std::size_t n,
                            std::uint64_t seed) {
  require(n >= 1, ErrorCategory::contract, "observe: n must be >= 1");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    rng::Stream stream(seed, rng::Purpose::observation, i);
    out[i] = noise.draw(theta, stream);
  }
  return out;
}

double snr_to_sigma(double snr_db, const PriorModel& prior) {
  const double power = prior.second_moment();
  require(std::isfinite(power) && power > 0.0, ErrorCategory::configuration,
          "SNR needs a prior with positive second moment");
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  return std::sqrt(power / std::pow(10.0, snr_db / 10.0));
}

DatasetD1 build_dataset_d1(const PriorModel& prior, const NoiseModel& noise, std::size_t T,
                           std::size_t observations_per_entry, std::uint64_t seed) {
  require(T >= 1 && observations_per_entry >= 1, ErrorCategory::contract,
          "build_dataset_d1: T and observation count must be >= 1");
  DatasetD1 data;
  data.entries.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    rng::Stream theta_stream(seed, rng::Purpose::prior, t);
    auto& entry = data.entries[t];
    entry.theta = prior.draw(theta_stream);
    entry.observations.resize(observations_per_entry);
    for (std::size_t m = 0; m < observations_per_entry; ++m) {
      rng::Stream obs_stream(seed, rng::Purpose::observation, t, m);
      entry.observations[m] = noise.draw(entry.theta, obs_stream);
    }
  }
  return data;
}

ObservationGrid build_obs_grid(double bound, std::size_t half_count) {
  require(bound > 0.0 && half_count >= 1, ErrorCategory::contract,
          "build_obs_grid: W > 0 and M_grid >= 1 required");
  ObservationGrid grid;
  grid.bound = bound;
  grid.half_count = half_count;
  grid.nodes.resize(2 * half_count + 1);
  const double m = static_cast<double>(half_count);
  for (std::size_t i = 0; i <= 2 * half_count; ++i) {
    const double j = static_cast<double>(i) - m;
    grid.nodes[i] = bound * j / m;
  }
  return grid;
}

}  // namespace distq
