#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "distq/rng.hpp"

namespace distq {

struct QuadratureNode {
  double theta;
  double weight;
};

enum class PriorKind { uniform };

// Prior over the desired parameter together with the quadrature rule every
// bound and posterior evaluation integrates against.
class PriorModel {
 public:
  static PriorModel uniform(double low, double high);
  // Only "uniform" is recognised; anything else is a configuration error.
  static PriorModel from_name(const std::string& kind, double low, double high);

  PriorKind kind() const noexcept { return kind_; }
  double low() const noexcept { return low_; }
  double high() const noexcept { return high_; }
  double mean() const noexcept { return 0.5 * (low_ + high_); }
  double second_moment() const noexcept { return second_moment_; }
  const std::vector<QuadratureNode>& quadrature() const noexcept { return quadrature_; }

  double draw(rng::Stream& stream) const noexcept;

 private:
  PriorModel(double low, double high);

  PriorKind kind_ = PriorKind::uniform;
  double low_;
  double high_;
  double second_moment_;
  std::vector<QuadratureNode> quadrature_;
};

enum class NoiseKind { noiseless, gaussian_additive };

struct NoiseModel {
  NoiseKind kind = NoiseKind::noiseless;
  double sigma = 0.0;
  // Observation range [-W, W] covered by the artificial grid.
  double observation_bound = 1.0;

  static NoiseModel noiseless(double observation_bound = 1.0);
  static NoiseModel gaussian(double sigma, double observation_bound = 3.0);

  // f_X(x | theta). For the noiseless kind this is a point mass and only
  // log_density's argmax is meaningful.
  double density(double x, double theta) const;
  double log_density(double x, double theta) const;
  double draw(double theta, rng::Stream& stream) const;
};

std::vector<double> sample_prior(const PriorModel& prior, std::size_t n, std::uint64_t seed);
std::vector<double> observe(const NoiseModel& noise, double theta, std::size_t n,
                            std::uint64_t seed);

// sigma = sqrt(E[theta^2] / 10^(snr_db / 10)); +inf maps to 0.
double snr_to_sigma(double snr_db, const PriorModel& prior);

struct DatasetEntry {
  double theta;
  std::vector<double> observations;
};

struct DatasetD1 {
  std::vector<DatasetEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  std::size_t observations_per_entry() const noexcept {
    return entries.empty() ? 0 : entries.front().observations.size();
  }
};

DatasetD1 build_dataset_d1(const PriorModel& prior, const NoiseModel& noise, std::size_t T,
                           std::size_t observations_per_entry, std::uint64_t seed);

struct ObservationGrid {
  double bound = 1.0;
  std::size_t half_count = 1;
  std::vector<double> nodes;
};

ObservationGrid build_obs_grid(double bound, std::size_t half_count);

}  // namespace distq
