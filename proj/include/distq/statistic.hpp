#pragma once

#include <cstddef>
#include <vector>

#include "distq/quantizer.hpp"

namespace distq {

// Mean-fused statistic stored as integer counts; values() divides by K.
//   binary : one count, the number of ones
//   parallel: one count per bit position
//   one-hot : one count per symbol, summing to K
class FusedStatistic {
 public:
  FusedStatistic(Scheme scheme, std::size_t sensor_count, std::vector<std::size_t> counts);

  const Scheme& scheme() const noexcept { return scheme_; }
  std::size_t sensor_count() const noexcept { return sensor_count_; }
  const std::vector<std::size_t>& counts() const noexcept { return counts_; }
  std::vector<double> values() const;
  double scalar() const;

  bool operator==(const FusedStatistic&) const = default;

 private:
  Scheme scheme_;
  std::size_t sensor_count_;
  std::vector<std::size_t> counts_;
};

}  // namespace distq
