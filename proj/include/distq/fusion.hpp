#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "distq/law.hpp"
#include "distq/net.hpp"
#include "distq/quantizer.hpp"
#include "distq/statistic.hpp"

namespace distq {

struct OneHotVector {
  std::vector<std::uint8_t> entries;

  std::size_t index() const;
  bool operator==(const OneHotVector&) const = default;
};

FusedStatistic mean_fuse(std::span<const QuantizedMessage> messages, const Scheme& scheme);
OneHotVector onehot_encode(const QuantizedMessage& message, unsigned bits);

// Network input for a statistic: each fused mean mapped from [0,1] to [-1,1].
std::vector<double> fc_input(const FusedStatistic& stat);

// F(fc_input(stat)) through a network whose input width matches the statistic.
double estimate(const Mlp& fc_net, const FusedStatistic& stat);

// E[theta | s] for every support point of a law.
class PosteriorTable {
 public:
  PosteriorTable(FusedSupport support, std::vector<double> values)
      : support_(std::move(support)), values_(std::move(values)) {}

  const FusedSupport& support() const noexcept { return support_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double at(const FusedStatistic& stat) const;

 private:
  FusedSupport support_;
  std::vector<double> values_;
};

// Zero-marginal support points map to the prior mean.
PosteriorTable posterior_mean(const ConditionalLaw& law, const PriorModel& prior);
PosteriorTable posterior_mean(const ConditionalLaw& law, const LawMoments& moments);

using Estimator = std::function<double(const FusedStatistic&)>;

Estimator network_estimator(Mlp fc_net);
Estimator table_estimator(PosteriorTable table);
Estimator constant_estimator(double value);

}  // namespace distq
