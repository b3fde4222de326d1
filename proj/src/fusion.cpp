#include "distq/fusion.hpp"

#include <algorithm>
#include <memory>

#include "distq/error.hpp"

namespace distq {

std::size_t OneHotVector::index() const {
  const auto it = std::find(entries.begin(), entries.end(), std::uint8_t{1});
  return static_cast<std::size_t>(it - entries.begin());
}

FusedStatistic mean_fuse(std::span<const QuantizedMessage> messages, const Scheme& scheme) {
  require(!messages.empty(), ErrorCategory::contract, "mean_fuse needs at least one message");
  std::vector<std::size_t> counts(scheme.gamma_dim(), 0);
  for (const auto& msg : messages) {
    require(msg.bits.size() == scheme.bits, ErrorCategory::contract,
            "mean_fuse: message with " + std::to_string(msg.bits.size()) +
                " bits does not belong to scheme " + scheme.name());
    switch (scheme.kind) {
      case SchemeKind::binary:
      case SchemeKind::parallel:
        for (std::size_t m = 0; m < msg.bits.size(); ++m) counts[m] += msg.bits[m];
        break;
      case SchemeKind::onehot:
        counts[onehot_encode(msg, scheme.bits).index()] += 1;
        break;
    }
  }
  return FusedStatistic(scheme, messages.size(), std::move(counts));
}

OneHotVector onehot_encode(const QuantizedMessage& message, unsigned bits) {
  const std::size_t L = std::size_t{1} << bits;
  require(message.symbol < L, ErrorCategory::contract,
          "onehot_encode: symbol " + std::to_string(message.symbol) + " out of range for M=" +
              std::to_string(bits));
  OneHotVector v;
  v.entries.assign(L, 0);
  v.entries[message.symbol] = 1;
  return v;
}

std::vector<double> fc_input(const FusedStatistic& stat) {
  auto x = stat.values();
  for (double& v : x) v = 2.0 * v - 1.0;
  return x;
}

double estimate(const Mlp& fc_net, const FusedStatistic& stat) {
  const auto values = fc_input(stat);
  require(fc_net.input_dim() == values.size(), ErrorCategory::configuration,
          "estimator expects input width " + std::to_string(fc_net.input_dim()) +
              ", statistic has " + std::to_string(values.size()));
  return fc_net.forward(values)[0];
}

double PosteriorTable::at(const FusedStatistic& stat) const {
  const auto idx = support_.index_of(stat);
  require(idx.has_value(), ErrorCategory::contract,
          "statistic is not in the support of this posterior table");
  return values_[*idx];
}

PosteriorTable posterior_mean(const ConditionalLaw& law, const LawMoments& moments) {
  std::vector<double> values(law.support().size());
  for (std::size_t s = 0; s < values.size(); ++s) {
    values[s] = moments.mass[s] > 0.0 ? moments.first[s] / moments.mass[s] : moments.prior_mean;
  }
  return PosteriorTable(law.support(), std::move(values));
}

PosteriorTable posterior_mean(const ConditionalLaw& law, const PriorModel& prior) {
  return posterior_mean(law, integrate_law(law, prior));
}

Estimator network_estimator(Mlp fc_net) {
  auto net = std::make_shared<const Mlp>(std::move(fc_net));
  return [net](const FusedStatistic& stat) { return estimate(*net, stat); };
}

Estimator table_estimator(PosteriorTable table) {
  auto t = std::make_shared<const PosteriorTable>(std::move(table));
  return [t](const FusedStatistic& stat) { return t->at(stat); };
}

Estimator constant_estimator(double value) {
  return [value](const FusedStatistic&) { return value; };
}

}  // namespace distq
