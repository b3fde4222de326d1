#include "distq/law.hpp"

#include <algorithm>
#include <cmath>

#include "distq/error.hpp"

namespace distq {

namespace {

double log_choose(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

double checked_support_size(const Scheme& scheme, std::size_t K) {
  switch (scheme.kind) {
    case SchemeKind::binary: return static_cast<double>(K + 1);
    case SchemeKind::parallel: return std::pow(static_cast<double>(K + 1), scheme.bits);
    case SchemeKind::onehot:
      return std::round(std::exp(log_choose(K + scheme.symbol_count() - 1, scheme.symbol_count() - 1)));
  }
  return 0.0;
}

void enumerate_compositions(std::size_t remaining, std::size_t slot, std::vector<std::size_t>& cur,
                            std::vector<std::vector<std::size_t>>& out) {
  // Fill slots from the last towards index 1; slot 0 takes the remainder.
  if (slot == 0) {
    cur[0] = remaining;
    out.push_back(cur);
    return;
  }
  for (std::size_t i = 0; i <= remaining; ++i) {
    cur[slot] = i;
    enumerate_compositions(remaining - i, slot - 1, cur, out);
  }
}

}  // namespace

FusedStatistic::FusedStatistic(Scheme scheme, std::size_t sensor_count,
                               std::vector<std::size_t> counts)
    : scheme_(scheme), sensor_count_(sensor_count), counts_(std::move(counts)) {
  require(sensor_count_ >= 1, ErrorCategory::contract, "fused statistic needs K >= 1");
  require(counts_.size() == scheme_.gamma_dim(), ErrorCategory::contract,
          "fused statistic dimension does not match scheme " + scheme_.name());
  std::size_t total = 0;
  for (auto c : counts_) {
    require(c <= sensor_count_, ErrorCategory::contract, "fused count exceeds K");
    total += c;
  }
  if (scheme_.kind == SchemeKind::onehot) {
    require(total == sensor_count_, ErrorCategory::contract, "one-hot counts must sum to K");
  }
}

std::vector<double> FusedStatistic::values() const {
  std::vector<double> v(counts_.size());
  const double k = static_cast<double>(sensor_count_);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(counts_[i]) / k;
  return v;
}

double FusedStatistic::scalar() const {
  require(counts_.size() == 1, ErrorCategory::contract, "statistic is not scalar");
  return static_cast<double>(counts_[0]) / static_cast<double>(sensor_count_);
}

FusedSupport::FusedSupport(Scheme scheme, std::size_t sensor_count)
    : scheme_(scheme), sensor_count_(sensor_count), dim_(scheme.gamma_dim()) {
  require(sensor_count >= 1, ErrorCategory::contract, "support needs K >= 1");
  const double size = checked_support_size(scheme, sensor_count);
  if (size > static_cast<double>(kMaxSupportSize)) {
    throw Error(ErrorCategory::capacity,
                "support of " + scheme.name() + " with K=" + std::to_string(sensor_count) +
                    " has " + std::to_string(size) + " points (limit " +
                    std::to_string(kMaxSupportSize) + ")");
  }
  const std::size_t K = sensor_count;
  switch (scheme.kind) {
    case SchemeKind::binary:
      for (std::size_t k = 0; k <= K; ++k) {
        counts_.push_back(k);
        log_coef_.push_back(log_choose(K, k));
      }
      break;
    case SchemeKind::parallel: {
      const std::size_t n = static_cast<std::size_t>(size);
      for (std::size_t idx = 0; idx < n; ++idx) {
        std::size_t rest = idx;
        std::vector<std::size_t> digits(dim_);
        double coef = 0.0;
        for (std::size_t m = dim_; m-- > 0;) {
          digits[m] = rest % (K + 1);
          rest /= K + 1;
          coef += log_choose(K, digits[m]);
        }
        counts_.insert(counts_.end(), digits.begin(), digits.end());
        log_coef_.push_back(coef);
      }
      break;
    }
    case SchemeKind::onehot: {
      std::vector<std::vector<std::size_t>> comps;
      std::vector<std::size_t> cur(dim_, 0);
      enumerate_compositions(K, dim_ - 1, cur, comps);
      for (auto& c : comps) {
        double coef = std::lgamma(static_cast<double>(K) + 1.0);
        for (auto i : c) coef -= std::lgamma(static_cast<double>(i) + 1.0);
        onehot_index_.emplace(c, log_coef_.size());
        counts_.insert(counts_.end(), c.begin(), c.end());
        log_coef_.push_back(coef);
      }
      break;
    }
  }
}

FusedStatistic FusedSupport::statistic(std::size_t s) const {
  const auto c = counts(s);
  return FusedStatistic(scheme_, sensor_count_, std::vector<std::size_t>(c.begin(), c.end()));
}

std::optional<std::size_t> FusedSupport::index_of(std::span<const std::size_t> c) const {
  if (c.size() != dim_) return std::nullopt;
  const std::size_t K = sensor_count_;
  for (auto v : c) {
    if (v > K) return std::nullopt;
  }
  switch (scheme_.kind) {
    case SchemeKind::binary: return c[0];
    case SchemeKind::parallel: {
      std::size_t idx = 0;
      for (auto v : c) idx = idx * (K + 1) + v;
      return idx;
    }
    case SchemeKind::onehot: {
      const auto it = onehot_index_.find(std::vector<std::size_t>(c.begin(), c.end()));
      if (it == onehot_index_.end()) return std::nullopt;
      return it->second;
    }
  }
  return std::nullopt;
}

std::optional<std::size_t> FusedSupport::index_of(const FusedStatistic& stat) const {
  if (!(stat.scheme() == scheme_) || stat.sensor_count() != sensor_count_) return std::nullopt;
  return index_of(stat.counts());
}

void FusedSupport::log_weights(std::span<const double> gamma, std::span<double> out) const {
  require(gamma.size() == dim_ && out.size() == size(), ErrorCategory::contract,
          "log_weights: shape mismatch");
  const double K = static_cast<double>(sensor_count_);
  std::vector<double> lg(dim_), l1g(dim_);
  const bool onehot = scheme_.kind == SchemeKind::onehot;
  for (std::size_t d = 0; d < dim_; ++d) {
    const double g = std::clamp(gamma[d], kGammaClamp, onehot ? 1.0 : 1.0 - kGammaClamp);
    lg[d] = std::log(g);
    l1g[d] = std::log1p(-g);
  }
  for (std::size_t s = 0; s < size(); ++s) {
    const std::size_t* c = counts_.data() + s * dim_;
    double acc = log_coef_[s];
    if (onehot) {
      for (std::size_t d = 0; d < dim_; ++d) {
        if (c[d]) acc += static_cast<double>(c[d]) * lg[d];
      }
    } else {
      for (std::size_t d = 0; d < dim_; ++d) {
        const double i = static_cast<double>(c[d]);
        acc += i * lg[d] + (K - i) * l1g[d];
      }
    }
    out[s] = acc;
  }
}

void FusedSupport::dlog_weight(std::size_t s, std::span<const double> gamma,
                               std::span<double> out) const {
  require(gamma.size() == dim_ && out.size() == dim_, ErrorCategory::contract,
          "dlog_weight: shape mismatch");
  const double K = static_cast<double>(sensor_count_);
  const std::size_t* c = counts_.data() + s * dim_;
  const bool onehot = scheme_.kind == SchemeKind::onehot;
  for (std::size_t d = 0; d < dim_; ++d) {
    const double g = std::clamp(gamma[d], kGammaClamp, onehot ? 1.0 : 1.0 - kGammaClamp);
    const double i = static_cast<double>(c[d]);
    out[d] = onehot ? i / g : i / g - (K - i) / (1.0 - g);
  }
}

ConditionalLaw::ConditionalLaw(FusedSupport support, GammaFn gamma)
    : support_(std::move(support)), gamma_(std::move(gamma)) {}

std::vector<double> ConditionalLaw::probabilities(double theta) const {
  const auto g = gamma_(theta);
  std::vector<double> p(support_.size());
  support_.log_weights(g, p);
  for (double& v : p) v = std::exp(v);
  return p;
}

ConditionalLaw binomial_law(ScalarFn gamma, std::size_t sensor_count) {
  return ConditionalLaw(FusedSupport(Scheme::binary(), sensor_count),
                        [gamma = std::move(gamma)](double theta) {
                          return std::vector<double>{gamma(theta)};
                        });
}

ConditionalLaw parallel_law(std::vector<ScalarFn> gammas, std::size_t sensor_count) {
  require(!gammas.empty(), ErrorCategory::contract, "parallel_law needs M >= 1");
  const auto bits = static_cast<unsigned>(gammas.size());
  return ConditionalLaw(FusedSupport(Scheme::parallel(bits), sensor_count),
                        [gammas = std::move(gammas)](double theta) {
                          std::vector<double> g(gammas.size());
                          for (std::size_t m = 0; m < g.size(); ++m) g[m] = gammas[m](theta);
                          return g;
                        });
}

ConditionalLaw onehot_law(GammaFn gamma, std::size_t symbols, std::size_t sensor_count) {
  unsigned bits = 0;
  while ((std::size_t{1} << bits) < symbols) ++bits;
  require(bits >= 1 && (std::size_t{1} << bits) == symbols, ErrorCategory::contract,
          "onehot_law needs a power-of-two symbol count >= 2");
  return ConditionalLaw(FusedSupport(Scheme::onehot(bits), sensor_count), std::move(gamma));
}

LawMoments integrate_law(const ConditionalLaw& law, const PriorModel& prior) {
  const auto& support = law.support();
  LawMoments m;
  m.mass.assign(support.size(), 0.0);
  m.first.assign(support.size(), 0.0);
  m.second.assign(support.size(), 0.0);
  std::vector<double> logw(support.size());
  for (const auto& node : prior.quadrature()) {
    const auto g = law.gamma(node.theta);
    support.log_weights(g, logw);
    const double t = node.theta;
    m.prior_mean += node.weight * t;
    m.prior_second_moment += node.weight * t * t;
    for (std::size_t s = 0; s < support.size(); ++s) {
      const double p = std::exp(logw[s]);
      if (p == 0.0) continue;
      const double wp = node.weight * p;
      m.mass[s] += wp;
      m.first[s] += wp * t;
      m.second[s] += wp * t * t;
    }
  }
  return m;
}

}  // namespace distq
