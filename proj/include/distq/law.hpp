#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "distq/model.hpp"
#include "distq/statistic.hpp"

namespace distq {

inline constexpr double kGammaClamp = 1e-12;
inline constexpr std::size_t kMaxSupportSize = 4'000'000;

// The finite set of values a fused statistic can take for (scheme, K), with
// log multiplicities. Order: k = 0..K (binary), lexicographic in
// (i_1..i_M) (parallel), colexicographic compositions (one-hot).
class FusedSupport {
 public:
  FusedSupport(Scheme scheme, std::size_t sensor_count);

  const Scheme& scheme() const noexcept { return scheme_; }
  std::size_t sensor_count() const noexcept { return sensor_count_; }
  std::size_t size() const noexcept { return log_coef_.size(); }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const std::size_t> counts(std::size_t s) const {
    return std::span<const std::size_t>(counts_).subspan(s * dim_, dim_);
  }
  double log_coefficient(std::size_t s) const { return log_coef_[s]; }
  FusedStatistic statistic(std::size_t s) const;
  std::optional<std::size_t> index_of(std::span<const std::size_t> counts) const;
  std::optional<std::size_t> index_of(const FusedStatistic& stat) const;

  // log p(s | gamma) for every support point. Gamma is clamped to
  // [kGammaClamp, 1 - kGammaClamp] (one-hot: [kGammaClamp, 1]).
  void log_weights(std::span<const double> gamma, std::span<double> out) const;
  // d log p(s | gamma) / d gamma_c for every component c.
  void dlog_weight(std::size_t s, std::span<const double> gamma, std::span<double> out) const;

 private:
  Scheme scheme_;
  std::size_t sensor_count_;
  std::size_t dim_;
  std::vector<std::size_t> counts_;
  std::vector<double> log_coef_;
  std::map<std::vector<std::size_t>, std::size_t> onehot_index_;
};

using GammaFn = std::function<std::vector<double>(double)>;
using ScalarFn = std::function<double(double)>;

// p(fused statistic | theta) through the noisy quantization probabilities.
class ConditionalLaw {
 public:
  ConditionalLaw(FusedSupport support, GammaFn gamma);

  const FusedSupport& support() const noexcept { return support_; }
  std::vector<double> gamma(double theta) const { return gamma_(theta); }
  std::vector<double> probabilities(double theta) const;

 private:
  FusedSupport support_;
  GammaFn gamma_;
};

ConditionalLaw binomial_law(ScalarFn gamma, std::size_t sensor_count);
ConditionalLaw parallel_law(std::vector<ScalarFn> gammas, std::size_t sensor_count);
ConditionalLaw onehot_law(GammaFn gamma, std::size_t symbols, std::size_t sensor_count);

// Prior integrals of each support point: mass = E[p(s|theta)],
// first = E[theta p(s|theta)], second = E[theta^2 p(s|theta)].
struct LawMoments {
  std::vector<double> mass;
  std::vector<double> first;
  std::vector<double> second;
  double prior_mean = 0.0;
  double prior_second_moment = 0.0;
};

LawMoments integrate_law(const ConditionalLaw& law, const PriorModel& prior);

}  // namespace distq
