#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "distq/baseline.hpp"
#include "distq/bounds.hpp"
#include "distq/error.hpp"
#include "distq/fusion.hpp"
#include "distq/training.hpp"
#include "support/generators.hpp"

using namespace distq;

namespace {

std::vector<QuantizedMessage> bits(std::initializer_list<std::vector<std::uint8_t>> list) {
  std::vector<QuantizedMessage> out;
  for (const auto& b : list) out.push_back(QuantizedMessage::from_bits(b));
  return out;
}

// Fused statistic of a message matrix given as a brute-force code.
FusedStatistic fuse_code(const BruteForceResult& r, std::size_t code, const Scheme& scheme) {
  std::vector<QuantizedMessage> msgs;
  for (auto u : r.decode(code)) msgs.push_back(QuantizedMessage::from_symbol(u, scheme.bits));
  return mean_fuse(msgs, scheme);
}

}  // namespace

TEST_SUITE("fusion") {
  TEST_CASE("mean fusion per scheme") {
    const auto b = mean_fuse(bits({{1}, {0}, {1}, {0}}), Scheme::binary());
    CHECK(b.scalar() == 0.5);
    const std::vector<QuantizedMessage> two{QuantizedMessage::from_symbol(2, 2),
                                            QuantizedMessage::from_symbol(2, 2)};
    CHECK(mean_fuse(two, Scheme::onehot(2)).values() == std::vector<double>{0, 0, 1, 0});
    CHECK(mean_fuse(bits({{1, 0}, {0, 0}}), Scheme::parallel(2)).values() ==
          std::vector<double>{0.5, 0.0});
  }

  TEST_CASE("mixed schemes and empty input are contract violations") {
    try {
      mean_fuse(bits({{1, 0}, {1}}), Scheme::parallel(2));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::contract);
    }
    CHECK_THROWS_AS(mean_fuse(std::vector<QuantizedMessage>{}, Scheme::binary()), Error);
  }

  TEST_CASE("statistic invariants are enforced") {
    CHECK_THROWS_AS(FusedStatistic(Scheme::binary(), 3, {4}), Error);
    CHECK_THROWS_AS(FusedStatistic(Scheme::onehot(1), 3, {1, 1}), Error);
    CHECK_NOTHROW(FusedStatistic(Scheme::onehot(1), 3, {1, 2}));
    CHECK_THROWS_AS(FusedStatistic(Scheme::parallel(2), 3, {1}), Error);
  }

  TEST_CASE("one-hot encoding") {
    CHECK(onehot_encode(QuantizedMessage::from_symbol(0, 2), 2).entries ==
          std::vector<std::uint8_t>{1, 0, 0, 0});
    CHECK(onehot_encode(QuantizedMessage::from_symbol(2, 2), 2).entries ==
          std::vector<std::uint8_t>{0, 0, 1, 0});
    std::vector<std::size_t> seen;
    for (std::uint32_t s = 0; s < 8; ++s) {
      const auto v = onehot_encode(QuantizedMessage::from_symbol(s, 3), 3);
      CHECK(std::count(v.entries.begin(), v.entries.end(), 1) == 1);
      CHECK(v.index() == s);
      seen.push_back(v.index());
    }
    std::sort(seen.begin(), seen.end());
    CHECK(std::unique(seen.begin(), seen.end()) == seen.end());
    QuantizedMessage bad;
    bad.bits = {1, 1};
    bad.symbol = 4;
    try {
      onehot_encode(bad, 2);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::contract);
    }
  }

  TEST_CASE("fusion is invariant to sensor order") {
    std::mt19937_64 eng(3);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<QuantizedMessage> msgs;
      for (int k = 0; k < 9; ++k) msgs.push_back(QuantizedMessage::from_symbol(eng() % 4, 2));
      auto shuffled = msgs;
      std::shuffle(shuffled.begin(), shuffled.end(), eng);
      for (auto scheme : {Scheme::onehot(2), Scheme::parallel(2)}) {
        CHECK(mean_fuse(msgs, scheme) == mean_fuse(shuffled, scheme));
      }
    }
  }

  TEST_CASE("estimator application") {
    const Mlp zero({1, 4, 1}, {Activation::relu, Activation::tanh});
    for (std::size_t k = 0; k <= 5; ++k) CHECK(estimate(zero, FusedStatistic(Scheme::binary(), 5, {k})) == 0.0);
    try {
      estimate(zero, FusedStatistic(Scheme::parallel(2), 5, {1, 2}));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::configuration);
    }
    const auto net = make_fc_network(Scheme::onehot(2), {6, 6}, 4);
    const double small = estimate(net, FusedStatistic(Scheme::onehot(2), 10, {1, 2, 3, 4}));
    const double large = estimate(net, FusedStatistic(Scheme::onehot(2), 1000, {100, 200, 300, 400}));
    CHECK(small == doctest::Approx(large).epsilon(1e-14));
    std::mt19937_64 eng(8);
    for (int rep = 0; rep < 50; ++rep) {
      auto r = make_fc_network(Scheme::binary(), {5}, rep);
      for (double& p : r.parameters()) p *= 10.0;
      const double e = estimate(r, FusedStatistic(Scheme::binary(), 20, {eng() % 21}));
      CHECK((e >= -1.0 && e <= 1.0));
    }
  }

  TEST_CASE("trained estimator is odd around one half") {
    const auto prior = PriorModel::uniform(-1, 1);
    TrainingData data = build_dataset_d1(prior, NoiseModel::noiseless(), 4000, 1, 2);
    TrainingConfig cfg;
    cfg.sensors = 50;
    cfg.epochs = 40;
    cfg.batch_size = 100;
    const auto fc = train_fc(cfg, data, sine_quantizer(), make_fc_network(Scheme::binary(), {30, 30, 30}, 3));
    CHECK(std::abs(estimate(fc.fc, FusedStatistic(Scheme::binary(), 50, {25}))) < 0.05);
  }

  TEST_CASE("posterior mean examples") {
    const auto prior = PriorModel::uniform(-1, 1);
    const auto linear = binomial_law([](double t) { return (1 + t) / 2; }, 1);
    const auto table = posterior_mean(linear, prior);
    CHECK(table.at(FusedStatistic(Scheme::binary(), 1, {1})) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(table.at(FusedStatistic(Scheme::binary(), 1, {0})) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));

    const auto flat = posterior_mean(binomial_law([](double) { return 0.3; }, 6), prior);
    for (double v : flat.values()) CHECK(std::abs(v) < 1e-14);

    const std::size_t K = 7;
    const auto sym = posterior_mean(binomial_law(g_sine, K), prior);
    for (std::size_t k = 0; k <= K; ++k) CHECK(std::abs(sym.values()[k] + sym.values()[K - k]) < 1e-10);

    // A statistic that can never occur falls back to the prior mean.
    const auto shifted = PriorModel::uniform(0.5, 1.0);
    const auto never = posterior_mean(binomial_law([](double) { return 1.0; }, 2), shifted);
    CHECK(never.values()[0] == doctest::Approx(0.75));
  }

  TEST_CASE("posterior means depend on messages only through the fused statistic") {
    const auto prior = PriorModel::uniform(-1, 1);
    gen::Source src(31);
    double worst = 0.0;
    for (std::size_t K = 1; K <= 5; ++K) {
      const auto spec = gen::random_quantizer(src, Scheme::binary());
      const auto gamma = gamma_exact_fn(spec, NoiseModel::noiseless());
      const auto bf = brute_force_mmse(symbol_law(Scheme::binary(), gamma), 2, K, prior);
      const auto table = posterior_mean(ConditionalLaw(FusedSupport(Scheme::binary(), K), gamma), prior);
      for (std::size_t code = 0; code < bf.posterior.size(); ++code) {
        worst = std::max(worst, std::abs(bf.posterior[code] - table.at(fuse_code(bf, code, Scheme::binary()))));
      }
    }
    for (auto scheme : {Scheme::parallel(2), Scheme::onehot(2)}) {
      for (std::size_t K = 1; K <= 3; ++K) {
        const auto spec = gen::random_quantizer(src, scheme);
        const auto gamma = gamma_exact_fn(spec, NoiseModel::noiseless());
        const auto bf = brute_force_mmse(symbol_law(scheme, gamma), 4, K, prior);
        const auto table = posterior_mean(ConditionalLaw(FusedSupport(scheme, K), gamma), prior);
        for (std::size_t code = 0; code < bf.posterior.size(); ++code) {
          worst = std::max(worst, std::abs(bf.posterior[code] - table.at(fuse_code(bf, code, scheme))));
        }
      }
    }
    CHECK(worst < 1e-12);
  }
}
