#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "distq/baseline.hpp"
#include "distq/error.hpp"
#include "distq/quantizer.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace distq;

namespace {

Controller constant(double c) {
  return Controller::analytic("constant", 1, [c](double, std::span<double> out) { out[0] = c; });
}

Controller fixed_vector(std::vector<double> p) {
  const std::size_t n = p.size();
  return Controller::analytic("fixed", n, [p](double, std::span<double> out) {
    std::copy(p.begin(), p.end(), out.begin());
  });
}

Controller logistic3() {
  return Controller::analytic("logistic", 1, [](double x, std::span<double> out) {
    out[0] = 1.0 / (1.0 + std::exp(-3.0 * x));
  });
}

}  // namespace

TEST_SUITE("quantizer") {
  TEST_CASE("scheme names and sizes") {
    CHECK(Scheme::from_name("binary") == Scheme::binary());
    CHECK(Scheme::from_name("parallel-2") == Scheme::parallel(2));
    CHECK(Scheme::from_name("onehot-3") == Scheme::onehot(3));
    CHECK(Scheme::onehot(3).gamma_dim() == 8);
    CHECK(Scheme::parallel(3).gamma_dim() == 3);
    CHECK(Scheme::parallel(3).controller_count() == 3);
    CHECK(Scheme::onehot(2).name() == "onehot-2");
    CHECK_THROWS_AS(Scheme::from_name("ternary"), Error);
    CHECK_THROWS_AS(Scheme::parallel(0), Error);
  }

  TEST_CASE("controller count and width are validated") {
    CHECK_THROWS_AS(QuantizerSpec(Scheme::parallel(2), {constant(0.5)}), Error);
    CHECK_THROWS_AS(QuantizerSpec(Scheme::onehot(1), {constant(0.5)}), Error);
  }

  TEST_CASE("binary dithered quantizer") {
    CHECK(quantize_binary(0.5, 0.3) == 1);
    for (double z : {0.0, 0.2, 0.999999}) CHECK(quantize_binary(1.0, z) == 1);
    for (double z : {1e-12, 0.5, 0.999}) CHECK(quantize_binary(0.0, z) == 0);
    CHECK(quantize_binary(0.4, 0.4) == 0);
    CHECK_THROWS_AS(quantize_binary(1.2, 0.1), Error);
    CHECK_THROWS_AS(quantize_binary(0.5, 1.0), Error);
    rng::Stream s(3, rng::Purpose::dither);
    int ones = 0;
    for (int i = 0; i < 100000; ++i) ones += quantize_binary(0.7, s.uniform());
    CHECK(std::abs(ones / 1e5 - 0.7) < 0.01);
  }

  TEST_CASE("parallel quantizer") {
    rng::Stream s(1, rng::Purpose::dither);
    const QuantizerSpec sat(Scheme::parallel(2), {constant(1.0), constant(1.0)});
    const auto m = quantize_parallel(sat, 0.0, s);
    CHECK(m.bits == std::vector<std::uint8_t>{1, 1});
    CHECK(m.symbol == 3);
    const QuantizerSpec mixed(Scheme::parallel(2), {constant(1.0), constant(0.0)});
    const auto m2 = quantize_parallel(mixed, 0.0, s);
    CHECK(m2.bits == std::vector<std::uint8_t>{1, 0});
    CHECK(m2.symbol == 2);

    const QuantizerSpec half(Scheme::parallel(2), {constant(0.3), constant(0.6)});
    double n1 = 0, n2 = 0, n12 = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const auto q = quantize_parallel(half, 0.0, s);
      n1 += q.bits[0];
      n2 += q.bits[1];
      n12 += q.bits[0] * q.bits[1];
    }
    CHECK(std::abs(n12 / n - (n1 / n) * (n2 / n)) < 0.01);
  }

  TEST_CASE("one-hot quantizer") {
    const QuantizerSpec first(Scheme::onehot(2), {fixed_vector({1, 0, 0, 0})});
    const auto a = quantize_onehot(first, 0.0, 0.7);
    CHECK(a.symbol == 0);
    CHECK(a.bits == std::vector<std::uint8_t>{0, 0});
    const QuantizerSpec third(Scheme::onehot(2), {fixed_vector({0, 0, 1, 0})});
    for (double z : {0.0, 0.3, 0.99999}) {
      const auto b = quantize_onehot(third, 0.0, z);
      CHECK(b.symbol == 2);
      CHECK(b.bits == std::vector<std::uint8_t>{1, 0});
    }
    const QuantizerSpec uniform(Scheme::onehot(2), {fixed_vector({0.25, 0.25, 0.25, 0.25})});
    rng::Stream s(8, rng::Purpose::dither);
    std::vector<int> counts(4, 0);
    for (int i = 0; i < 100000; ++i) counts[quantize(uniform, 0.0, s).symbol]++;
    for (int c : counts) CHECK(std::abs(c / 1e5 - 0.25) < 0.01);
  }

  TEST_CASE("message bit order is MSB first") {
    const auto m = QuantizedMessage::from_symbol(6, 3);
    CHECK(m.bits == std::vector<std::uint8_t>{1, 1, 0});
    CHECK(QuantizedMessage::from_bits({0, 1, 1}).symbol == 3);
  }

  TEST_CASE("exact gamma") {
    const auto logistic = QuantizerSpec(Scheme::binary(), {logistic3()});
    CHECK(gamma_exact(logistic, NoiseModel::noiseless(), 0.4).values[0] ==
          doctest::Approx(1.0 / (1.0 + std::exp(-1.2))).epsilon(1e-15));
    const auto flat = QuantizerSpec(Scheme::binary(), {constant(0.5)});
    CHECK(gamma_exact(flat, NoiseModel::gaussian(0.8), -0.3).values[0] ==
          doctest::Approx(0.5).epsilon(1e-14));
    const auto ramp = QuantizerSpec(Scheme::binary(), {Controller::analytic(
        "ramp", 1, [](double x, std::span<double> o) { o[0] = (1 + std::clamp(x, -1.0, 1.0)) / 2; })});
    CHECK(std::abs(gamma_exact(ramp, NoiseModel::gaussian(0.5), 0.0).values[0] - 0.5) < 1e-12);

    const auto a = gamma_exact(logistic, NoiseModel::gaussian(0.5), 0.3);
    CHECK(std::abs(a.values[0] - oracle::kLogisticGammaAt03) < 1e-10);
    CHECK(a.converged);
    CHECK(std::abs(gamma_exact(logistic, NoiseModel::gaussian(0.5), -0.7).values[0] -
                   oracle::kLogisticGammaAtM07) < 1e-10);
    // The clamped sine controller has kinks, so the rule converges slowly.
    const auto sine = gamma_exact(sine_quantizer(), NoiseModel::gaussian(0.5), 0.3);
    CHECK(std::abs(sine.values[0] - oracle::kSineGammaAt03) < 1e-3);
    CHECK(std::abs(gamma_exact(sine_quantizer(), NoiseModel::gaussian(0.5), -0.7).values[0] -
                   oracle::kSineGammaAtM07) < 1e-3);
  }

  TEST_CASE("empirical gamma") {
    const auto c = logistic3();
    const std::vector<double> same(7, 0.25);
    CHECK(gamma_empirical(c, same) == doctest::Approx(c.evaluate_scalar(0.25)).epsilon(1e-14));
    CHECK(gamma_empirical(constant(1.0), same) == 1.0);
    CHECK_THROWS_AS(gamma_empirical(c, std::vector<double>{}), Error);
    const auto noise = NoiseModel::gaussian(0.5);
    const std::size_t m = 20000;
    const auto x = observe(noise, 0.3, m, 44);
    CHECK(std::abs(gamma_empirical(c, x) - oracle::kLogisticGammaAt03) < 3.0 / std::sqrt(double(m)));
  }

  TEST_CASE("grid gamma") {
    const auto grid = build_obs_grid(3.0, 60);
    const auto noise = NoiseModel::gaussian(0.4, 3.0);
    for (double th : {-0.9, 0.0, 0.55}) CHECK(gamma_grid(constant(0.37), grid, noise, th) == doctest::Approx(0.37).epsilon(1e-12));
    const auto c = logistic3();
    CHECK(gamma_grid(c, grid, NoiseModel::noiseless(3.0), 0.5) == c.evaluate_scalar(0.5));
    CHECK(std::abs(gamma_grid(c, grid, NoiseModel::gaussian(1e-4, 3.0), 0.5) - c.evaluate_scalar(0.5)) < 1e-6);

    gen::Source src(5);
    const auto fine = build_obs_grid(3.0, 500);
    const auto n = NoiseModel::gaussian(0.5, 3.0);
    for (int rep = 0; rep < 5; ++rep) {
      const QuantizerSpec spec(Scheme::binary(), {gen::smooth_scalar_controller(src)});
      for (double th : {-0.8, -0.1, 0.45, 0.9}) {
        CHECK(std::abs(gamma_grid(spec.controllers()[0], fine, n, th) -
                       gamma_exact(spec, n, th).values[0]) < 1e-3);
      }
    }
  }

  TEST_CASE("degenerate grid support") {
    // Log-space weights survive far-away nodes; only an undefined density is degenerate.
    ObservationGrid far{1.0, 1, {1e6, 2e6, 3e6}};
    CHECK(std::isfinite(gamma_grid(logistic3(), far, NoiseModel::gaussian(1e-3), 0.0)));
    try {
      gamma_grid(logistic3(), far, NoiseModel::gaussian(1e-3), std::nan(""));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::degenerate_support);
    }
  }

  TEST_CASE("every gamma variant is a probability") {
    gen::Source src(6);
    const auto grid = build_obs_grid(3.0, 40);
    const auto noise = NoiseModel::gaussian(0.7, 3.0);
    for (int rep = 0; rep < 10; ++rep) {
      const auto spec = gen::random_quantizer(src, Scheme::onehot(2));
      const auto par = gen::random_quantizer(src, Scheme::parallel(3));
      for (double th : {-1.0, -0.3, 0.2, 1.0}) {
        for (const auto* s : {&spec, &par}) {
          for (double g : gamma_exact(*s, noise, th).values) CHECK((g >= 0.0 && g <= 1.0));
          for (double g : gamma_grid(*s, grid, noise, th)) CHECK((g >= 0.0 && g <= 1.0));
          for (double g : gamma_empirical(*s, observe(noise, th, 10, rep))) CHECK((g >= 0.0 && g <= 1.0));
        }
        double total = 0.0;
        for (double g : gamma_exact(spec, noise, th).values) total += g;
        CHECK(std::abs(total - 1.0) < 1e-12);
      }
    }
  }

  TEST_CASE("sensors sharing a quantizer are conditionally independent") {
    const auto spec = QuantizerSpec(Scheme::binary(), {logistic3()});
    const auto noise = NoiseModel::gaussian(0.5);
    double a = 0, b = 0, ab = 0;
    const int n = 100000;
    for (int t = 0; t < n; ++t) {
      rng::Stream obs(2, rng::Purpose::observation, t), dit(2, rng::Purpose::dither, t);
      const int u1 = quantize(spec, noise.draw(0.2, obs), dit).bits[0];
      const int u2 = quantize(spec, noise.draw(0.2, obs), dit).bits[0];
      a += u1;
      b += u2;
      ab += u1 * u2;
    }
    CHECK(std::abs(ab / n - (a / n) * (b / n)) < 0.01);
  }

  TEST_CASE("parallel scheme embeds in one-hot") {
    gen::Source src(10);
    for (int rep = 0; rep < 10; ++rep) {
      const auto par = gen::random_quantizer(src, Scheme::parallel(2));
      const auto emb = embed_parallel_in_onehot(par);
      CHECK(emb.scheme() == Scheme::onehot(2));
      for (double x = -2.0; x <= 2.0; x += 0.25) {
        const auto p = par.symbol_probabilities(x);
        const auto q = emb.symbol_probabilities(x);
        for (std::size_t m = 0; m < 4; ++m) CHECK(std::abs(p[m] - q[m]) < 1e-15);
      }
    }
  }

  TEST_CASE("network quantizer heads") {
    const auto b = make_network_quantizer(Scheme::binary(), {8}, 1);
    CHECK(b.controllers()[0].net().head() == Activation::sigmoid);
    const auto o = make_network_quantizer(Scheme::onehot(2), {8}, 1);
    CHECK(o.controllers()[0].net().head() == Activation::softmax);
    CHECK(o.controllers()[0].output_dim() == 4);
    const auto p = make_network_quantizer(Scheme::parallel(3), {8}, 1);
    CHECK(p.controllers().size() == 3);
    CHECK(!(p.controllers()[0].net() == p.controllers()[1].net()));
  }
}
