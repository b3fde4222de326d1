#include <doctest.h>

#include <cmath>
#include <numeric>

#include "distq/error.hpp"
#include "distq/model.hpp"

using namespace distq;

TEST_SUITE("model") {
  TEST_CASE("uniform prior samples have the right moments") {
    const auto prior = PriorModel::uniform(-1.0, 1.0);
    const auto s = sample_prior(prior, 100000, 11);
    double mean = 0.0, second = 0.0;
    for (double v : s) {
      mean += v;
      second += v * v;
    }
    mean /= s.size();
    second /= s.size();
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(second - 1.0 / 3.0) < 0.02);
  }

  TEST_CASE("degenerate prior yields exact zeros") {
    for (double v : sample_prior(PriorModel::uniform(0.0, 0.0), 50, 3)) CHECK(v == 0.0);
  }

  TEST_CASE("sampling is a pure function of the seed") {
    const auto prior = PriorModel::uniform(-1.0, 1.0);
    CHECK(sample_prior(prior, 1000, 5) == sample_prior(prior, 1000, 5));
    CHECK(sample_prior(prior, 1000, 5) != sample_prior(prior, 1000, 6));
    const auto noise = NoiseModel::gaussian(0.3);
    CHECK(observe(noise, 0.2, 100, 9) == observe(noise, 0.2, 100, 9));
  }

  TEST_CASE("unsupported prior kinds are configuration errors") {
    try {
      PriorModel::from_name("laplace", -1.0, 1.0);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::configuration);
    }
    CHECK_THROWS_AS(sample_prior(PriorModel::uniform(-1, 1), 0, 1), Error);
  }

  TEST_CASE("noiseless observation repeats theta") {
    CHECK(observe(NoiseModel::noiseless(), 0.7, 3, 1) == std::vector<double>{0.7, 0.7, 0.7});
  }

  TEST_CASE("gaussian observation variance matches sigma squared") {
    const auto x = observe(NoiseModel::gaussian(0.5), 0.0, 100000, 21);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= x.size() - 1;
    CHECK(std::abs(var - 0.25) / 0.25 < 0.03);
  }

  TEST_CASE("snr conversion") {
    const auto prior = PriorModel::uniform(-1.0, 1.0);
    CHECK(snr_to_sigma(0.0, prior) == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-12));
    CHECK(snr_to_sigma(0.0, prior) == doctest::Approx(0.57735).epsilon(1e-5));
    CHECK(snr_to_sigma(INFINITY, prior) == 0.0);
    CHECK(snr_to_sigma(200.0, prior) < 1e-9);
    CHECK(snr_to_sigma(10.0 * std::log10(1.0 / 3.0), prior) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("noise model invariants") {
    CHECK(NoiseModel::gaussian(0.0).kind == NoiseKind::noiseless);
    CHECK(NoiseModel::gaussian(0.4).kind == NoiseKind::gaussian_additive);
    CHECK_THROWS_AS(NoiseModel::gaussian(-1.0), Error);
    const auto n = NoiseModel::gaussian(0.4);
    for (double x : {-1e6, -3.0, 0.0, 0.1, 50.0, 1e300}) {
      const double d = n.density(x, 0.3);
      CHECK(d >= 0.0);
      CHECK(std::isfinite(d));
    }
  }

  TEST_CASE("dataset D1 shapes and determinism") {
    const auto prior = PriorModel::uniform(-1.0, 1.0);
    const auto small = build_dataset_d1(prior, NoiseModel::noiseless(), 2, 3, 4);
    REQUIRE(small.size() == 2);
    for (const auto& e : small.entries) {
      REQUIRE(e.observations.size() == 3);
      for (double x : e.observations) CHECK(x == e.theta);
    }
    const auto big = build_dataset_d1(prior, NoiseModel::gaussian(0.5), 50000, 20, 4);
    CHECK(big.size() == 50000);
    CHECK(big.observations_per_entry() == 20);
    for (const auto& e : big.entries) REQUIRE(e.observations.size() == 20);
    const auto again = build_dataset_d1(prior, NoiseModel::gaussian(0.5), 50000, 20, 4);
    CHECK(again.entries.back().observations == big.entries.back().observations);
    CHECK(again.entries[123].theta == big.entries[123].theta);
  }

  TEST_CASE("observation grid") {
    CHECK(build_obs_grid(1.0, 2).nodes == std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0});
    CHECK(build_obs_grid(1.0, 1).nodes == std::vector<double>{-1.0, 0.0, 1.0});
    for (std::size_t m : {1, 3, 17, 150}) {
      const auto g = build_obs_grid(2.5, m);
      REQUIRE(g.nodes.size() == 2 * m + 1);
      for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        CHECK(g.nodes[i] == -g.nodes[g.nodes.size() - 1 - i]);
        if (i > 0) CHECK(std::abs(g.nodes[i] - g.nodes[i - 1] - 2.5 / m) < 1e-12);
      }
    }
    CHECK_THROWS_AS(build_obs_grid(0.0, 2), Error);
    CHECK_THROWS_AS(build_obs_grid(1.0, 0), Error);
  }

  TEST_CASE("prior quadrature is exact for low moments") {
    const auto prior = PriorModel::uniform(-1.0, 1.0);
    double total = 0.0, m1 = 0.0, m2 = 0.0;
    for (const auto& n : prior.quadrature()) {
      CHECK(n.weight > 0.0);
      CHECK(n.theta >= -1.0);
      CHECK(n.theta <= 1.0);
      total += n.weight;
      m1 += n.weight * n.theta;
      m2 += n.weight * n.theta * n.theta;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(std::abs(m1) < 1e-10);
    CHECK(std::abs(m2 - 1.0 / 3.0) < 1e-10);
    CHECK(std::abs(prior.second_moment() - 1.0 / 3.0) < 1e-12);

    const auto shifted = PriorModel::uniform(0.5, 2.0);
    double s2 = 0.0;
    for (const auto& n : shifted.quadrature()) s2 += n.weight * n.theta * n.theta;
    CHECK(std::abs(s2 - shifted.second_moment()) < 1e-10);
  }

  TEST_CASE("sensors are conditionally independent given theta") {
    const auto data = build_dataset_d1(PriorModel::uniform(-1, 1), NoiseModel::gaussian(0.5),
                                       100000, 2, 17);
    double a = 0, b = 0, ab = 0;
    for (const auto& e : data.entries) {
      const double n1 = e.observations[0] - e.theta, n2 = e.observations[1] - e.theta;
      a += n1;
      b += n2;
      ab += n1 * n2;
    }
    const double n = static_cast<double>(data.size());
    CHECK(std::abs(ab / n - (a / n) * (b / n)) < 0.01);
  }
}
