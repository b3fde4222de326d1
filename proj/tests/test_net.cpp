#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "distq/error.hpp"
#include "distq/net.hpp"
#include "support/oracles.hpp"

using namespace distq;

namespace {

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST_SUITE("net") {
  TEST_CASE("init shapes and scale") {
    const auto g = init_mlp({1, 20, 20, 20, 1},
                            {Activation::relu, Activation::relu, Activation::relu, Activation::sigmoid}, 3);
    CHECK(g.input_dim() == 1);
    CHECK(g.output_dim() == 1);
    CHECK(g.layer_count() == 4);
    CHECK(g.head() == Activation::sigmoid);
    for (std::size_t l = 0; l < g.layer_count(); ++l) {
      const auto& shape = g.layer(l);
      if (l + 1 < g.layer_count()) CHECK(shape.out == g.layer(l + 1).in);
      const double s = 1.0 / std::sqrt(static_cast<double>(shape.in));
      for (double w : g.weights(l)) CHECK(std::abs(w) <= s);
      for (double b : g.biases(l)) CHECK(std::abs(b) <= s);
      const auto b = g.biases(l);
      CHECK(std::any_of(b.begin(), b.end(), [](double v) { return v != 0.0; }));
    }
    const auto f = init_mlp({1, 30, 30, 30, 1},
                            {Activation::relu, Activation::relu, Activation::relu, Activation::tanh}, 3);
    CHECK(f.parameter_count() == 30 + 30 + 900 + 30 + 900 + 30 + 30 + 1);
    CHECK(init_mlp({1, 4, 1}, {Activation::relu, Activation::sigmoid}, 0) ==
          init_mlp({1, 4, 1}, {Activation::relu, Activation::sigmoid}, 0));
  }

  TEST_CASE("dimension mismatch is a configuration error") {
    try {
      init_mlp({1, 4, 1}, {Activation::relu}, 1);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::configuration);
    }
    const auto net = init_mlp({2, 3, 1}, {Activation::relu, Activation::identity}, 1);
    CHECK_THROWS_AS(net.forward(std::vector<double>{1.0}), Error);
  }

  TEST_CASE("zero networks") {
    const Mlp sig({1, 5, 1}, {Activation::relu, Activation::sigmoid});
    const Mlp tanh_net({3, 5, 1}, {Activation::relu, Activation::tanh});
    for (double x : {-3.0, 0.0, 2.5}) {
      CHECK(sig.forward_scalar(x) == 0.5);
      CHECK(tanh_net.forward(std::vector<double>{x, x, x})[0] == 0.0);
    }
  }

  TEST_CASE("head ranges") {
    std::mt19937_64 eng(4);
    std::uniform_real_distribution<double> u(-5, 5);
    const auto soft = init_mlp({1, 8, 4}, {Activation::tanh, Activation::softmax}, 9);
    const auto sig = init_mlp({1, 8, 1}, {Activation::tanh, Activation::sigmoid}, 9);
    const auto th = init_mlp({1, 8, 1}, {Activation::relu, Activation::tanh}, 9);
    for (int i = 0; i < 200; ++i) {
      const double x = u(eng);
      const auto p = soft.forward(std::vector<double>{x});
      double total = 0.0;
      for (double v : p) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
      const double s = sig.forward_scalar(x);
      CHECK((s > 0.0 && s < 1.0));
      const double t = th.forward_scalar(x);
      CHECK((t > -1.0 && t < 1.0));
    }
  }

  TEST_CASE("non-finite input is a numeric domain error") {
    const auto net = init_mlp({1, 3, 1}, {Activation::relu, Activation::sigmoid}, 1);
    try {
      net.forward(std::vector<double>{NAN});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::numeric_domain);
    }
  }

  TEST_CASE("backward matches finite differences for every head") {
    std::mt19937_64 eng(77);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const Activation heads[] = {Activation::sigmoid, Activation::tanh, Activation::softmax,
                                Activation::identity};
    int trials = 0;
    for (int rep = 0; rep < 25; ++rep) {
      for (Activation head : heads) {
        const std::size_t in = 1 + rep % 3, out = head == Activation::softmax ? 4 : 1 + rep % 2;
        auto net = init_mlp({in, 6, 5, out}, {Activation::tanh, Activation::relu, head}, 100 + rep);
        for (double& p : net.parameters()) p += 0.05 * u(eng);
        std::vector<double> x(in), up(out);
        for (double& v : x) v = u(eng);
        for (double& v : up) v = u(eng);

        ForwardTrace trace;
        net.forward(x, trace);
        std::vector<double> pg(net.parameter_count(), 0.0);
        const auto xg = net.backward(trace, up, pg);

        auto objective = [&](const Mlp& n, const std::vector<double>& xx) {
          const auto y = n.forward(xx);
          double s = 0.0;
          for (std::size_t i = 0; i < y.size(); ++i) s += up[i] * y[i];
          return s;
        };
        std::vector<double> params(net.parameters().begin(), net.parameters().end());
        const auto fd_p = oracle::central_difference(
            [&](const std::vector<double>& p) {
              Mlp copy = net;
              std::copy(p.begin(), p.end(), copy.parameters().begin());
              return objective(copy, x);
            },
            params, 1e-5);
        const auto fd_x = oracle::central_difference(
            [&](const std::vector<double>& xx) { return objective(net, xx); }, x, 1e-5);
        CHECK(max_rel_err(pg, fd_p) < 1e-4);
        CHECK(max_rel_err(xg, fd_x) < 1e-4);
        ++trials;
      }
    }
    CHECK(trials == 100);
  }

  TEST_CASE("backward special cases") {
    const auto net = init_mlp({2, 4, 3}, {Activation::tanh, Activation::softmax}, 5);
    ForwardTrace trace;
    const std::vector<double> x{0.3, -0.2};
    net.forward(x, trace);
    std::vector<double> pg(net.parameter_count(), 0.0);
    const auto xg = net.backward(trace, std::vector<double>{0.0, 0.0, 0.0}, pg);
    for (double v : pg) CHECK(v == 0.0);
    for (double v : xg) CHECK(v == 0.0);
    // A constant upstream is orthogonal to every softmax perturbation.
    const auto xc = net.backward(trace, std::vector<double>{2.0, 2.0, 2.0}, pg);
    for (double v : pg) CHECK(std::abs(v) < 1e-10);
    for (double v : xc) CHECK(std::abs(v) < 1e-10);

    Mlp lin({3, 1}, {Activation::identity});
    const std::vector<double> z{0.5, -2.0, 4.0};
    lin.forward(z, trace);
    std::vector<double> lg(lin.parameter_count(), 0.0);
    lin.backward(trace, std::vector<double>{1.0}, lg);
    CHECK(lg == std::vector<double>{0.5, -2.0, 4.0, 1.0});
    CHECK_THROWS_AS(lin.backward(trace, std::vector<double>{1.0, 1.0}, lg), Error);
  }

  TEST_CASE("adam update") {
    Adam adam(2);
    std::vector<double> p{1.0, -1.0};
    adam.step(p, std::vector<double>{0.0, 0.0});
    CHECK(p == std::vector<double>{1.0, -1.0});
    CHECK(adam.step_count() == 1);

    Adam fresh(2);
    std::vector<double> q{1.0, -1.0};
    fresh.step(q, std::vector<double>{3.0, -0.5});
    CHECK(q[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-9));
    CHECK(q[1] == doctest::Approx(-1.0 + 1e-3).epsilon(1e-9));
    CHECK(fresh.first_moment().size() == 2);
    CHECK(fresh.second_moment().size() == 2);

    std::vector<double> before = q;
    try {
      fresh.step(q, std::vector<double>{NAN, 1.0});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::numeric_domain);
    }
    CHECK(q == before);
    CHECK(fresh.step_count() == 1);

    auto run = [] {
      Adam a(3);
      std::vector<double> w{0.1, 0.2, 0.3};
      for (int i = 0; i < 50; ++i) a.step(w, std::vector<double>{w[0] - 1, std::sin(w[1]), w[2] * w[2]});
      return w;
    };
    CHECK(run() == run());
  }

  TEST_CASE("checkpoint round trip is bit exact") {
    const auto net = init_mlp({2, 7, 4}, {Activation::relu, Activation::softmax}, 12);
    const auto path = (std::filesystem::temp_directory_path() / "distq_net_roundtrip.json").string();
    save_json(path, mlp_to_json(net, 12));
    std::uint64_t seed = 0;
    const auto back = mlp_from_json(load_json(path), &seed);
    CHECK(back == net);
    CHECK(seed == 12);
    std::filesystem::remove(path);
    nlohmann::json bad = mlp_to_json(net, 1);
    bad["version"] = 99;
    CHECK_THROWS_AS(mlp_from_json(bad), Error);
  }
}
