#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace distq::rng {

// Stream keys. Every random draw in the library comes from a stream keyed by
// (run seed, purpose, indices), so results never depend on evaluation order.
enum class Purpose : std::uint64_t {
  prior = 1,
  observation = 2,
  dither = 3,
  shuffle = 4,
  init = 5,
  trial = 6,
};

std::uint64_t mix64(std::uint64_t x) noexcept;

class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t seed, Purpose purpose, std::uint64_t a = 0, std::uint64_t b = 0,
         std::uint64_t c = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double normal();

 private:
  std::uint64_t state_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace distq::rng
