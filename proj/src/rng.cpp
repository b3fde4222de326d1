#include "distq/rng.hpp"

#include "distq/error.hpp"

namespace distq {

std::string_view category_name(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::configuration: return "configuration";
    case ErrorCategory::contract: return "contract";
    case ErrorCategory::numeric_domain: return "numeric-domain";
    case ErrorCategory::numerical_integrity: return "numerical-integrity";
    case ErrorCategory::singularity: return "singularity";
    case ErrorCategory::degenerate_support: return "degenerate-support";
    case ErrorCategory::capacity: return "capacity";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

int exit_code(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::configuration: return 2;
    case ErrorCategory::contract: return 3;
    case ErrorCategory::numeric_domain:
    case ErrorCategory::numerical_integrity:
    case ErrorCategory::singularity:
    case ErrorCategory::degenerate_support: return 4;
    case ErrorCategory::capacity: return 5;
    case ErrorCategory::io: return 6;
  }
  return 1;
}

namespace rng {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Stream::Stream(std::uint64_t seed, Purpose purpose, std::uint64_t a, std::uint64_t b,
               std::uint64_t c) noexcept {
  std::uint64_t key = mix64(seed);
  key = mix64(key ^ static_cast<std::uint64_t>(purpose));
  key = mix64(key ^ a);
  key = mix64(key ^ (b * 0xd1b54a32d192ed03ULL));
  key = mix64(key ^ (c * 0x8cb92ba72f3d8dd7ULL));
  state_ = key;
}

Stream::result_type Stream::operator()() noexcept {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Stream::uniform() noexcept {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double Stream::normal() { return normal_(*this); }

}  // namespace rng
}  // namespace distq
