#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace distq {

enum class ErrorCategory {
  configuration,
  contract,
  numeric_domain,
  numerical_integrity,
  singularity,
  degenerate_support,
  capacity,
  io,
};

std::string_view category_name(ErrorCategory category) noexcept;

// Process exit code used by the CLI for each category.
int exit_code(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

inline void require(bool condition, ErrorCategory category, const std::string& message) {
  if (!condition) throw Error(category, message);
}

}  // namespace distq
