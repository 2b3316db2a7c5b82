#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace popdyn {

enum class ErrorKind {
  kDimensionMismatch,
  kInvalidArgument,
  kDomain,
  kMissingCapability,
  kNonConvergence,
  kConfig,
  kNumerical,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (and the
/// CLI exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

/// Runs one step of an iterative process; a numerical failure inside it is
/// rethrown with the index of the last good step appended.
template <typename Fn>
decltype(auto) guard_step(std::size_t last_good, Fn&& step) {
  try {
    return step();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumerical) throw;
    throw Error(ErrorKind::kNumerical, std::string(e.what()) + "; last good step " + std::to_string(last_good));
  }
}

}  // namespace popdyn
