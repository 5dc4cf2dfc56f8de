#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ulamcert {

enum class ErrorKind {
  syntax,
  unknown_identifier,
  arity_mismatch,
  domain,
  invalid_argument,
  blowup,
  positivity_floor,
  grid_mismatch,
  characteristic_crossing,
  coefficient_vanishes,
  estimation_failure,
  hypothesis_failure,
  overflow,
  io,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::syntax: return "syntax_error";
    case ErrorKind::unknown_identifier: return "unknown_identifier";
    case ErrorKind::arity_mismatch: return "arity_mismatch";
    case ErrorKind::domain: return "domain_error";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::blowup: return "blowup";
    case ErrorKind::positivity_floor: return "positivity_floor";
    case ErrorKind::grid_mismatch: return "grid_mismatch";
    case ErrorKind::characteristic_crossing: return "characteristic_crossing";
    case ErrorKind::coefficient_vanishes: return "coefficient_vanishes";
    case ErrorKind::estimation_failure: return "estimation_failure";
    case ErrorKind::hypothesis_failure: return "hypothesis_failure";
    case ErrorKind::overflow: return "overflow";
    case ErrorKind::io: return "io_error";
  }
  return "unknown";
}

/// Every failure in the library is reported through this type. `position` is
/// a byte offset for parse errors and a grid node index for solver errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> position = std::nullopt)
      : std::runtime_error(message), kind_(kind), position_(position) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  [[nodiscard]] std::optional<std::size_t> position() const noexcept { return position_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> position_;
};

}  // namespace ulamcert
