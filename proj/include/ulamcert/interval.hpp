#pragma once

#include <cmath>
#include <string>

#include "ulamcert/error.hpp"

namespace ulamcert {

/// Closed bounded interval [a, b] with a < b.
struct Interval {
  double a = 0.0;
  double b = 1.0;

  [[nodiscard]] double length() const noexcept { return b - a; }
  [[nodiscard]] bool contains(double x) const noexcept { return a <= x && x <= b; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

inline void validate(const Interval& iv, const char* what = "interval") {
  if (!std::isfinite(iv.a) || !std::isfinite(iv.b)) {
    throw Error(ErrorKind::invalid_argument, std::string(what) + " endpoints must be finite");
  }
  if (iv.a == iv.b) throw Error(ErrorKind::invalid_argument, std::string(what) + " empty (a = b)");
  if (iv.a > iv.b) throw Error(ErrorKind::invalid_argument, std::string(what) + " reversed (a > b)");
}

}  // namespace ulamcert
