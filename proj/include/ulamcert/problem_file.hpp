#pragma once

// Flat key = value problem files:
//
//   # Bernoulli example
//   kind     = bernoulli
//   p        = "x"
//   q        = "x / (1 + x^2)"
//   n        = 0.5
//   interval = 0, 1
//   z_a      = 1
//   z_range  = 1, 10
//   epsilon  = 0.1, 0.01
//
// One key per line, '#' starts a comment outside quotes, expressions may be
// quoted. Unknown and repeated keys are rejected.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ulamcert/bounds.hpp"
#include "ulamcert/error.hpp"
#include "ulamcert/interval.hpp"
#include "ulamcert/pde.hpp"
#include "ulamcert/perturb.hpp"

namespace ulamcert::cli {

enum class ProblemKind { bernoulli, riccati, pde };
enum class PdeMode { hu, rassias };

struct ProblemFile {
  ProblemKind kind = ProblemKind::bernoulli;
  std::string p, q, r;
  double n = 2.0;
  Interval interval;
  double z_a = 0.0;
  bounds::ZRange z_range;
  double z_floor = 1e-6;
  std::optional<double> lipschitz;

  std::string psi;
  pde::Domain domain;
  PdeMode mode = PdeMode::hu;
  /// HU mode: numbers or "estimate". Rassias mode: expressions in x, y.
  std::string l1 = "0";
  std::string l2 = "0";
  std::string phi;
  std::size_t fan = 256;
  std::size_t nx = 101;
  std::size_t ny = 401;
  pde::Interpolation interpolation = pde::Interpolation::cubic_hermite;

  std::vector<double> epsilons{0.01};
  std::size_t count = 50;
  std::uint64_t seed = 0;
  perturb::Family family = perturb::Family::sine;
  bool mix_families = true;
  double amplitude = 1.0;
  std::size_t terms = 5;
  std::size_t steps = 10000;
  double blowup_threshold = 1e12;
};

[[nodiscard]] constexpr std::string_view to_string(ProblemKind k) noexcept {
  switch (k) {
    case ProblemKind::bernoulli: return "bernoulli";
    case ProblemKind::riccati: return "riccati";
    case ProblemKind::pde: return "pde";
  }
  return "?";
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline Error file_error(std::size_t line, const std::string& msg) {
  return Error(ErrorKind::syntax, "line " + std::to_string(line) + ": " + msg);
}

inline double to_double(std::string_view s, std::size_t line, std::string_view key) {
  s = trim(s);
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || s.empty()) {
    throw file_error(line, "'" + std::string(key) + "' expects a number, got '" + std::string(s) + "'");
  }
  return v;
}

inline std::uint64_t to_unsigned(std::string_view s, std::size_t line, std::string_view key) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || s.empty()) {
    throw file_error(line, "'" + std::string(key) + "' expects a non-negative integer, got '" +
                               std::string(s) + "'");
  }
  return v;
}

inline std::vector<double> to_list(std::string_view s, std::size_t line, std::string_view key) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(to_double(s.substr(start, comma - start), line, key));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::array<double, 2> to_pair(std::string_view s, std::size_t line, std::string_view key) {
  const auto v = to_list(s, line, key);
  if (v.size() != 2) throw file_error(line, "'" + std::string(key) + "' expects two numbers 'a, b'");
  return {v[0], v[1]};
}

inline bool to_bool(std::string_view s, std::size_t line, std::string_view key) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw file_error(line, "'" + std::string(key) + "' expects true or false");
}

/// Removes one pair of surrounding double quotes.
inline std::string unquote(std::string_view s, std::size_t line) {
  s = trim(s);
  if (!s.empty() && s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw file_error(line, "unterminated string");
    return std::string(s.substr(1, s.size() - 2));
  }
  return std::string(s);
}

/// Strips a '#' comment that is not inside a quoted string.
inline std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

struct KeyRule {
  std::string_view key;
  bool ode;
  bool pde;
};

inline constexpr std::array<KeyRule, 28> kKeys = {{
    {"kind", true, true},          {"p", true, true},
    {"q", true, true},             {"r", true, true},
    {"n", true, false},            {"interval", true, false},
    {"z_a", true, false},          {"z_range", true, false},
    {"z_floor", true, false},      {"lipschitz", true, false},
    {"psi", false, true},          {"domain", false, true},
    {"mode", false, true},         {"l1", false, true},
    {"l2", false, true},           {"phi", false, true},
    {"fan", false, true},          {"grid", false, true},
    {"interpolation", false, true}, {"epsilon", true, true},
    {"count", true, true},         {"seed", true, true},
    {"family", true, true},        {"mix_families", true, true},
    {"amplitude", true, true},     {"terms", true, true},
    {"steps", true, true},         {"blowup_threshold", true, true},
}};

inline const KeyRule* find_rule(std::string_view key) {
  for (const auto& r : kKeys) {
    if (r.key == key) return &r;
  }
  return nullptr;
}

struct Entry {
  std::string value;
  std::size_t line;
};

}  // namespace detail

/// Parses and validates a problem file. Expressions are checked to parse
/// here so a malformed coefficient fails before any solving starts.
[[nodiscard]] inline ProblemFile parse_problem_file(std::string_view text) {
  std::map<std::string, detail::Entry, std::less<>> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = detail::trim(detail::strip_comment(line));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw detail::file_error(line_no, "expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    const auto* rule = detail::find_rule(key);
    if (rule == nullptr) throw detail::file_error(line_no, "unknown key '" + key + "'");
    if (value.empty()) throw detail::file_error(line_no, "key '" + key + "' has no value");
    if (entries.count(key) != 0) {
      throw detail::file_error(line_no, "duplicate key '" + key + "' (first on line " +
                                            std::to_string(entries[key].line) + ")");
    }
    entries[key] = detail::Entry{std::string(value), line_no};
  }

  ProblemFile pf;
  const auto kind_it = entries.find("kind");
  if (kind_it == entries.end()) throw Error(ErrorKind::invalid_argument, "missing required key 'kind'");
  const std::string kind = detail::unquote(kind_it->second.value, kind_it->second.line);
  if (kind == "bernoulli") {
    pf.kind = ProblemKind::bernoulli;
  } else if (kind == "riccati") {
    pf.kind = ProblemKind::riccati;
  } else if (kind == "pde") {
    pf.kind = ProblemKind::pde;
  } else {
    throw detail::file_error(kind_it->second.line, "kind must be bernoulli, riccati or pde");
  }
  const bool is_pde = pf.kind == ProblemKind::pde;

  for (const auto& [key, e] : entries) {
    const auto* rule = detail::find_rule(key);
    if (is_pde ? !rule->pde : !rule->ode) {
      throw detail::file_error(e.line, "key '" + key + "' does not apply to kind " + kind);
    }
  }
  if (pf.kind == ProblemKind::bernoulli && entries.count("r") != 0) {
    throw detail::file_error(entries["r"].line, "key 'r' does not apply to kind bernoulli");
  }
  if (pf.kind == ProblemKind::riccati && entries.count("n") != 0) {
    throw detail::file_error(entries["n"].line, "key 'n' does not apply to kind riccati");
  }

  auto require = [&](std::string_view key) -> const detail::Entry& {
    const auto it = entries.find(key);
    if (it == entries.end()) {
      throw Error(ErrorKind::invalid_argument,
                  "missing required key '" + std::string(key) + "' for kind " + kind);
    }
    return it->second;
  };
  auto has = [&](std::string_view key) { return entries.find(key) != entries.end(); };
  auto str = [&](std::string_view key) {
    const auto& e = require(key);
    return detail::unquote(e.value, e.line);
  };
  auto num = [&](std::string_view key) {
    const auto& e = require(key);
    return detail::to_double(e.value, e.line, key);
  };
  auto uns = [&](std::string_view key) {
    const auto& e = require(key);
    return detail::to_unsigned(e.value, e.line, key);
  };
  auto pair = [&](std::string_view key) {
    const auto& e = require(key);
    return detail::to_pair(e.value, e.line, key);
  };

  pf.p = str("p");
  pf.q = str("q");
  if (pf.kind != ProblemKind::bernoulli) pf.r = str("r");

  if (!is_pde) {
    if (pf.kind == ProblemKind::bernoulli && has("n")) pf.n = num("n");
    const auto iv = pair("interval");
    pf.interval = Interval{iv[0], iv[1]};
    pf.z_a = num("z_a");
    const auto zr = pair("z_range");
    pf.z_range = bounds::ZRange{zr[0], zr[1]};
    if (has("z_floor")) pf.z_floor = num("z_floor");
    if (has("lipschitz")) pf.lipschitz = num("lipschitz");
    for (const auto* e : {&pf.p, &pf.q}) (void)expr::parse(*e, {"x"});
    if (pf.kind == ProblemKind::riccati) (void)expr::parse(pf.r, {"x"});
  } else {
    pf.psi = str("psi");
    const auto d = pair("domain");
    pf.domain = pde::Domain{d[0], d[1]};
    if (has("mode")) {
      const auto m = str("mode");
      if (m == "hu") {
        pf.mode = PdeMode::hu;
      } else if (m == "rassias") {
        pf.mode = PdeMode::rassias;
      } else {
        throw detail::file_error(entries["mode"].line, "mode must be hu or rassias");
      }
    }
    if (pf.mode == PdeMode::hu) {
      pf.l1 = str("l1");
      pf.l2 = str("l2");
      if (has("phi")) throw detail::file_error(entries["phi"].line, "phi only applies to mode rassias");
      for (const auto* key : {"l1", "l2"}) {
        const auto v = str(key);
        if (v != "estimate") (void)detail::to_double(v, entries.find(key)->second.line, key);
      }
    } else {
      pf.phi = str("phi");
      if (has("l1")) pf.l1 = str("l1");
      if (has("l2")) pf.l2 = str("l2");
      for (const auto* e : {&pf.phi, &pf.l1, &pf.l2}) (void)expr::parse(*e, {"x", "y"});
    }
    if (has("fan")) pf.fan = uns("fan");
    if (has("grid")) {
      const auto g = pair("grid");
      if (g[0] < 2 || g[1] < 3 || g[0] != static_cast<double>(static_cast<std::size_t>(g[0])) ||
          g[1] != static_cast<double>(static_cast<std::size_t>(g[1]))) {
        throw detail::file_error(entries["grid"].line, "grid expects integers nx >= 2, ny >= 3");
      }
      pf.nx = static_cast<std::size_t>(g[0]);
      pf.ny = static_cast<std::size_t>(g[1]);
    }
    if (has("interpolation")) {
      const auto m = str("interpolation");
      if (m == "linear") {
        pf.interpolation = pde::Interpolation::linear;
      } else if (m == "cubic_hermite") {
        pf.interpolation = pde::Interpolation::cubic_hermite;
      } else {
        throw detail::file_error(entries["interpolation"].line,
                                 "interpolation must be linear or cubic_hermite");
      }
    }
    for (const auto* e : {&pf.p, &pf.q, &pf.r}) (void)expr::parse(*e, {"x", "y", "u"});
    (void)expr::parse(pf.psi, {"y"});
  }

  if (has("epsilon")) {
    const auto& e = require("epsilon");
    pf.epsilons = detail::to_list(e.value, e.line, "epsilon");
  }
  if (has("count")) pf.count = uns("count");
  if (has("seed")) pf.seed = uns("seed");
  if (has("family")) pf.family = perturb::parse_family(str("family"));
  if (has("mix_families")) {
    const auto& e = require("mix_families");
    pf.mix_families = detail::to_bool(e.value, e.line, "mix_families");
  }
  if (has("amplitude")) pf.amplitude = num("amplitude");
  if (has("terms")) pf.terms = uns("terms");
  if (has("steps")) pf.steps = uns("steps");
  if (has("blowup_threshold")) pf.blowup_threshold = num("blowup_threshold");
  return pf;
}

}  // namespace ulamcert::cli
