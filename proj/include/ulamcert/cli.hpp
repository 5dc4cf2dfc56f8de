#pragma once

// certify and gronwall-check commands. Both write human-readable lines to
// `out`, machine-readable error JSON to `err`, and return the process exit
// code: 0 all verdicts hold, 1 some verdict violated, 2 invalid input or a
// failed hypothesis.

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ulamcert/bounds.hpp"
#include "ulamcert/error.hpp"
#include "ulamcert/expr.hpp"
#include "ulamcert/gronwall.hpp"
#include "ulamcert/ode.hpp"
#include "ulamcert/pde.hpp"
#include "ulamcert/perturb.hpp"
#include "ulamcert/problem_file.hpp"

namespace ulamcert::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct Overrides {
  std::vector<double> epsilons;
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> fan;
  bool no_timestamp = false;
  bool csv = false;
};

/// Lower-case hex SHA-256 of `data`.
[[nodiscard]] inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::io, "sha256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

[[nodiscard]] inline nlohmann::json error_json(const Error& e) {
  nlohmann::json j{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}};
  if (e.position()) j["position"] = *e.position();
  return j;
}

[[nodiscard]] inline int exit_code(bounds::Verdict v) {
  switch (v) {
    case bounds::Verdict::holds: return 0;
    case bounds::Verdict::violated: return 1;
    case bounds::Verdict::range_exited:
    case bounds::Verdict::unusable: return 2;
  }
  return 2;
}

inline void apply(const Overrides& o, ProblemFile& pf) {
  if (!o.epsilons.empty()) pf.epsilons = o.epsilons;
  if (o.count) pf.count = *o.count;
  if (o.seed) pf.seed = *o.seed;
  if (o.steps) pf.steps = *o.steps;
  if (o.fan) pf.fan = *o.fan;
}

/// Median sup per epsilon and, for consecutive epsilons, the ratio of
/// medians divided by the ratio of epsilons (1 means exactly linear).
[[nodiscard]] inline nlohmann::json linearity_report(const std::vector<double>& eps,
                                                     const std::vector<std::vector<double>>& sups,
                                                     const std::vector<double>& bound_values) {
  auto median = [](std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  nlohmann::json j;
  std::vector<double> medians;
  for (const auto& s : sups) medians.push_back(median(s));
  j["epsilons"] = eps;
  j["median_sups"] = medians;
  nlohmann::json steps = nlohmann::json::array();
  bool within = true;
  for (std::size_t k = 1; k < eps.size(); ++k) {
    const double eps_ratio = eps[k - 1] / eps[k];
    const double sup_scaling = medians[k] > 0.0 ? (medians[k - 1] / medians[k]) / eps_ratio : 0.0;
    const double bound_scaling = (bound_values[k - 1] / bound_values[k]) / eps_ratio;
    const bool ok = std::abs(sup_scaling - 1.0) <= 0.10;
    within = within && ok;
    steps.push_back({{"from", eps[k - 1]},
                     {"to", eps[k]},
                     {"median_scaling", sup_scaling},
                     {"bound_scaling", bound_scaling},
                     {"within_10_percent", ok}});
  }
  j["steps"] = steps;
  j["linear_within_10_percent"] = within;
  return j;
}

namespace detail {

inline perturb::PerturbationSpec base_spec(const ProblemFile& pf, double eps) {
  perturb::PerturbationSpec s;
  s.family = pf.family;
  s.epsilon = eps;
  s.seed = pf.seed;
  s.params.amplitude = pf.amplitude;
  s.params.terms = pf.terms;
  return s;
}

inline ode::OdeProblem build_ode(const ProblemFile& pf) {
  const std::vector<std::string> x = {"x"};
  if (pf.kind == ProblemKind::bernoulli) {
    ode::BernoulliProblem b{expr::parse(pf.p, x), expr::parse(pf.q, x), pf.n, pf.interval, pf.z_a,
                            pf.z_floor};
    ode::validate(b);
    return b;
  }
  ode::RiccatiProblem r{expr::parse(pf.p, x), expr::parse(pf.q, x), expr::parse(pf.r, x),
                        pf.interval, pf.z_a};
  ode::validate(r);
  return r;
}

inline pde::QuasilinearProblem build_pde(const ProblemFile& pf) {
  const std::vector<std::string> xyu = {"x", "y", "u"};
  pde::QuasilinearProblem prob{expr::parse(pf.p, xyu), expr::parse(pf.q, xyu),
                               expr::parse(pf.r, xyu), expr::parse(pf.psi, {"y"}), pf.domain};
  pde::validate(prob.domain);
  return prob;
}

inline pde::CharacteristicsConfig pde_config(const ProblemFile& pf) {
  pde::CharacteristicsConfig cfg;
  cfg.solver = ode::SolverConfig{pf.steps, pf.blowup_threshold};
  cfg.nx = pf.nx;
  cfg.ny = pf.ny;
  cfg.interpolation = pf.interpolation;
  return cfg;
}

inline std::string eps_tag(std::size_t k) { return "eps" + std::to_string(k); }

struct RunOutput {
  nlohmann::json certificates = nlohmann::json::array();
  nlohmann::json manifest = nlohmann::json::array();
  std::vector<std::vector<double>> sups;
  std::vector<double> bounds;
  std::vector<std::pair<std::string, std::string>> csv_files;
  int worst_exit = 0;
  std::vector<std::string> summary;
};

inline void record(RunOutput& run, bounds::Verdict v) {
  const int code = exit_code(v);
  if (code == 2 || run.worst_exit == 2) {
    run.worst_exit = 2;
  } else {
    run.worst_exit = std::max(run.worst_exit, code);
  }
}

inline std::string summary_line(double eps, double bound, double ratio, bounds::Verdict v) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "epsilon=%.6g bound=%.10g max_ratio=%.6f verdict=%s", eps, bound,
                ratio, std::string(bounds::to_string(v)).c_str());
  return buf;
}

inline void run_ode(const ProblemFile& pf, bool csv, RunOutput& run) {
  const ode::OdeProblem prob = build_ode(pf);
  const ode::SolverConfig cfg{pf.steps, pf.blowup_threshold};
  bounds::OdeCertifyOptions opts;
  opts.z_range = pf.z_range;
  opts.user_lipschitz = pf.lipschitz;
  opts.ensemble.mix_families = pf.mix_families;
  if (csv) {
    std::ostringstream os;
    ode::write_csv(os, ode::solve_exact(prob, cfg));
    run.csv_files.emplace_back("exact.csv", os.str());
  }
  for (std::size_t k = 0; k < pf.epsilons.size(); ++k) {
    const auto spec = base_spec(pf, pf.epsilons[k]);
    const auto cert = bounds::certify_ode(prob, opts, spec, pf.count, cfg);
    run.certificates.push_back(bounds::to_json(cert));
    run.sups.push_back(cert.measured_sups);
    run.bounds.push_back(cert.bound());
    record(run, cert.verdict);
    run.summary.push_back(summary_line(cert.epsilon, cert.bound(), cert.max_ratio, cert.verdict));

    perturb::PerturbationSpec member_spec = spec;
    member_spec.domain_x = ode::interval_of(prob);
    const auto members = perturb::ensemble(member_spec, pf.count, opts.ensemble);
    run.manifest.push_back({{"epsilon", spec.epsilon}, {"members", perturb::manifest_json(members)}});
    if (csv) {
      try {
        std::ostringstream os;
        ode::write_csv(os, ode::solve_perturbed(prob, members.front(), cfg));
        run.csv_files.emplace_back("member0_" + eps_tag(k) + ".csv", os.str());
      } catch (const Error&) {
        // The certificate already records the failed member.
      }
    }
  }
}

inline void run_pde(const ProblemFile& pf, bool csv, RunOutput& run) {
  const pde::QuasilinearProblem prob = build_pde(pf);
  const auto cfg = pde_config(pf);
  perturb::EnsembleOptions ens;
  ens.mix_families = pf.mix_families;
  if (csv) {
    std::ostringstream os;
    pde::write_csv(os, pde::solve_characteristics(prob, pf.fan, cfg));
    run.csv_files.emplace_back("field_exact.csv", os.str());
  }
  std::optional<expr::Expression> phi;
  if (pf.mode == PdeMode::rassias) phi = expr::parse(pf.phi, {"x", "y"});

  for (std::size_t k = 0; k < pf.epsilons.size(); ++k) {
    const auto spec = base_spec(pf, pf.epsilons[k]);
    perturb::PerturbationSpec member_spec = spec;
    member_spec.dims = 2;
    member_spec.domain_x = Interval{0.0, prob.domain.a_len};
    member_spec.domain_y = Interval{0.0, prob.domain.b_len};
    if (phi) member_spec.weight = *phi;
    const auto members = perturb::ensemble(member_spec, pf.count, ens);

    if (phi) {
      const auto cert = pde::certify_pde_rassias(prob, *phi, spec, pf.count,
                                                 expr::parse(pf.l1, {"x", "y"}),
                                                 expr::parse(pf.l2, {"x", "y"}), pf.fan, cfg, {ens});
      run.certificates.push_back(pde::to_json(cert));
      std::vector<double> sups;
      for (double r : cert.member_ratios) sups.push_back(r * cert.c_phi * cert.epsilon);
      run.sups.push_back(sups);
      run.bounds.push_back(cert.c_phi * cert.epsilon);
      record(run, cert.verdict);
      run.summary.push_back(
          summary_line(cert.epsilon, cert.c_phi * cert.epsilon, cert.pointwise_ratios, cert.verdict));
    } else {
      pde::PdeHuOptions opts;
      opts.ensemble = ens;
      if (pf.l1 == "estimate" || pf.l2 == "estimate") {
        // Pairs (exact, member k) for the first few members.
        const auto exact = pde::solve_characteristics(prob, pf.fan, cfg);
        pde::LipschitzPair est;
        const std::size_t used = std::min<std::size_t>(members.size(), 4);
        for (std::size_t m = 0; m < used; ++m) {
          const auto v = pde::solve_perturbed_pde(prob, members[m], pf.fan, cfg);
          const auto e = pde::estimate_l1_l2(prob, exact, v);
          est.l1 = std::max(est.l1, e.l1);
          est.l2 = std::max(est.l2, e.l2);
        }
        opts.provenance = "estimated_from_" + std::to_string(used) + "_pairs";
        opts.l1 = pf.l1 == "estimate" ? est.l1 : std::stod(pf.l1);
        opts.l2 = pf.l2 == "estimate" ? est.l2 : std::stod(pf.l2);
      } else {
        opts.l1 = std::stod(pf.l1);
        opts.l2 = std::stod(pf.l2);
      }
      const auto cert = pde::certify_pde_hu(prob, spec, pf.count, opts, pf.fan, cfg);
      run.certificates.push_back(pde::to_json(cert));
      run.sups.push_back(cert.measured_sups);
      run.bounds.push_back(cert.bound());
      record(run, cert.verdict);
      run.summary.push_back(summary_line(cert.epsilon, cert.bound(), cert.max_ratio, cert.verdict));
    }
    run.manifest.push_back({{"epsilon", spec.epsilon}, {"members", perturb::manifest_json(members)}});
    if (csv) {
      try {
        std::ostringstream os;
        pde::write_csv(os, pde::solve_perturbed_pde(prob, members.front(), pf.fan, cfg));
        run.csv_files.emplace_back("field_member0_" + eps_tag(k) + ".csv", os.str());
      } catch (const Error&) {
      }
    }
  }
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot write " + path.string());
  f << content;
  if (!f) throw Error(ErrorKind::io, "failed writing " + path.string());
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

/// Reads the problem file, certifies once per epsilon and writes
/// certificate.json, manifest.json and, with csv, trajectory or field CSVs
/// into output_dir.
[[nodiscard]] inline int cmd_certify(const std::string& problem_file_path,
                                     const std::string& output_dir, const Overrides& overrides,
                                     std::ostream& out, std::ostream& err) {
  try {
    const auto started = std::chrono::steady_clock::now();
    std::ifstream in(problem_file_path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open problem file " + problem_file_path);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    ProblemFile pf = parse_problem_file(text);
    apply(overrides, pf);
    if (pf.epsilons.empty()) throw Error(ErrorKind::invalid_argument, "epsilon list is empty");
    for (double e : pf.epsilons) {
      if (!(e > 0.0) || !std::isfinite(e)) {
        throw Error(ErrorKind::invalid_argument, "epsilon values must be positive and finite");
      }
    }

    detail::RunOutput run;
    if (pf.kind == ProblemKind::pde) {
      detail::run_pde(pf, overrides.csv, run);
    } else {
      detail::run_ode(pf, overrides.csv, run);
    }

    nlohmann::json report{{"schema", "ulamcert/1"},
                          {"tool_version", kToolVersion},
                          {"input_hash", "sha256:" + sha256_hex(text)},
                          {"problem_kind", std::string(to_string(pf.kind))},
                          {"seed", pf.seed},
                          {"count", pf.count},
                          {"certificates", run.certificates}};
    if (pf.epsilons.size() > 1) {
      report["linearity"] = linearity_report(pf.epsilons, run.sups, run.bounds);
    }
    if (!overrides.no_timestamp) {
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      report["timing"] = {{"started_utc", detail::utc_timestamp()}, {"wall_seconds", seconds}};
    }

    const std::filesystem::path dir(output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create output directory " + output_dir);
    detail::write_file(dir / "certificate.json", report.dump(2) + "\n");
    detail::write_file(dir / "manifest.json",
                       nlohmann::json{{"schema", "ulamcert/1"}, {"ensembles", run.manifest}}.dump(2) +
                           "\n");
    for (const auto& [name, content] : run.csv_files) detail::write_file(dir / name, content);

    for (const auto& line : run.summary) out << line << "\n";
    out << "wrote " << (dir / "certificate.json").string() << "\n";
    if (run.worst_exit == 2) err << nlohmann::json{{"error", "hypothesis_failure"},
                                                   {"message", "a certificate is unusable or its "
                                                               "hypotheses were not met; see "
                                                               "certificate notes"}}
                                        .dump()
                                 << "\n";
    return run.worst_exit;
  } catch (const Error& e) {
    err << error_json(e).dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << nlohmann::json{{"error", "internal_error"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }
}

/// Fixed-point iterate of u <= eps (x - a) + int beta u against the
/// exponential bound; exit 0 iff the ratio stays <= 1 + 1e-8.
[[nodiscard]] inline int cmd_gronwall_check(const std::string& beta_expr, double epsilon,
                                            const Interval& interval, std::size_t iterations,
                                            std::ostream& out, std::ostream& err) {
  try {
    const expr::Expression beta = expr::parse(beta_expr, {"x"});
    bounds::GronwallForm form{epsilon, interval.a, [&](double x) { return beta({x}); }};
    const auto check = bounds::gronwall_check(form, interval, iterations);
    char buf[160];
    std::snprintf(buf, sizeof buf, "max_ratio=%.17g iterations=%zu converged=%s min_beta=%.6g\n",
                  check.max_ratio, check.iterations, check.converged ? "true" : "false",
                  check.min_beta);
    out << buf << (check.passes() ? "PASS" : "FAIL") << "\n";
    return check.passes() ? 0 : 1;
  } catch (const Error& e) {
    err << error_json(e).dump() << "\n";
    return 2;
  }
}

}  // namespace ulamcert::cli
