#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ulamcert/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Hyers-Ulam stability certificates for Bernoulli, Riccati and quasilinear PDE problems"};
  app.require_subcommand(1);

  auto* certify = app.add_subcommand("certify", "certify a problem file");
  std::string file;
  std::string out_dir = "ulamcert_out";
  ulamcert::cli::Overrides ov;
  std::size_t count = 0, steps = 0, fan = 0;
  std::uint64_t seed = 0;
  certify->add_option("file", file, "problem file")->required();
  certify->add_option("--out", out_dir, "output directory");
  certify->add_option("--epsilon", ov.epsilons, "epsilon values (replace the file's list)");
  auto* count_opt = certify->add_option("--count", count, "ensemble size");
  auto* seed_opt = certify->add_option("--seed", seed, "ensemble seed");
  auto* steps_opt = certify->add_option("--steps", steps, "RK4 steps");
  auto* fan_opt = certify->add_option("--fan", fan, "characteristic fan size");
  certify->add_flag("--no-timestamp", ov.no_timestamp, "omit timing from the report");
  certify->add_flag("--csv", ov.csv, "write trajectory or field CSVs");

  auto* gron = app.add_subcommand("gronwall-check", "check the Gronwall bound against fixed-point iteration");
  std::string beta;
  double epsilon = 0.0;
  std::vector<double> interval;
  std::size_t iters = 200;
  gron->add_option("--beta", beta, "beta(x)")->required();
  gron->add_option("--epsilon", epsilon, "epsilon")->required();
  gron->add_option("--interval", interval, "A,B")->required()->delimiter(',')->expected(2);
  gron->add_option("--iters", iters, "maximum Picard iterations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (certify->parsed()) {
    if (*count_opt) ov.count = count;
    if (*seed_opt) ov.seed = seed;
    if (*steps_opt) ov.steps = steps;
    if (*fan_opt) ov.fan = fan;
    return ulamcert::cli::cmd_certify(file, out_dir, ov, std::cout, std::cerr);
  }
  return ulamcert::cli::cmd_gronwall_check(beta, epsilon, ulamcert::Interval{interval[0], interval[1]},
                                           iters, std::cout, std::cerr);
}
