#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "eit/cli/runner.hpp"
#include "eit/errors.hpp"
#include "json.hpp"

int main(int argc, char** argv) {
  using namespace eit::cli;
  CLI::App app{"Posterior inference for piecewise-constant conductivities from electrode data"};
  app.require_subcommand(1);

  std::string config_path;
  RunFlags flags;
  std::vector<double> theta;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  int iters = 0, burnin = 0, thin = 0, pairs = 0;

  app.add_option("--config", config_path, "experiment config (JSON)")->required();
  app.add_option("--jobs", flags.jobs, "worker threads (default: EIT_JOBS or all cores)");
  app.add_flag("--check", flags.check, "exit 4 when the built-in acceptance checks fail");

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"forward", "write G_theta (and optionally its sensitivity)"},
      {"simulate", "simulate N observations at theta"},
      {"mcmc", "sample the posterior for a dataset"},
      {"bvm", "Bernstein-von Mises diagnostics at theta0"},
      {"coverage", "frequentist coverage of credible balls"},
      {"rate", "posterior mean RMSE over a grid of N"},
      {"stability", "ratio |theta - theta'| / |G - G'| over random pairs"},
      {"delta", "electrode gap statistic and injectivity probe"},
      {"mesh", "write the mesh as CSV"},
  };
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--theta", theta, "conductivity values")->delimiter(',');
    sub->add_option("--out", flags.out, "output path");
    sub->add_option("--n", n, "number of observations");
    sub->add_option("--seed", seed, "seed override");
    sub->add_option("--iters", iters, "MCMC iterations including burn-in");
    sub->add_option("--burnin", burnin, "MCMC burn-in");
    sub->add_option("--thin", thin, "MCMC thinning");
    if (std::string(s.name) == "forward") {
      sub->add_option("--sensitivity", flags.sensitivity, "write dG/dtheta as i,j,k,value");
      sub->add_option("--dump-stiffness", flags.dump_stiffness, "write K_theta as a coordinate list");
    }
    if (std::string(s.name) == "mcmc") sub->add_option("--data", flags.data, "dataset CSV");
    if (std::string(s.name) == "stability") sub->add_option("--pairs", pairs, "number of pairs");
    sub->add_option("--config", config_path, "experiment config (JSON)");
    sub->add_option("--jobs", flags.jobs, "worker threads");
    sub->add_flag("--check", flags.check, "exit 4 when the built-in checks fail");
  }
  app.get_option("--config")->required(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  CLI::App* chosen = app.get_subcommands().front();
  auto given = [&](const char* opt) { return chosen->count(opt) > 0; };
  if (given("--theta")) flags.theta = theta;
  if (given("--n")) flags.n = n;
  if (given("--seed")) flags.seed = seed;
  if (given("--iters")) flags.iters = iters;
  if (given("--burnin")) flags.burnin = burnin;
  if (given("--thin")) flags.thin = thin;
  if (chosen->get_name() == "stability" && given("--pairs")) flags.pairs = pairs;

  if (config_path.empty()) {
    std::cerr << R"({"error":"config","message":"--config is required","exit_code":2})" << std::endl;
    return kConfigError;
  }
  ExperimentConfig config;
  try {
    config = parse_config(config_path);
  } catch (const eit::ConfigError& e) {
    std::cerr << nlohmann::json{{"error", "config"}, {"message", e.what()}, {"exit_code", 2}}.dump() << std::endl;
    return kConfigError;
  }
  return run(chosen->get_name(), config, flags, std::cout, std::cerr);
}
