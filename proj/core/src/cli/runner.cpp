#include "eit/cli/runner.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <thread>

#include "eit/cli/io.hpp"
#include "eit/errors.hpp"
#include "eit/random.hpp"
#include "json.hpp"

namespace eit::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

json to_json_vector(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json_matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json_vector(m.row(i).transpose()));
  return rows;
}

json report_json(const BvmReport& r) {
  return {{"whitened_mean", to_json_vector(r.whitened_mean)},
          {"whitened_cov_spectral_gap", r.whitened_cov_spectral_gap},
          {"ks_stats", r.ks_stats},
          {"tv_proxy", r.tv_proxy},
          {"histogram_tv", r.histogram_tv},
          {"n_used", r.n_used}};
}

struct Context {
  const ExperimentConfig& config;
  const RunFlags& flags;
  std::ostream& out;
  fs::path out_dir;
  json manifest;
  std::vector<std::string> artifacts;
  bool check_failed = false;

  fs::path artifact(const std::string& flag_value, const std::string& default_name) {
    fs::path p = flag_value.empty() ? out_dir / default_name : fs::path(flag_value);
    artifacts.push_back(p.string());
    return p;
  }

  void emit(const std::string& name, const json& report) {
    const fs::path p = out_dir / (name + ".json");
    write_text(p, report.dump(2) + "\n");
    artifacts.push_back(p.string());
    out << report.dump(2) << '\n';
  }

  void check(bool ok, const std::string& what) {
    if (!flags.check) return;
    out << (ok ? "CHECK PASS " : "CHECK FAIL ") << what << '\n';
    if (!ok) check_failed = true;
  }
};

Theta theta_from_flags(const Context& ctx) {
  if (!ctx.flags.theta) return ctx.config.theta0();
  const auto& v = *ctx.flags.theta;
  if (static_cast<int>(v.size()) != ctx.config.domain.regions)
    throw ConfigError("--theta must have D = " + std::to_string(ctx.config.domain.regions) + " entries");
  Theta theta = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  if (!ctx.config.box().contains(theta)) throw ConfigError("--theta lies outside [gamma_min, gamma_max]^D");
  return theta;
}

PosteriorSettings settings_from(const Context& ctx) {
  PosteriorSettings s = ctx.config.posterior_settings();
  if (ctx.flags.iters) s.iters = *ctx.flags.iters;
  if (ctx.flags.burnin) s.burnin = *ctx.flags.burnin;
  if (ctx.flags.thin) s.thin = *ctx.flags.thin;
  if (s.iters <= s.burnin || s.burnin < 0 || s.thin < 1)
    throw ConfigError("need iters > burnin >= 0 and thin >= 1");
  return s;
}

json chain_summary(const Chain& chain, const Theta& mean, double alpha) {
  return {{"samples", chain.size()},
          {"acceptance_rate", chain.acceptance_rate},
          {"ess", to_json_vector(chain.ess)},
          {"posterior_mean", to_json_vector(mean)},
          {"credible_radius", credible_radius(chain, mean, alpha)},
          {"alpha", alpha},
          {"final_scale", chain.final_scale},
          {"seed", chain.seed},
          {"warnings", chain.warnings}};
}

// Two-sided 99% acceptance band for the number of covered replicates.
std::pair<int, int> binomial_band(int n, double p) {
  std::vector<double> pmf(n + 1);
  for (int k = 0; k <= n; ++k)
    pmf[k] = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                      k * std::log(p) + (n - k) * std::log1p(-p));
  int lo = 0;
  double tail = 0.0;
  while (lo < n && tail + pmf[lo] <= 0.005) tail += pmf[lo++];
  int hi = n;
  tail = 0.0;
  while (hi > 0 && tail + pmf[hi] <= 0.005) tail += pmf[hi--];
  return {lo, hi};
}

void cmd_forward(Context& ctx, ForwardModel& model) {
  const Theta theta = theta_from_flags(ctx);
  const bool with_sens = !ctx.flags.sensitivity.empty();
  const ForwardEvaluation eval = model.evaluate(theta, with_sens);
  const Eigen::MatrixXd& g = eval.matrix.G;
  write_matrix_csv(ctx.artifact(ctx.flags.out, "g.csv"), g);
  if (with_sens) write_sensitivity_csv(ctx.artifact(ctx.flags.sensitivity, ""), eval.sensitivity);
  if (!ctx.flags.dump_stiffness.empty()) {
    std::vector<double> t(theta.data(), theta.data() + theta.size());
    const SparseMatrix k = assemble(t, model.stiffness());
    const fs::path p = ctx.artifact(ctx.flags.dump_stiffness, "");
    std::ofstream os(p);
    write_coordinate_list(k, os);
  }
  const double symmetry = (g - g.transpose()).cwiseAbs().maxCoeff();
  const double spectral = spectral_norm(g);
  const double frobenius = g.norm();
  ctx.emit("forward", {{"theta", to_json_vector(theta)},
                       {"mesh_id", eval.matrix.mesh_id},
                       {"symmetry_error", symmetry},
                       {"spectral_norm", spectral},
                       {"frobenius_norm", frobenius},
                       {"max_abs_entry", g.cwiseAbs().maxCoeff()},
                       {"solver_residual", model.last_residual()}});
  ctx.check(symmetry <= 1e-9, "symmetry");
  ctx.check(spectral <= frobenius * (1.0 + 1e-12), "spectral norm <= Frobenius norm");
  if ((theta.array() == 1.0).all()) ctx.check(g.cwiseAbs().maxCoeff() <= 1e-12, "unit conductivity gives G = 0");
}

void cmd_simulate(Context& ctx, ForwardModel& model) {
  const Theta theta = theta_from_flags(ctx);
  const std::size_t n = ctx.flags.n.value_or(ctx.config.experiment.n);
  const std::uint64_t seed = ctx.flags.seed.value_or(derive_seed(ctx.config.seed, "simulate"));
  const Dataset data = simulate(model, theta, n, seed);
  write_dataset_csv(ctx.artifact(ctx.flags.out, "z.csv"), data);
  ctx.manifest["data_seed"] = seed;
  ctx.emit("simulate", {{"theta", to_json_vector(theta)}, {"N", n}, {"seed", seed}});
}

void cmd_mcmc(Context& ctx, ForwardModel& model) {
  if (ctx.flags.data.empty()) throw ConfigError("mcmc needs --data");
  const Dataset data = read_dataset_csv(ctx.flags.data);
  if (data.electrodes() != model.electrode_count())
    throw ConfigError("dataset has " + std::to_string(data.electrodes()) + " electrodes, config has " +
                      std::to_string(model.electrode_count()));
  const PosteriorSettings settings = settings_from(ctx);
  const std::uint64_t seed = ctx.flags.seed.value_or(derive_seed(ctx.config.seed, "mcmc"));
  const PosteriorRun run = run_posterior(model, SufficientStatistics::from(data), settings, seed);
  write_chain_csv(ctx.artifact(ctx.flags.out, "chain.csv"), run.chain, settings.burnin, settings.thin);
  ctx.manifest["mcmc_seed"] = seed;
  json report = chain_summary(run.chain, run.mean, ctx.config.experiment.alpha);
  report["N"] = data.size();
  report["start"] = to_json_vector(run.start);
  ctx.emit("mcmc", report);
}

void cmd_bvm(Context& ctx, ForwardModel& model) {
  const Theta theta0 = ctx.config.theta0();
  const std::size_t n = ctx.flags.n.value_or(ctx.config.experiment.n);
  const std::uint64_t data_seed = derive_seed(ctx.config.seed, "simulate");
  const std::uint64_t chain_seed = ctx.flags.seed.value_or(derive_seed(ctx.config.seed, "mcmc"));
  const Dataset data = simulate(model, theta0, n, data_seed);
  const PosteriorSettings settings = settings_from(ctx);
  const PosteriorRun run = run_posterior(model, SufficientStatistics::from(data), settings, chain_seed);
  const InformationMatrix info = information_matrix(model, theta0);
  const Theta psi = recentering(model, theta0, data);
  const BvmDiagnostics diag = bvm_diagnostics(run.chain, theta0, psi, info, n);
  write_chain_csv(ctx.artifact(ctx.flags.out, "chain.csv"), run.chain, settings.burnin, settings.thin);

  // Gaussian control: exact draws from the limit law, 10^4 of them.
  const int control_draws = 10000;
  Engine engine = make_engine(derive_seed(ctx.config.seed, "bvm-control"));
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::MatrixXd lower = info.matrix.llt().matrixL();
  Eigen::MatrixXd synthetic(control_draws, theta0.size());
  for (int s = 0; s < control_draws; ++s) {
    Eigen::VectorXd z(theta0.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(engine);
    const Eigen::VectorXd offset = lower.transpose().triangularView<Eigen::Upper>().solve(z);
    synthetic.row(s) = (psi + offset / std::sqrt(static_cast<double>(n))).transpose();
  }
  const BvmReport control = bvm_report(synthetic, psi, info, n, control_draws);

  json report{{"theta0", to_json_vector(theta0)},
              {"N", n},
              {"psi", to_json_vector(psi)},
              {"information", to_json_matrix(info.matrix)},
              {"information_min_eigenvalue", info.min_eigenvalue},
              {"chain", chain_summary(run.chain, run.mean, ctx.config.experiment.alpha)},
              {"psi_centered", report_json(diag.psi_centered)},
              {"mean_centered", report_json(diag.mean_centered)},
              {"whitened_truth_offset", to_json_vector(diag.whitened_truth_offset)},
              {"gaussian_control", report_json(control)},
              {"seeds", {{"data", data_seed}, {"chain", chain_seed}}}};
  ctx.emit("bvm", report);
  ctx.check(run.chain.min_ess() >= 2000.0, "effective samples >= 2000");
  ctx.check(diag.psi_centered.within(0.1, 0.15, 0.05), "BvM thresholds (mean 0.1, cov 0.15, KS 0.05)");
  ctx.check(control.within(0.05, 0.075, 0.025), "Gaussian control at half tolerance");
}

void cmd_coverage(Context& ctx, ForwardModel& model, int jobs) {
  const auto& e = ctx.config.experiment;
  const std::size_t n = ctx.flags.n.value_or(e.n);
  const CoverageResult result = coverage_experiment(model, ctx.config.theta0(), n, e.replicates, e.alpha,
                                                    settings_from(ctx), derive_seed(ctx.config.seed, "coverage"), jobs);
  json records = json::array();
  for (const auto& r : result.records)
    records.push_back({{"replicate", r.replicate},
                       {"seed", r.seed},
                       {"posterior_mean", to_json_vector(r.mean)},
                       {"radius", r.radius},
                       {"distance", r.distance},
                       {"covered", r.covered},
                       {"acceptance_rate", r.acceptance_rate},
                       {"min_ess", r.min_ess},
                       {"warnings", r.warnings}});
  const auto band = binomial_band(e.replicates, 1.0 - e.alpha);
  ctx.emit("coverage", {{"N", n},
                        {"alpha", e.alpha},
                        {"replicates", e.replicates},
                        {"coverage_rate", result.coverage_rate},
                        {"acceptance_band_99", {band.first, band.second}},
                        {"records", records}});
  const int covered = static_cast<int>(std::lround(result.coverage_rate * e.replicates));
  ctx.check(covered >= band.first && covered <= band.second, "coverage inside the binomial 99% band");
}

void cmd_rate(Context& ctx, ForwardModel& model, int jobs) {
  const auto& e = ctx.config.experiment;
  const RateResult result = rate_experiment(model, ctx.config.theta0(), e.n_grid, e.replicates,
                                            settings_from(ctx), derive_seed(ctx.config.seed, "rate"), jobs);
  ctx.emit("rate", {{"N_grid", result.n_grid},
                    {"replicates", e.replicates},
                    {"rmse", result.rmse},
                    {"rmse_se", result.rmse_se},
                    {"posterior_cov_gap", result.mean_cov_gap},
                    {"loglog_slope", result.loglog_slope}});
  ctx.check(result.loglog_slope >= -0.65 && result.loglog_slope <= -0.35, "RMSE slope in [-0.65, -0.35]");
}

void cmd_stability(Context& ctx, ForwardModel& model) {
  const int pairs = ctx.flags.pairs.value_or(100);
  if (pairs < 1) throw ConfigError("--pairs must be >= 1");
  const std::uint64_t seed = derive_seed(ctx.config.seed, "stability");
  // Pairs are prefix-stable, so the doubled run contains the first one.
  const StabilityReport doubled = stability_probe(model, 2 * pairs, seed);
  double max_first = 0.0;
  int flagged_first = 0;
  double min_gap_first = std::numeric_limits<double>::infinity();
  for (int p = 0; p < pairs; ++p) {
    max_first = std::max(max_first, doubled.pairs[p].ratio);
    min_gap_first = std::min(min_gap_first, doubled.pairs[p].data_distance);
    flagged_first += doubled.pairs[p].injectivity_flag ? 1 : 0;
  }
  ctx.emit("stability", {{"pairs", pairs},
                         {"max_ratio", max_first},
                         {"min_G_gap", min_gap_first},
                         {"injectivity_flags", flagged_first},
                         {"doubled_pairs", 2 * pairs},
                         {"doubled_max_ratio", doubled.max_ratio},
                         {"doubled_injectivity_flags", doubled.flagged},
                         {"seed", seed}});
  ctx.check(flagged_first == 0, "no injectivity flags");
  ctx.check(doubled.max_ratio <= 2.0 * max_first, "max ratio stable within factor 2 under doubling");
}

void cmd_delta(Context& ctx, ForwardModel& model) {
  const double delta = electrode_gap_stat(model.electrodes());
  const StabilityReport probe = stability_probe(model, 20, derive_seed(ctx.config.seed, "stability"));
  ctx.out << format_double(delta) << '\n';
  ctx.out << "injectivity_flags " << probe.flagged << '\n';
  const fs::path p = ctx.out_dir / "delta.json";
  write_text(p, json{{"delta", delta},
                     {"snap_error", model.electrodes().snap_error},
                     {"probe_pairs", 20},
                     {"injectivity_flags", probe.flagged},
                     {"max_ratio", probe.max_ratio}}
                    .dump(2) + "\n");
  ctx.artifacts.push_back(p.string());
  ctx.check(probe.flagged == 0, "no injectivity flags in the 20-pair probe");
}

void cmd_mesh(Context& ctx, ForwardModel& model) {
  const fs::path dir = ctx.flags.out.empty() ? ctx.out_dir / "mesh" : fs::path(ctx.flags.out);
  write_mesh_csv(model.mesh(), dir);
  ctx.artifacts.push_back((dir / "vertices.csv").string());
  ctx.artifacts.push_back((dir / "triangles.csv").string());
  ctx.out << model.mesh().id() << '\n';
}

int error_line(std::ostream& err, const char* kind, const std::string& message, int code) {
  err << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << std::endl;
  return code;
}

}  // namespace

int resolve_jobs(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("EIT_JOBS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int run(const std::string& subcommand, const ExperimentConfig& config, const RunFlags& flags,
        std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  try {
    const auto& names = subcommands();
    if (std::find(names.begin(), names.end(), subcommand) == names.end())
      throw ConfigError("unknown subcommand '" + subcommand + "'");
    config.validate();
    Context ctx{config, flags, out, fs::path(config.out_dir), json::object(), {}, false};
    fs::create_directories(ctx.out_dir);
    const int jobs = resolve_jobs(flags.jobs);

    ForwardModel model = config.build_model();
    if (subcommand == "forward") cmd_forward(ctx, model);
    else if (subcommand == "simulate") cmd_simulate(ctx, model);
    else if (subcommand == "mcmc") cmd_mcmc(ctx, model);
    else if (subcommand == "bvm") cmd_bvm(ctx, model);
    else if (subcommand == "coverage") cmd_coverage(ctx, model, jobs);
    else if (subcommand == "rate") cmd_rate(ctx, model, jobs);
    else if (subcommand == "stability") cmd_stability(ctx, model);
    else if (subcommand == "delta") cmd_delta(ctx, model);
    else cmd_mesh(ctx, model);

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json manifest = ctx.manifest;
    manifest["tool"] = "eit";
    manifest["version"] = kVersion;
    manifest["subcommand"] = subcommand;
    manifest["config"] = json::parse(to_json(config));
    manifest["config_hash"] = config_hash(config);
    manifest["seed"] = config.seed;
    manifest["jobs"] = jobs;
    manifest["mesh"] = {{"id", model.mesh().id()},
                        {"target_h", model.mesh().target_h},
                        {"vertices", model.mesh().vertex_count()},
                        {"triangles", model.mesh().triangle_count()},
                        {"boundary_vertices", model.mesh().boundary.size()}};
    manifest["electrode_snap_error"] = model.electrodes().snap_error;
    json flag_json = json::object();
    if (flags.theta) flag_json["theta"] = *flags.theta;
    if (flags.n) flag_json["n"] = *flags.n;
    if (flags.seed) flag_json["seed"] = *flags.seed;
    if (flags.iters) flag_json["iters"] = *flags.iters;
    if (flags.burnin) flag_json["burnin"] = *flags.burnin;
    if (flags.thin) flag_json["thin"] = *flags.thin;
    if (flags.pairs) flag_json["pairs"] = *flags.pairs;
    if (!flags.data.empty()) flag_json["data"] = flags.data;
    flag_json["check"] = flags.check;
    manifest["flags"] = flag_json;
    manifest["artifacts"] = ctx.artifacts;
    manifest["wall_time_seconds"] = wall;
    write_text(ctx.out_dir / "manifest.json", manifest.dump(2) + "\n");
    if (ctx.check_failed) return error_line(err, "check_failed", "acceptance check failed", kCheckFailed);
    return kSuccess;
  } catch (const ConfigError& e) {
    return error_line(err, "config", e.what(), kConfigError);
  } catch (const NumericalError& e) {
    return error_line(err, "numerical", e.what(), kNumericalError);
  } catch (const std::exception& e) {
    return error_line(err, "failure", e.what(), kFailure);
  }
}

}  // namespace eit::cli
