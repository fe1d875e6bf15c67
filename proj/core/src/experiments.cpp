#include "eit/experiments.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "eit/errors.hpp"
#include "eit/random.hpp"

namespace eit {

PosteriorRun run_posterior(ForwardModel& model, const SufficientStatistics& stats,
                           const PosteriorSettings& settings, std::uint64_t seed) {
  const ParameterBox& box = model.box();
  const int d = box.dimension;
  const Theta centre = Theta::Constant(d, 0.5 * (box.gamma_min + box.gamma_max));

  RwmOptions options;
  options.iters = settings.iters;
  options.burnin = settings.burnin;
  options.thin = settings.thin;
  options.adapt = settings.adapt;
  options.seed = derive_seed(seed, "rwm");

  PosteriorRun run;
  run.start = centre;
  bool shaped = false;
  if (settings.proposal == ProposalKind::Laplace && stats.n > 0) {
    try {
      const ModeEstimate mode = find_mode(model, stats, settings.prior, centre);
      Eigen::LLT<Eigen::MatrixXd> llt(mode.hessian.inverse() * (2.38 * 2.38 / d));
      if (llt.info() == Eigen::Success) {
        options.proposal_factor = llt.matrixL();
        run.start = mode.theta;
        shaped = true;
      }
    } catch (const NumericalError&) {
      shaped = false;
    }
  }
  if (!shaped) {
    const Eigen::VectorXd steps = settings.steps.size() == d
                                      ? settings.steps
                                      : Eigen::VectorXd::Constant(d, 0.1 * (box.gamma_max - box.gamma_min));
    options.with_steps(steps);
  }

  auto density = [&](const Eigen::VectorXd& theta) {
    return log_posterior(model, theta, stats, settings.prior);
  };
  run.chain = rwm_sample(density, run.start, options);
  run.mean = posterior_mean(run.chain);
  return run;
}

void parallel_for_models(const ForwardModel& prototype, int count, int jobs,
                         const std::function<void(ForwardModel&, int)>& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    ForwardModel model(prototype);
    for (int i = 0; i < count; ++i) fn(model, i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      ForwardModel model(prototype);
      for (int i = next++; i < count; i = next++) {
        try {
          fn(model, i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

CoverageResult coverage_experiment(const ForwardModel& prototype, const Theta& theta0,
                                   std::size_t n_data, int replicates, double alpha,
                                   const PosteriorSettings& settings, std::uint64_t seed,
                                   int jobs) {
  prototype.box().require_interior(theta0, "coverage_experiment");
  if (replicates < 1) throw std::invalid_argument("coverage_experiment: replicates must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("coverage_experiment: alpha must lie in (0, 1)");

  CoverageResult result;
  result.records.resize(replicates);
  parallel_for_models(prototype, replicates, jobs, [&](ForwardModel& model, int r) {
    const std::uint64_t rep_seed = derive_seed(seed, "replicate", static_cast<std::uint64_t>(r));
    const Dataset data = simulate(model, theta0, n_data, derive_seed(rep_seed, "simulate"));
    const SufficientStatistics stats = SufficientStatistics::from(data);
    const PosteriorRun run = run_posterior(model, stats, settings, derive_seed(rep_seed, "mcmc"));
    CoverageRecord& rec = result.records[r];
    rec.replicate = r;
    rec.seed = rep_seed;
    rec.mean = run.mean;
    rec.radius = credible_radius(run.chain, run.mean, alpha);
    rec.distance = (theta0 - run.mean).norm();
    rec.covered = rec.distance < rec.radius;
    rec.acceptance_rate = run.chain.acceptance_rate;
    rec.min_ess = run.chain.min_ess();
    rec.warnings = run.chain.warnings;
  });
  int covered = 0;
  for (const auto& rec : result.records) covered += rec.covered ? 1 : 0;
  result.coverage_rate = static_cast<double>(covered) / replicates;
  return result;
}

RateResult rate_experiment(const ForwardModel& prototype, const Theta& theta0,
                           const std::vector<std::size_t>& n_grid, int replicates,
                           const PosteriorSettings& settings, std::uint64_t seed, int jobs) {
  prototype.box().require_interior(theta0, "rate_experiment");
  if (n_grid.size() < 3) throw std::invalid_argument("rate_experiment: need at least 3 sample sizes");
  for (std::size_t g = 1; g < n_grid.size(); ++g)
    if (n_grid[g] <= n_grid[g - 1])
      throw std::invalid_argument("rate_experiment: N grid must be strictly increasing");
  if (n_grid.front() < 1) throw std::invalid_argument("rate_experiment: N must be >= 1");
  if (replicates < 1) throw std::invalid_argument("rate_experiment: replicates must be >= 1");

  ForwardModel probe(prototype);
  const InformationMatrix info = information_matrix(probe, theta0);
  require_well_conditioned(info, "rate_experiment");
  const Eigen::MatrixXd inverse_info = info.matrix.inverse();
  const double inverse_norm = spectral_norm(inverse_info);

  const int grid = static_cast<int>(n_grid.size());
  RateResult result;
  result.n_grid = n_grid;
  result.records.resize(static_cast<std::size_t>(grid) * replicates);
  parallel_for_models(prototype, replicates, jobs, [&](ForwardModel& model, int r) {
    const std::uint64_t rep_seed = derive_seed(seed, "replicate", static_cast<std::uint64_t>(r));
    const Dataset full = simulate(model, theta0, n_grid.back(), derive_seed(rep_seed, "simulate"));
    for (int g = 0; g < grid; ++g) {
      const SufficientStatistics stats = SufficientStatistics::from(full.head(n_grid[g]));
      const PosteriorRun run = run_posterior(
          model, stats, settings, derive_seed(rep_seed, "mcmc", static_cast<std::uint64_t>(g)));
      RateRecord& rec = result.records[static_cast<std::size_t>(g) * replicates + r];
      rec.n_data = n_grid[g];
      rec.replicate = r;
      rec.mean = run.mean;
      rec.squared_error = (run.mean - theta0).squaredNorm();
      const Eigen::MatrixXd centered = run.chain.samples.rowwise() - run.mean.transpose();
      const Eigen::MatrixXd cov =
          centered.transpose() * centered / std::max(1.0, run.chain.samples.rows() - 1.0);
      rec.cov_gap = spectral_norm(static_cast<double>(n_grid[g]) * cov - inverse_info) / inverse_norm;
    }
  });

  std::vector<double> xs;
  for (int g = 0; g < grid; ++g) {
    double sum = 0.0;
    double sum_sq = 0.0;
    double gap = 0.0;
    for (int r = 0; r < replicates; ++r) {
      const RateRecord& rec = result.records[static_cast<std::size_t>(g) * replicates + r];
      sum += rec.squared_error;
      sum_sq += rec.squared_error * rec.squared_error;
      gap += rec.cov_gap;
    }
    const double mse = sum / replicates;
    const double rmse = std::sqrt(mse);
    const double var = replicates > 1 ? (sum_sq / replicates - mse * mse) * replicates / (replicates - 1.0) : 0.0;
    // delta method: se(sqrt(m)) = se(m) / (2 sqrt(m))
    const double se_mse = std::sqrt(std::max(0.0, var) / replicates);
    result.rmse.push_back(rmse);
    result.rmse_se.push_back(rmse > 0.0 ? se_mse / (2.0 * rmse) : 0.0);
    result.mean_cov_gap.push_back(gap / replicates);
    xs.push_back(static_cast<double>(n_grid[g]));
  }
  result.loglog_slope = loglog_slope(xs, result.rmse);
  return result;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 matching points");
  double mx = 0.0;
  double my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw std::invalid_argument("loglog_slope: values must be positive");
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace eit
