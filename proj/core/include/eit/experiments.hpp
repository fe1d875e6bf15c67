#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eit/inference.hpp"

namespace eit {

enum class ProposalKind {
  Laplace,  // Gauss-Newton mode + scaled inverse Hessian, then RWM
  Fixed,    // per-coordinate steps, chain started at the centre of Theta
};

struct PosteriorSettings {
  PriorSpec prior;
  int iters = 10000;
  int burnin = 2000;
  int thin = 1;
  bool adapt = true;
  ProposalKind proposal = ProposalKind::Laplace;
  Eigen::VectorXd steps;  // Fixed only; one entry per coordinate
};

struct PosteriorRun {
  Chain chain;
  Theta mean;
  Theta start;
};

PosteriorRun run_posterior(ForwardModel& model, const SufficientStatistics& stats,
                           const PosteriorSettings& settings, std::uint64_t seed);

// Runs fn(worker, item) for item in [0, count) on `jobs` threads. Each worker
// gets its own copy of the model; results must be written by item index.
void parallel_for_models(const ForwardModel& prototype, int count, int jobs,
                         const std::function<void(ForwardModel&, int)>& fn);

struct CoverageRecord {
  int replicate = 0;
  std::uint64_t seed = 0;
  Theta mean;
  double radius = 0.0;
  double distance = 0.0;  // |theta0 - posterior mean|
  bool covered = false;
  double acceptance_rate = 0.0;
  double min_ess = 0.0;
  std::vector<std::string> warnings;
};

struct CoverageResult {
  double coverage_rate = 0.0;
  std::vector<CoverageRecord> records;
};

CoverageResult coverage_experiment(const ForwardModel& prototype, const Theta& theta0,
                                   std::size_t n_data, int replicates, double alpha,
                                   const PosteriorSettings& settings, std::uint64_t seed,
                                   int jobs);

struct RateRecord {
  std::size_t n_data = 0;
  int replicate = 0;
  Theta mean;
  double squared_error = 0.0;
  double cov_gap = 0.0;  // |N Cov_post - N_theta0^{-1}| / |N_theta0^{-1}|, spectral
};

struct RateResult {
  std::vector<std::size_t> n_grid;
  std::vector<double> rmse;
  std::vector<double> rmse_se;
  std::vector<double> mean_cov_gap;
  double loglog_slope = 0.0;
  std::vector<RateRecord> records;
};

// Replicate r simulates one dataset of size max(n_grid) and uses its
// prefixes, so the N values are compared on nested data.
RateResult rate_experiment(const ForwardModel& prototype, const Theta& theta0,
                           const std::vector<std::size_t>& n_grid, int replicates,
                           const PosteriorSettings& settings, std::uint64_t seed, int jobs);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace eit
