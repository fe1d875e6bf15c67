#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eit/forward.hpp"
#include "eit/statmodel.hpp"

namespace eit {

struct PriorSpec {
  enum class Kind { Uniform, TruncatedGaussian };
  Kind kind = Kind::Uniform;
  Eigen::VectorXd mean;  // truncated Gaussian only
  Eigen::VectorXd sd;
  ParameterBox support;

  // Unnormalized log density; -inf outside the support.
  double log_density(const Theta& theta) const;
  void validate() const;
};

// l_N(theta | Z) + log pi(theta), -inf outside Theta.
double log_posterior(ForwardModel& model, const Theta& theta, const SufficientStatistics& stats,
                     const PriorSpec& prior);
double log_posterior(ForwardModel& model, const Theta& theta, const Dataset& data,
                     const PriorSpec& prior);

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

struct RwmOptions {
  int iters = 10000;   // total, including burn-in
  int burnin = 2000;
  int thin = 1;
  // Proposal theta' = theta + scale * L z with z ~ N(0, I). L defaults to
  // the identity; use with_steps() for per-coordinate step sizes.
  Eigen::MatrixXd proposal_factor;
  double scale = 1.0;
  bool adapt = true;   // Robbins-Monro on log(scale), burn-in only
  double target_acceptance = 0.234;
  std::uint64_t seed = 0;

  RwmOptions& with_steps(const Eigen::VectorXd& steps);
  RwmOptions& with_step(double step, int dimension);
};

struct Chain {
  Eigen::MatrixXd samples;        // kept draws, one per row
  std::vector<double> log_posts;
  double acceptance_rate = 0.0;   // post burn-in
  Eigen::VectorXd ess;            // per coordinate
  double final_scale = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  int size() const { return static_cast<int>(samples.rows()); }
  int dimension() const { return static_cast<int>(samples.cols()); }
  double min_ess() const { return ess.size() ? ess.minCoeff() : 0.0; }
};

Chain rwm_sample(const LogDensity& log_density, const Eigen::VectorXd& init,
                 const RwmOptions& options);

// Initial-positive-sequence estimate (Geyer); clamped to [1, n].
double effective_sample_size(const Eigen::VectorXd& series);

Eigen::VectorXd posterior_mean(const Chain& chain);
Eigen::VectorXd posterior_mean(const Eigen::MatrixXd& samples);

// Empirical (1 - alpha) quantile of |theta_s - center|.
double credible_radius(const Chain& chain, const Eigen::VectorXd& center, double alpha);
double credible_radius(const Eigen::MatrixXd& samples, const Eigen::VectorXd& center, double alpha);

// sup_x |F_n(x) - Phi(x)|.
double ks_standard_normal(std::vector<double> values);
double standard_normal_cdf(double x);

struct BvmReport {
  Eigen::VectorXd whitened_mean;
  double whitened_cov_spectral_gap = 0.0;
  std::vector<double> ks_stats;
  double tv_proxy = 0.0;
  double n_used = 0.0;
  double histogram_tv = -1.0;  // gridded estimate, D <= 2 only; -1 otherwise

  bool within(double mean_tol, double cov_tol, double ks_tol) const;
};

// Whitens w_s = sqrt(N) L^T (theta_s - center) with N_theta0 = L L^T and
// compares the draws with N(0, I).
BvmReport bvm_report(const Eigen::MatrixXd& samples, const Eigen::VectorXd& center,
                     const InformationMatrix& info, std::size_t n_data, double n_used);

struct BvmDiagnostics {
  BvmReport psi_centered;     // centring of the limit theorem
  BvmReport mean_centered;    // centring at the posterior mean
  Eigen::VectorXd whitened_truth_offset;  // sqrt(N) L^T (Psi - theta0)
};

BvmDiagnostics bvm_diagnostics(const Chain& chain, const Theta& theta0, const Theta& psi,
                               const InformationMatrix& info, std::size_t n_data);

struct ModeEstimate {
  Theta theta;
  Eigen::MatrixXd hessian;  // Gauss-Newton, includes the data size
  int iterations = 0;
};

// Projected Gauss-Newton ascent on the log posterior from `start`. Used to
// start chains and to shape the proposal; never changes the target.
ModeEstimate find_mode(ForwardModel& model, const SufficientStatistics& stats,
                       const PriorSpec& prior, const Theta& start, int max_iterations = 30);

}  // namespace eit
