#include "eit/inference.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "eit/errors.hpp"
#include "eit/random.hpp"

namespace eit {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void PriorSpec::validate() const {
  if (kind == Kind::TruncatedGaussian) {
    if (mean.size() != support.dimension || sd.size() != support.dimension)
      throw std::invalid_argument("prior: mean and sd must have dimension D");
    if ((sd.array() <= 0.0).any()) throw std::invalid_argument("prior: sd must be > 0");
  }
}

double PriorSpec::log_density(const Theta& theta) const {
  if (!support.contains(theta)) return kNegInf;
  if (kind == Kind::Uniform)
    return -support.dimension * std::log(support.gamma_max - support.gamma_min);
  return -0.5 * ((theta - mean).array() / sd.array()).square().sum();
}

double log_posterior(ForwardModel& model, const Theta& theta, const SufficientStatistics& stats,
                     const PriorSpec& prior) {
  const double log_prior = prior.log_density(theta);
  if (log_prior == kNegInf || !model.box().contains(theta)) return kNegInf;
  return stats.log_likelihood(model.forward_matrix(theta).G) + log_prior;
}

double log_posterior(ForwardModel& model, const Theta& theta, const Dataset& data,
                     const PriorSpec& prior) {
  const double log_prior = prior.log_density(theta);
  if (log_prior == kNegInf || !model.box().contains(theta)) return kNegInf;
  return log_likelihood(model.forward_matrix(theta).G, data) + log_prior;
}

RwmOptions& RwmOptions::with_steps(const Eigen::VectorXd& steps) {
  proposal_factor = steps.asDiagonal();
  scale = 1.0;
  return *this;
}

RwmOptions& RwmOptions::with_step(double step, int dimension) {
  return with_steps(Eigen::VectorXd::Constant(dimension, step));
}

Chain rwm_sample(const LogDensity& log_density, const Eigen::VectorXd& init,
                 const RwmOptions& options) {
  if (options.burnin < 0 || options.iters <= options.burnin)
    throw std::invalid_argument("rwm_sample: need iters > burnin >= 0");
  if (options.thin < 1) throw std::invalid_argument("rwm_sample: thin must be >= 1");
  const auto d = init.size();
  Eigen::MatrixXd factor = options.proposal_factor.size() == 0
                               ? Eigen::MatrixXd::Identity(d, d)
                               : options.proposal_factor;
  if (factor.rows() != d || factor.cols() != d)
    throw std::invalid_argument("rwm_sample: proposal factor has wrong shape");

  Eigen::VectorXd current = init;
  double current_lp = log_density(current);
  if (!std::isfinite(current_lp))
    throw std::invalid_argument("rwm_sample: init has zero density (outside Theta?)");

  Engine engine = make_engine(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  const int kept = (options.iters - options.burnin + options.thin - 1) / options.thin;
  Chain chain;
  chain.seed = options.seed;
  chain.samples.resize(kept, d);
  chain.log_posts.reserve(kept);

  double log_scale = std::log(options.scale);
  long accepted = 0;
  int row = 0;
  Eigen::VectorXd z(d);
  for (int t = 0; t < options.iters; ++t) {
    for (Eigen::Index k = 0; k < d; ++k) z[k] = normal(engine);
    const Eigen::VectorXd proposal = current + std::exp(log_scale) * (factor * z);
    const double proposal_lp = log_density(proposal);
    const double log_u = std::log(uniform(engine));
    const bool accept = proposal_lp != kNegInf && log_u < proposal_lp - current_lp;
    if (accept) {
      current = proposal;
      current_lp = proposal_lp;
    }
    if (t < options.burnin) {
      if (options.adapt) {
        const double gain = std::pow(t + 1.0, -0.6);
        log_scale += gain * ((accept ? 1.0 : 0.0) - options.target_acceptance);
      }
      continue;
    }
    if (accept) ++accepted;
    if ((t - options.burnin) % options.thin == 0) {
      chain.samples.row(row++) = current.transpose();
      chain.log_posts.push_back(current_lp);
    }
  }
  chain.final_scale = std::exp(log_scale);
  chain.acceptance_rate =
      static_cast<double>(accepted) / static_cast<double>(options.iters - options.burnin);
  chain.ess.resize(d);
  for (Eigen::Index k = 0; k < d; ++k)
    chain.ess[k] = effective_sample_size(chain.samples.col(k));
  if (chain.acceptance_rate < 0.1 || chain.acceptance_rate > 0.5)
    chain.warnings.push_back("acceptance rate " + std::to_string(chain.acceptance_rate) +
                             " outside [0.1, 0.5]");
  return chain;
}

double effective_sample_size(const Eigen::VectorXd& series) {
  const auto n = series.size();
  if (n < 2) return static_cast<double>(n);
  const Eigen::VectorXd centered = series.array() - series.mean();
  const double c0 = centered.squaredNorm() / static_cast<double>(n);
  if (!(c0 > 0.0)) return 1.0;
  auto rho = [&](Eigen::Index lag) {
    return centered.head(n - lag).dot(centered.tail(n - lag)) / (static_cast<double>(n) * c0);
  };
  // Sum of positive, monotonically decreasing pair sums Gamma_m = rho_2m + rho_2m+1.
  double tau = -1.0;
  double previous = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    double gamma = rho(2 * m) + rho(2 * m + 1);
    if (gamma <= 0.0) break;
    gamma = std::min(gamma, previous);
    tau += 2.0 * gamma;
    previous = gamma;
  }
  const double ess = static_cast<double>(n) / std::max(tau, 1e-12);
  return std::clamp(ess, 1.0, static_cast<double>(n));
}

Eigen::VectorXd posterior_mean(const Eigen::MatrixXd& samples) {
  if (samples.rows() == 0) throw std::invalid_argument("posterior_mean: empty chain");
  return samples.colwise().mean().transpose();
}

Eigen::VectorXd posterior_mean(const Chain& chain) { return posterior_mean(chain.samples); }

double credible_radius(const Eigen::MatrixXd& samples, const Eigen::VectorXd& center,
                       double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("credible_radius: alpha must lie in (0, 1)");
  const auto n = samples.rows();
  if (n == 0) throw std::invalid_argument("credible_radius: empty chain");
  std::vector<double> distances(static_cast<std::size_t>(n));
  for (Eigen::Index s = 0; s < n; ++s)
    distances[s] = (samples.row(s).transpose() - center).norm();
  std::sort(distances.begin(), distances.end());
  auto rank = static_cast<Eigen::Index>(std::ceil((1.0 - alpha) * static_cast<double>(n) - 1e-9));
  rank = std::clamp<Eigen::Index>(rank, 1, n);
  return distances[rank - 1];
}

double credible_radius(const Chain& chain, const Eigen::VectorXd& center, double alpha) {
  return credible_radius(chain.samples, center, alpha);
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_standard_normal(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("ks_standard_normal: no values");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = standard_normal_cdf(values[i]);
    stat = std::max({stat, (i + 1) / n - f, f - i / n});
  }
  return stat;
}

bool BvmReport::within(double mean_tol, double cov_tol, double ks_tol) const {
  if (whitened_mean.cwiseAbs().maxCoeff() > mean_tol) return false;
  if (whitened_cov_spectral_gap > cov_tol) return false;
  return std::all_of(ks_stats.begin(), ks_stats.end(), [&](double k) { return k <= ks_tol; });
}

namespace {

double gridded_tv(const Eigen::MatrixXd& w) {
  constexpr double lo = -4.0;
  constexpr double width = 0.5;
  constexpr int bins = 16;
  const auto d = w.cols();
  const int cells = d == 1 ? bins : bins * bins;
  std::vector<double> empirical(cells + 1, 0.0);
  for (Eigen::Index s = 0; s < w.rows(); ++s) {
    int cell = 0;
    bool inside = true;
    for (Eigen::Index k = 0; k < d; ++k) {
      const int b = static_cast<int>(std::floor((w(s, k) - lo) / width));
      if (b < 0 || b >= bins) inside = false;
      cell = cell * bins + b;
    }
    empirical[inside ? cell : cells] += 1.0 / static_cast<double>(w.rows());
  }
  std::vector<double> edge_mass(bins);
  for (int b = 0; b < bins; ++b)
    edge_mass[b] = standard_normal_cdf(lo + (b + 1) * width) - standard_normal_cdf(lo + b * width);
  double tv = 0.0;
  double inside_mass = 0.0;
  for (int c = 0; c < cells; ++c) {
    const double p = d == 1 ? edge_mass[c] : edge_mass[c / bins] * edge_mass[c % bins];
    inside_mass += p;
    tv += std::abs(empirical[c] - p);
  }
  tv += std::abs(empirical[cells] - (1.0 - inside_mass));
  return 0.5 * tv;
}

}  // namespace

BvmReport bvm_report(const Eigen::MatrixXd& samples, const Eigen::VectorXd& center,
                     const InformationMatrix& info, std::size_t n_data, double n_used) {
  require_well_conditioned(info, "bvm_diagnostics");
  if (samples.rows() == 0) throw std::invalid_argument("bvm_diagnostics: empty chain");
  const Eigen::MatrixXd lower = info.matrix.llt().matrixL();
  const double root_n = std::sqrt(static_cast<double>(n_data));
  const Eigen::MatrixXd w =
      (root_n * (samples.rowwise() - center.transpose()) * lower);  // rows: sqrt(N) L^T (theta - c)
  BvmReport report;
  report.n_used = n_used;
  report.whitened_mean = w.colwise().mean().transpose();
  const Eigen::MatrixXd centered = w.rowwise() - report.whitened_mean.transpose();
  const double denom = std::max<double>(1.0, static_cast<double>(w.rows() - 1));
  const Eigen::MatrixXd cov = centered.transpose() * centered / denom;
  const Eigen::MatrixXd gap = cov - Eigen::MatrixXd::Identity(w.cols(), w.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gap, Eigen::EigenvaluesOnly);
  report.whitened_cov_spectral_gap = eig.eigenvalues().cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < w.cols(); ++k) {
    std::vector<double> column(w.col(k).data(), w.col(k).data() + w.rows());
    report.ks_stats.push_back(ks_standard_normal(std::move(column)));
  }
  report.tv_proxy = *std::max_element(report.ks_stats.begin(), report.ks_stats.end());
  if (w.cols() <= 2) report.histogram_tv = gridded_tv(w);
  return report;
}

BvmDiagnostics bvm_diagnostics(const Chain& chain, const Theta& theta0, const Theta& psi,
                               const InformationMatrix& info, std::size_t n_data) {
  BvmDiagnostics out;
  const double n_used = chain.ess.size() ? chain.min_ess() : chain.size();
  out.psi_centered = bvm_report(chain.samples, psi, info, n_data, n_used);
  out.mean_centered = bvm_report(chain.samples, posterior_mean(chain), info, n_data, n_used);
  const Eigen::MatrixXd lower = info.matrix.llt().matrixL();
  out.whitened_truth_offset =
      std::sqrt(static_cast<double>(n_data)) * lower.transpose() * (psi - theta0);
  return out;
}

ModeEstimate find_mode(ForwardModel& model, const SufficientStatistics& stats,
                       const PriorSpec& prior, const Theta& start, int max_iterations) {
  const ParameterBox& box = model.box();
  const double margin = 1e-6 * (box.gamma_max - box.gamma_min);
  auto project = [&](Theta t) {
    for (Eigen::Index k = 0; k < t.size(); ++k)
      t[k] = std::clamp(t[k], box.gamma_min + margin, box.gamma_max - margin);
    return t;
  };
  auto prior_terms = [&](const Theta& t, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
    if (prior.kind != PriorSpec::Kind::TruncatedGaussian) return;
    const Eigen::VectorXd precision = prior.sd.array().square().inverse();
    grad -= precision.cwiseProduct(t - prior.mean);
    hess.diagonal() += precision;
  };

  ModeEstimate out;
  Theta theta = project(start);
  ForwardEvaluation eval = model.evaluate(theta, true);
  double lp = stats.log_likelihood(eval.matrix.G) + prior.log_density(theta);
  for (int it = 0; it < max_iterations; ++it) {
    out.iterations = it + 1;
    Eigen::VectorXd grad = stats.gradient(eval.matrix.G, eval.sensitivity);
    Eigen::MatrixXd hess = stats.gauss_newton(eval.sensitivity);
    prior_terms(theta, grad, hess);
    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    if (llt.info() != Eigen::Success) throw NumericalError("find_mode: Hessian not positive definite");
    const Eigen::VectorXd step = llt.solve(grad);
    double t = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 30; ++halving, t *= 0.5) {
      const Theta candidate = project(theta + t * step);
      ForwardEvaluation next = model.evaluate(candidate, true);
      const double next_lp = stats.log_likelihood(next.matrix.G) + prior.log_density(candidate);
      if (next_lp >= lp) {
        moved = (candidate - theta).cwiseAbs().maxCoeff() > 1e-10;
        theta = candidate;
        eval = std::move(next);
        lp = next_lp;
        break;
      }
    }
    if (!moved || (t * step).cwiseAbs().maxCoeff() < 1e-9) break;
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
  Eigen::MatrixXd hess = stats.gauss_newton(eval.sensitivity);
  prior_terms(theta, grad, hess);
  out.theta = theta;
  out.hessian = hess;
  return out;
}

}  // namespace eit
