#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "eit/forward.hpp"

namespace eit {

// Observations Z_N = ((Y_i, X_i)). Designs are stored 0-based; files and
// reports use electrode numbers 1..M.
struct Dataset {
  Eigen::MatrixXd y;        // N x M
  std::vector<int> x;       // N entries in [0, M)
  Theta theta_true;         // bookkeeping only, never read by inference
  std::uint64_t seed = 0;

  std::size_t size() const { return x.size(); }
  int electrodes() const { return static_cast<int>(y.cols()); }
  Dataset head(std::size_t n) const;
  static Dataset concatenate(const Dataset& a, const Dataset& b);
};

// X_i uniform on the electrodes, Y_i = G_theta(X_i) + eps_i, eps_i ~ N(0, I_M).
// Observation i uses its own substream, so simulate(theta, n, seed) is a
// prefix of simulate(theta, N, seed) for n < N.
Dataset simulate(ForwardModel& model, const Theta& theta, std::size_t n, std::uint64_t seed);
Dataset simulate(const Eigen::MatrixXd& G, std::size_t n, std::uint64_t seed);

// -1/2 sum_i |G(X_i) - Y_i|^2.
double log_likelihood(const Eigen::MatrixXd& G, const Dataset& data);
double log_likelihood(ForwardModel& model, const Theta& theta, const Dataset& data);

// Per-electrode counts and response sums; the log-likelihood depends on the
// data only through these.
struct SufficientStatistics {
  Eigen::VectorXd counts;    // M
  Eigen::MatrixXd sums;      // M x M, row x = sum of Y_i with X_i = x
  double sum_squares = 0.0;  // sum_i |Y_i|^2
  std::size_t n = 0;

  static SufficientStatistics from(const Dataset& data);
  double log_likelihood(const Eigen::MatrixXd& G) const;
  // Gradient of the log-likelihood and its Gauss-Newton Hessian at the
  // point where G and S were evaluated.
  Eigen::VectorXd gradient(const Eigen::MatrixXd& G, const SensitivityTensor& s) const;
  Eigen::MatrixXd gauss_newton(const SensitivityTensor& s) const;
};

// Component a: <y - G(x), S(x, ., a)>.
Eigen::VectorXd score_vector(const Eigen::MatrixXd& G, const SensitivityTensor& s,
                             const Eigen::VectorXd& y, int x);
Eigen::VectorXd score_vector(ForwardModel& model, const Theta& theta, const Eigen::VectorXd& y,
                             int x);

struct InformationMatrix {
  Eigen::MatrixXd matrix;
  Theta theta;
  double min_eigenvalue = 0.0;
};

// (1/M) sum_{i,j} S(i, j, a) S(i, j, b).
InformationMatrix information_matrix(const SensitivityTensor& s);
InformationMatrix information_matrix(ForwardModel& model, const Theta& theta);

// Monte Carlo estimate of E[score score^T] over simulated observations.
Eigen::MatrixXd empirical_information(ForwardModel& model, const Theta& theta, std::size_t n,
                                      std::uint64_t seed);

// theta0 + N_theta0^{-1} (1/N) sum_i score(theta0, Y_i, X_i).
Theta recentering(ForwardModel& model, const Theta& theta0, const Dataset& data);

// Throws NumericalError when the smallest eigenvalue is <= 1e-12.
void require_well_conditioned(const InformationMatrix& info, const char* who);

}  // namespace eit
