#include <cmath>

#include "doctest.h"
#include <Eigen/LU>

#include "eit/statmodel.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace eit;
using test::theta_of;

TEST_CASE("simulate: empty and prefix-stable") {
  auto model = test::canonical_model(0.1);
  const Theta theta = theta_of({2.0, 1.5});
  const Dataset empty = simulate(model, theta, 0, 1);
  CHECK(empty.size() == 0);
  const Dataset big = simulate(model, theta, 200, 42);
  const Dataset small = simulate(model, theta, 50, 42);
  CHECK(big.head(50).y == small.y);
  CHECK(big.head(50).x == small.x);
  CHECK(simulate(model, theta, 200, 43).y != big.y);
  CHECK_THROWS(big.head(201));
  CHECK_THROWS(simulate(model, theta_of({5.0, 1.0}), 10, 1));
}

TEST_CASE("simulate: noise moments and design frequencies") {
  auto model = test::canonical_model(0.1);
  const Theta theta = theta_of({2.0, 1.5});
  const std::size_t n = 100000;
  const Eigen::MatrixXd g = model.forward_matrix(theta).G;
  const Dataset data = simulate(g, n, 2024);
  Eigen::MatrixXd residual(data.y.rows(), data.y.cols());
  for (std::size_t i = 0; i < n; ++i) residual.row(i) = data.y.row(i) - g.row(data.x[i]);
  for (int j = 0; j < 16; ++j) {
    const double mean = residual.col(j).mean();
    const double var = (residual.col(j).array() - mean).square().sum() / (n - 1);
    CHECK(std::abs(mean) <= 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) <= 0.05);
  }
  std::vector<double> counts(16, 0.0);
  for (int x : data.x) counts[x] += 1.0;
  const double expected = static_cast<double>(n) / 16;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(oracle::chi_square_upper_tail(chi2, 15) > 1e-3);
  // residual norms are chi-square with 16 degrees of freedom
  const double total = residual.squaredNorm();
  const double dof = 16.0 * n;
  CHECK(std::abs(total - dof) <= 5.0 * std::sqrt(2.0 * dof));
}

TEST_CASE("log likelihood") {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
  Dataset data;
  data.y = Eigen::MatrixXd::Zero(1, 2);
  data.y(0, 0) = 2.0;
  data.x = {0};
  CHECK(log_likelihood(g, data) == -2.0);
  CHECK(SufficientStatistics::from(data).log_likelihood(g) == doctest::Approx(-2.0));

  auto model = test::canonical_model(0.1);
  const Theta theta = theta_of({2.0, 1.5});
  const Eigen::MatrixXd gt = model.forward_matrix(theta).G;
  Dataset exact = simulate(gt, 20, 5);
  for (std::size_t i = 0; i < exact.size(); ++i) exact.y.row(i) = gt.row(exact.x[i]);
  CHECK(log_likelihood(gt, exact) == 0.0);

  const Dataset a = simulate(gt, 30, 6);
  const Dataset b = simulate(gt, 40, 7);
  const Dataset ab = Dataset::concatenate(a, b);
  const Eigen::MatrixXd other = model.forward_matrix(theta_of({1.0, 3.0})).G;
  CHECK(log_likelihood(other, ab) == doctest::Approx(log_likelihood(other, a) + log_likelihood(other, b)));
  CHECK(SufficientStatistics::from(ab).log_likelihood(other) ==
        doctest::Approx(log_likelihood(other, ab)).epsilon(1e-12));
}

TEST_CASE("score") {
  auto model = test::canonical_model(0.1);
  const Theta theta = theta_of({2.0, 1.5});
  const ForwardEvaluation eval = model.evaluate(theta, true);
  const Eigen::VectorXd fit = eval.matrix.row(3);
  CHECK(score_vector(eval.matrix.G, eval.sensitivity, fit, 3).norm() == 0.0);
  Eigen::VectorXd eps = Eigen::VectorXd::LinSpaced(16, -1.0, 1.0);
  const Eigen::VectorXd s1 = score_vector(eval.matrix.G, eval.sensitivity, fit + eps, 3);
  const Eigen::VectorXd s2 = score_vector(eval.matrix.G, eval.sensitivity, fit + 2.0 * eps, 3);
  CHECK((s2 - 2.0 * s1).norm() <= 1e-12 * s2.norm());
  CHECK_THROWS(score_vector(eval.matrix.G, eval.sensitivity, fit, 16));
  CHECK_THROWS(score_vector(model, theta_of({0.5, 1.5}), fit, 0));

  // sufficient-statistics gradient equals the sum of scores
  const Dataset data = simulate(eval.matrix.G, 500, 11);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
  for (std::size_t i = 0; i < data.size(); ++i)
    sum += score_vector(eval.matrix.G, eval.sensitivity, data.y.row(i).transpose(), data.x[i]);
  const Eigen::VectorXd grad = SufficientStatistics::from(data).gradient(eval.matrix.G, eval.sensitivity);
  CHECK((grad - sum).norm() <= 1e-10 * std::max(1.0, sum.norm()));
}

TEST_CASE("score has mean zero and information matches its covariance") {
  auto model = test::canonical_model(0.1);
  const Theta theta = theta_of({2.0, 1.5});
  const InformationMatrix info = information_matrix(model, theta);
  CHECK(info.min_eigenvalue > 0.0);
  CHECK((info.matrix - info.matrix.transpose()).norm() == 0.0);

  const std::size_t n = 100000;
  const ForwardEvaluation eval = model.evaluate(theta, true);
  const Dataset data = simulate(eval.matrix.G, n, 77);
  const Eigen::VectorXd mean =
      SufficientStatistics::from(data).gradient(eval.matrix.G, eval.sensitivity) / static_cast<double>(n);
  for (int a = 0; a < 2; ++a) CHECK(std::abs(mean[a]) <= 4.0 * std::sqrt(info.matrix(a, a) / n));

  const Eigen::MatrixXd mc = empirical_information(model, theta, 200000, 78);
  CHECK(spectral_norm(mc - info.matrix) / spectral_norm(info.matrix) <= 0.05);
}

TEST_CASE("information matrix for one region is a sum of squares") {
  auto model = test::make_model(1, 0.5, 0.1);
  const SensitivityTensor s = model.sensitivity_tensor(theta_of({2.0}));
  const InformationMatrix info = information_matrix(s);
  CHECK(info.matrix(0, 0) == doctest::Approx(s.slices[0].squaredNorm() / 16.0));
  CHECK(info.matrix(0, 0) > 0.0);
}

TEST_CASE("ill-conditioned information is rejected") {
  InformationMatrix info;
  info.matrix = Eigen::MatrixXd::Zero(2, 2);
  info.min_eigenvalue = 0.0;
  CHECK_THROWS(require_well_conditioned(info, "test"));
}

TEST_CASE("recentering") {
  auto model = test::canonical_model(0.1);
  const Theta theta0 = theta_of({2.0, 1.5});
  const Eigen::MatrixXd g = model.forward_matrix(theta0).G;
  Dataset exact = simulate(g, 100, 3);
  for (std::size_t i = 0; i < exact.size(); ++i) exact.y.row(i) = g.row(exact.x[i]);
  CHECK((recentering(model, theta0, exact) - theta0).norm() <= 1e-12);

  const Dataset data = simulate(g, 100, 4);
  Dataset reversed = data;
  for (std::size_t i = 0; i < data.size(); ++i) {
    reversed.y.row(i) = data.y.row(data.size() - 1 - i);
    reversed.x[i] = data.x[data.size() - 1 - i];
  }
  CHECK((recentering(model, theta0, data) - recentering(model, theta0, reversed)).norm() <= 1e-12);
}

TEST_CASE("recentering fluctuations follow the inverse information") {
  auto model = test::canonical_model(0.1);
  const Theta theta0 = theta_of({2.0, 1.5});
  const Eigen::MatrixXd inverse = information_matrix(model, theta0).matrix.inverse();
  const int replicates = 200;
  const std::size_t n = 4000;
  Eigen::MatrixXd z(replicates, 2);
  for (int r = 0; r < replicates; ++r) {
    const Dataset data = simulate(model, theta0, n, 1000 + r);
    z.row(r) = std::sqrt(static_cast<double>(n)) * (recentering(model, theta0, data) - theta0).transpose();
  }
  const Eigen::MatrixXd centred = z.rowwise() - z.colwise().mean();
  const Eigen::MatrixXd cov = centred.transpose() * centred / (replicates - 1);
  CHECK(spectral_norm(cov - inverse) / spectral_norm(inverse) <= 0.2);
}
