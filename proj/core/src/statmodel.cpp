#include "eit/statmodel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <sstream>
#include <stdexcept>

#include "eit/errors.hpp"
#include "eit/random.hpp"

namespace eit {

Dataset Dataset::head(std::size_t n) const {
  if (n > size()) throw std::out_of_range("Dataset::head: n exceeds dataset size");
  Dataset out;
  out.y = y.topRows(static_cast<Eigen::Index>(n));
  out.x.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
  out.theta_true = theta_true;
  out.seed = seed;
  return out;
}

Dataset Dataset::concatenate(const Dataset& a, const Dataset& b) {
  if (a.size() > 0 && b.size() > 0 && a.electrodes() != b.electrodes())
    throw std::invalid_argument("Dataset::concatenate: electrode counts differ");
  Dataset out;
  const Eigen::Index cols = a.size() > 0 ? a.y.cols() : b.y.cols();
  out.y.resize(a.y.rows() + b.y.rows(), cols);
  if (a.size() > 0) out.y.topRows(a.y.rows()) = a.y;
  if (b.size() > 0) out.y.bottomRows(b.y.rows()) = b.y;
  out.x = a.x;
  out.x.insert(out.x.end(), b.x.begin(), b.x.end());
  out.theta_true = a.theta_true;
  out.seed = a.seed;
  return out;
}

Dataset simulate(const Eigen::MatrixXd& G, std::size_t n, std::uint64_t seed) {
  const auto m = static_cast<int>(G.rows());
  Dataset data;
  data.seed = seed;
  data.y.resize(static_cast<Eigen::Index>(n), m);
  data.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Engine engine = make_engine(derive_seed(seed, "observation", i));
    std::uniform_int_distribution<int> design(0, m - 1);
    std::normal_distribution<double> noise(0.0, 1.0);
    const int x = design(engine);
    data.x[i] = x;
    for (int j = 0; j < m; ++j)
      data.y(static_cast<Eigen::Index>(i), j) = G(x, j) + noise(engine);
  }
  return data;
}

Dataset simulate(ForwardModel& model, const Theta& theta, std::size_t n, std::uint64_t seed) {
  model.box().require_contains(theta, "simulate");
  Dataset data = simulate(model.forward_matrix(theta).G, n, seed);
  data.theta_true = theta;
  return data;
}

double log_likelihood(const Eigen::MatrixXd& G, const Dataset& data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    total += (G.row(data.x[i]) - data.y.row(static_cast<Eigen::Index>(i))).squaredNorm();
  return -0.5 * total;
}

double log_likelihood(ForwardModel& model, const Theta& theta, const Dataset& data) {
  model.box().require_contains(theta, "log_likelihood");
  return log_likelihood(model.forward_matrix(theta).G, data);
}

SufficientStatistics SufficientStatistics::from(const Dataset& data) {
  const int m = data.electrodes();
  SufficientStatistics stats;
  stats.counts = Eigen::VectorXd::Zero(m);
  stats.sums = Eigen::MatrixXd::Zero(m, m);
  stats.n = data.size();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data.y.row(static_cast<Eigen::Index>(i));
    stats.counts[data.x[i]] += 1.0;
    stats.sums.row(data.x[i]) += row;
    stats.sum_squares += row.squaredNorm();
  }
  return stats;
}

double SufficientStatistics::log_likelihood(const Eigen::MatrixXd& G) const {
  if (n == 0) return 0.0;
  const double cross = G.cwiseProduct(sums).sum();
  const double fitted = (G.rowwise().squaredNorm().array() * counts.array()).sum();
  return -0.5 * (sum_squares - 2.0 * cross + fitted);
}

Eigen::VectorXd SufficientStatistics::gradient(const Eigen::MatrixXd& G,
                                               const SensitivityTensor& s) const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(s.dimension());
  if (n == 0) return grad;
  const Eigen::MatrixXd residual = sums - counts.asDiagonal() * G;
  for (int a = 0; a < s.dimension(); ++a) grad[a] = residual.cwiseProduct(s.slices[a]).sum();
  return grad;
}

Eigen::MatrixXd SufficientStatistics::gauss_newton(const SensitivityTensor& s) const {
  const int d = s.dimension();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      const Eigen::MatrixXd weighted = counts.asDiagonal() * s.slices[b];
      h(a, b) = h(b, a) = s.slices[a].cwiseProduct(weighted).sum();
    }
  return h;
}

Eigen::VectorXd score_vector(const Eigen::MatrixXd& G, const SensitivityTensor& s,
                             const Eigen::VectorXd& y, int x) {
  if (x < 0 || x >= G.rows()) throw std::out_of_range("score_vector: design index");
  if (y.size() != G.cols()) throw std::invalid_argument("score_vector: y has wrong length");
  const Eigen::VectorXd residual = y - G.row(x).transpose();
  Eigen::VectorXd score(s.dimension());
  for (int a = 0; a < s.dimension(); ++a) score[a] = residual.dot(s.slices[a].row(x));
  return score;
}

Eigen::VectorXd score_vector(ForwardModel& model, const Theta& theta, const Eigen::VectorXd& y,
                             int x) {
  model.box().require_interior(theta, "score_vector");
  const ForwardEvaluation eval = model.evaluate(theta, true);
  return score_vector(eval.matrix.G, eval.sensitivity, y, x);
}

InformationMatrix information_matrix(const SensitivityTensor& s) {
  const int d = s.dimension();
  const double m = static_cast<double>(s.electrodes());
  InformationMatrix info;
  info.theta = s.theta;
  info.matrix.resize(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b)
      info.matrix(a, b) = info.matrix(b, a) = s.slices[a].cwiseProduct(s.slices[b]).sum() / m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info.matrix, Eigen::EigenvaluesOnly);
  info.min_eigenvalue = eig.eigenvalues()(0);
  return info;
}

InformationMatrix information_matrix(ForwardModel& model, const Theta& theta) {
  model.box().require_interior(theta, "information_matrix");
  return information_matrix(model.sensitivity_tensor(theta));
}

Eigen::MatrixXd empirical_information(ForwardModel& model, const Theta& theta, std::size_t n,
                                      std::uint64_t seed) {
  model.box().require_interior(theta, "empirical_information");
  if (n == 0) throw std::invalid_argument("empirical_information: n must be >= 1");
  const ForwardEvaluation eval = model.evaluate(theta, true);
  const Dataset data = simulate(eval.matrix.G, n, seed);
  const int d = model.dimension();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd s = score_vector(
        eval.matrix.G, eval.sensitivity, data.y.row(static_cast<Eigen::Index>(i)).transpose(),
        data.x[i]);
    acc.noalias() += s * s.transpose();
  }
  return acc / static_cast<double>(n);
}

void require_well_conditioned(const InformationMatrix& info, const char* who) {
  if (!(info.min_eigenvalue > 1e-12)) {
    std::ostringstream os;
    os << who << ": information matrix is singular (min eigenvalue " << info.min_eigenvalue << ")";
    throw NumericalError(os.str());
  }
}

Theta recentering(ForwardModel& model, const Theta& theta0, const Dataset& data) {
  model.box().require_interior(theta0, "recentering");
  if (data.size() == 0) throw std::invalid_argument("recentering: empty dataset");
  const ForwardEvaluation eval = model.evaluate(theta0, true);
  const InformationMatrix info = information_matrix(eval.sensitivity);
  require_well_conditioned(info, "recentering");
  const SufficientStatistics stats = SufficientStatistics::from(data);
  const Eigen::VectorXd mean_score =
      stats.gradient(eval.matrix.G, eval.sensitivity) / static_cast<double>(data.size());
  return theta0 + info.matrix.llt().solve(mean_score);
}

}  // namespace eit
