#include "eit/forward.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <sstream>
#include <stdexcept>

#include "eit/errors.hpp"
#include "eit/random.hpp"

namespace eit {

bool ParameterBox::contains(const Theta& theta) const {
  if (theta.size() != dimension) return false;
  for (Eigen::Index k = 0; k < theta.size(); ++k)
    if (!(theta[k] >= gamma_min && theta[k] <= gamma_max)) return false;
  return true;
}

bool ParameterBox::interior(const Theta& theta) const {
  if (theta.size() != dimension) return false;
  for (Eigen::Index k = 0; k < theta.size(); ++k)
    if (!(theta[k] > gamma_min && theta[k] < gamma_max)) return false;
  return true;
}

void ParameterBox::require_contains(const Theta& theta, const char* who) const {
  if (!contains(theta)) {
    std::ostringstream os;
    os << who << ": theta outside [" << gamma_min << ", " << gamma_max << "]^" << dimension;
    throw std::domain_error(os.str());
  }
}

void ParameterBox::require_interior(const Theta& theta, const char* who) const {
  if (!interior(theta)) {
    std::ostringstream os;
    os << who << ": theta must be interior to [" << gamma_min << ", " << gamma_max << "]^"
       << dimension;
    throw std::domain_error(os.str());
  }
}

Eigen::MatrixXd SensitivityTensor::row_jacobian(int x) const {
  Eigen::MatrixXd jac(electrodes(), dimension());
  for (int k = 0; k < dimension(); ++k) jac.col(k) = slices[k].row(x).transpose();
  return jac;
}

struct ForwardModel::Shared {
  Mesh mesh;
  ElectrodeSet electrodes;
  ParameterBox box;
  RegionStiffness rs;
  std::vector<Eigen::VectorXd> lifts;
  std::vector<Eigen::VectorXd> baseline;
  Eigen::MatrixXd weights;                       // 1 / sqrt(|J_i||J_j|)
  std::vector<Eigen::MatrixXd> region_baseline;  // A_k U_1 for k = 1..D, full mesh

  RegionCondensation condensation;
  std::vector<Eigen::MatrixXd> boundary_values;  // per region: lift values on its boundary part
  std::vector<Eigen::MatrixXd> coupling;         // per region: C_k[skeleton, boundary] * lifts
  std::vector<Eigen::MatrixXd> condensed_baseline;  // C_k U_1 on region k, k = 1..D

  Shared(Mesh m, ElectrodeSet e, ParameterBox b)
      : mesh(std::move(m)),
        electrodes(std::move(e)),
        box(b),
        rs(region_stiffness(mesh)),
        condensation(mesh, rs) {}
};

namespace {

// Retained values of the discrete harmonic extensions of all lifts, one
// matrix per region with rows ordered like CondensedRegion::vertices.
std::vector<Eigen::MatrixXd> condensed_solve(const RegionCondensation& cond,
                                             const std::vector<Eigen::MatrixXd>& boundary_values,
                                             const std::vector<Eigen::MatrixXd>& coupling,
                                             std::span<const double> coeffs,
                                             Eigen::LLT<Eigen::MatrixXd>& llt, double& residual) {
  const auto ns = static_cast<Eigen::Index>(cond.skeleton().size());
  const Eigen::Index m = boundary_values.front().cols();
  Eigen::MatrixXd kss = Eigen::MatrixXd::Zero(ns, ns);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(ns, m);
  const auto& regions = cond.regions();
  for (std::size_t k = 0; k < regions.size(); ++k) {
    const CondensedRegion& r = regions[k];
    const double c = coeffs[k];
    for (int b = 0; b < r.skeleton_count; ++b) {
      const int sb = r.skeleton_slot[b];
      for (int a = 0; a < r.skeleton_count; ++a) kss(r.skeleton_slot[a], sb) += c * r.schur(a, b);
      rhs.row(sb) -= c * coupling[k].row(b);
    }
  }
  llt.compute(kss);
  if (llt.info() != Eigen::Success) throw NumericalError("condensed skeleton system is not positive definite");
  const Eigen::MatrixXd z = llt.solve(rhs);
  const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
  residual = ns > 0 ? (kss * z - rhs).cwiseAbs().maxCoeff() / scale : 0.0;

  std::vector<Eigen::MatrixXd> out;
  out.reserve(regions.size());
  for (std::size_t k = 0; k < regions.size(); ++k) {
    const CondensedRegion& r = regions[k];
    Eigen::MatrixXd u(static_cast<Eigen::Index>(r.vertices.size()), m);
    for (int a = 0; a < r.skeleton_count; ++a) u.row(a) = z.row(r.skeleton_slot[a]);
    u.bottomRows(u.rows() - r.skeleton_count) = boundary_values[k];
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace

ForwardModel::ForwardModel(Mesh mesh, ElectrodeSet electrodes, ParameterBox box) {
  if (box.dimension != mesh.region_count)
    throw std::invalid_argument("ForwardModel: parameter dimension differs from mesh regions");
  if (!(box.gamma_min > 0.0) || box.gamma_max < box.gamma_min)
    throw std::invalid_argument("ForwardModel: need 0 < gamma_min <= gamma_max");

  auto shared = std::make_shared<Shared>(std::move(mesh), std::move(electrodes), box);
  const int m = static_cast<int>(shared->electrodes.size());
  shared->weights.resize(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      shared->weights(i, j) =
          1.0 / std::sqrt(shared->electrodes.measure(i) * shared->electrodes.measure(j));

  solver_ = std::make_unique<DirichletSolver>(shared->mesh, shared->rs);
  const std::vector<double> ones(shared->rs.blocks.size(), 1.0);
  solver_->factorize(ones);
  const auto nv = static_cast<Eigen::Index>(shared->mesh.vertices.size());
  Eigen::MatrixXd u1(nv, m);
  for (int i = 0; i < m; ++i) {
    shared->lifts.push_back(boundary_lift(shared->mesh, shared->electrodes.arcs[i]));
    DirichletSolve s = solver_->solve(shared->lifts.back());
    last_residual_ = std::max(last_residual_, s.residual_norm);
    u1.col(i) = s.u;
    shared->baseline.push_back(std::move(s.u));
  }
  for (int k = 1; k <= box.dimension; ++k)
    shared->region_baseline.push_back(shared->rs.blocks[k] * u1);

  for (const CondensedRegion& r : shared->condensation.regions()) {
    const auto nb = static_cast<Eigen::Index>(r.vertices.size()) - r.skeleton_count;
    Eigen::MatrixXd values(nb, m);
    for (Eigen::Index a = 0; a < nb; ++a)
      for (int i = 0; i < m; ++i) values(a, i) = shared->lifts[i][r.vertices[r.skeleton_count + a]];
    shared->coupling.push_back(r.schur.topRightCorner(r.skeleton_count, nb) * values);
    shared->boundary_values.push_back(std::move(values));
  }
  double residual = 0.0;
  const auto u1_condensed = condensed_solve(shared->condensation, shared->boundary_values,
                                            shared->coupling, ones, dense_llt_, residual);
  last_residual_ = std::max(last_residual_, residual);
  for (int k = 1; k <= box.dimension; ++k)
    shared->condensed_baseline.push_back(shared->condensation.regions()[k].schur * u1_condensed[k]);
  shared_ = std::move(shared);
}

ForwardModel::ForwardModel(const ForwardModel& other)
    : shared_(other.shared_), observer_(other.observer_) {}

ForwardModel::ForwardModel(ForwardModel&&) noexcept = default;
ForwardModel::~ForwardModel() = default;

const Mesh& ForwardModel::mesh() const { return shared_->mesh; }
const ElectrodeSet& ForwardModel::electrodes() const { return shared_->electrodes; }
const RegionStiffness& ForwardModel::stiffness() const { return shared_->rs; }
const ParameterBox& ForwardModel::box() const { return shared_->box; }
const RegionCondensation& ForwardModel::condensation() const { return shared_->condensation; }
int ForwardModel::electrode_count() const { return static_cast<int>(shared_->lifts.size()); }
int ForwardModel::dimension() const { return shared_->box.dimension; }
const Eigen::VectorXd& ForwardModel::lift(int i) const { return shared_->lifts.at(i); }
const Eigen::VectorXd& ForwardModel::baseline_solution(int i) const {
  return shared_->baseline.at(i);
}

ForwardEvaluation ForwardModel::evaluate(const Theta& theta, bool with_sensitivity) {
  const Shared& sh = *shared_;
  sh.box.require_contains(theta, "forward_matrix");
  const int m = electrode_count();
  const int d = dimension();

  std::vector<double> coeffs(d + 1, 1.0);
  for (int k = 0; k < d; ++k) coeffs[k + 1] = theta[k];
  const auto u = condensed_solve(sh.condensation, sh.boundary_values, sh.coupling, coeffs,
                                 dense_llt_, last_residual_);

  // <(Lambda_gamma - Lambda_1) g_i, g_j> = u1_i^T (K_theta - K_1) u_j, which
  // is the energy difference u_i^T K_theta u_j - u1_i^T K_1 u1_j on solutions
  // but free of the cancellation between two large energies.
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < d; ++k)
    if (theta[k] != 1.0)
      g.noalias() += (theta[k] - 1.0) * (sh.condensed_baseline[k].transpose() * u[k + 1]);

  ForwardEvaluation out;
  out.matrix.G = (0.5 * (g + g.transpose())).cwiseProduct(sh.weights);
  out.matrix.theta = theta;
  out.matrix.mesh_id = sh.mesh.id();
  if (with_sensitivity) {
    out.sensitivity.theta = theta;
    for (int k = 0; k < d; ++k) {
      const auto& r = sh.condensation.regions()[k + 1];
      Eigen::MatrixXd s = u[k + 1].transpose() * (r.schur * u[k + 1]);
      out.sensitivity.slices.push_back((0.5 * (s + s.transpose())).cwiseProduct(sh.weights));
    }
  }
  ++evaluations_;
  if (observer_) observer_(out.matrix.G);
  return out;
}

ForwardEvaluation ForwardModel::evaluate_reference(const Theta& theta, bool with_sensitivity) {
  const Shared& sh = *shared_;
  sh.box.require_contains(theta, "forward_matrix");
  const int m = electrode_count();
  const int d = dimension();
  if (!solver_) solver_ = std::make_unique<DirichletSolver>(sh.mesh, sh.rs);

  std::vector<double> coeffs(d + 1, 1.0);
  for (int k = 0; k < d; ++k) coeffs[k + 1] = theta[k];
  solver_->factorize(coeffs);

  Eigen::MatrixXd u(static_cast<Eigen::Index>(sh.mesh.vertices.size()), m);
  last_residual_ = 0.0;
  for (int i = 0; i < m; ++i) {
    DirichletSolve s = solver_->solve(sh.lifts[i]);
    last_residual_ = std::max(last_residual_, s.residual_norm);
    u.col(i) = s.u;
  }

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < d; ++k)
    if (theta[k] != 1.0) g.noalias() += (theta[k] - 1.0) * (sh.region_baseline[k].transpose() * u);

  ForwardEvaluation out;
  out.matrix.G = (0.5 * (g + g.transpose())).cwiseProduct(sh.weights);
  out.matrix.theta = theta;
  out.matrix.mesh_id = sh.mesh.id();
  if (with_sensitivity) {
    out.sensitivity.theta = theta;
    for (int k = 0; k < d; ++k) {
      Eigen::MatrixXd s = u.transpose() * (sh.rs.blocks[k + 1] * u);
      out.sensitivity.slices.push_back((0.5 * (s + s.transpose())).cwiseProduct(sh.weights));
    }
  }
  ++evaluations_;
  if (observer_) observer_(out.matrix.G);
  return out;
}

MeasurementMatrix ForwardModel::forward_matrix(const Theta& theta) {
  return evaluate(theta, false).matrix;
}

SensitivityTensor ForwardModel::sensitivity_tensor(const Theta& theta) {
  return evaluate(theta, true).sensitivity;
}

SensitivityTensor fd_sensitivity(ForwardModel& model, const Theta& theta, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("fd_sensitivity: step must be > 0");
  SensitivityTensor out;
  out.theta = theta;
  for (int k = 0; k < model.dimension(); ++k) {
    Theta plus = theta;
    Theta minus = theta;
    plus[k] += step;
    minus[k] -= step;
    if (!model.box().contains(plus) || !model.box().contains(minus))
      throw std::domain_error("fd_sensitivity: step leaves the parameter box");
    const Eigen::MatrixXd gp = model.forward_matrix(plus).G;
    const Eigen::MatrixXd gm = model.forward_matrix(minus).G;
    out.slices.push_back((gp - gm) / (2.0 * step));
  }
  return out;
}

namespace {

std::complex<double> arc_coefficient(const Arc& arc, int n) {
  // (1/2pi) * integral over [a, b) of exp(-i n phi)
  using namespace std::complex_literals;
  const double nn = static_cast<double>(n);
  return (std::exp(-1.0i * nn * arc.begin) - std::exp(-1.0i * nn * arc.end)) / (1.0i * nn * kTwoPi);
}

}  // namespace

SpectralValue spectral_oracle_entry(double rho, double k, const Arc& arc_i, const Arc& arc_j,
                                    int n_max) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("spectral oracle: rho must lie in (0, 1)");
  if (!(k > 0.0)) throw std::invalid_argument("spectral oracle: k must be > 0");
  if (n_max < 1) throw std::invalid_argument("spectral oracle: n_max must be >= 1");
  const double eta = (1.0 - k) / (1.0 + k);
  double sum = 0.0;
  double rho_power = 1.0;
  for (int n = 1; n <= n_max; ++n) {
    rho_power *= rho * rho;
    const double c = eta * rho_power;
    // Lambda_gamma eigenvalue n (1 - c) / (1 + c), minus the unit value n.
    const double normalized = -2.0 * n * c / (1.0 + c);
    const auto gi = arc_coefficient(arc_i, n);
    const auto gj = arc_coefficient(arc_j, n);
    sum += normalized * (gi * std::conj(gj)).real();
  }
  const double scale = 1.0 / std::sqrt(arc_i.measure() * arc_j.measure());
  SpectralValue out;
  // modes n and -n contribute complex conjugates
  out.value = scale * kTwoPi * 2.0 * sum;
  const double abs_eta = std::abs(eta);
  const double rho2 = rho * rho;
  out.tail_bound = scale * 8.0 * abs_eta / (kPi * (1.0 - abs_eta) * (n_max + 1)) *
                   std::pow(rho2, n_max + 1) / (1.0 - rho2);
  return out;
}

Eigen::MatrixXd spectral_oracle_matrix(double rho, double k, const ElectrodeSet& electrodes,
                                       int n_max) {
  const auto m = static_cast<Eigen::Index>(electrodes.size());
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      g(i, j) = spectral_oracle_entry(rho, k, electrodes.arcs[i], electrodes.arcs[j], n_max).value;
  return g;
}

StabilityReport stability_probe(ForwardModel& model, int n_pairs, std::uint64_t seed) {
  if (n_pairs < 1) throw std::invalid_argument("stability_probe: n_pairs must be >= 1");
  const ParameterBox& box = model.box();
  StabilityReport report;
  report.min_G_gap = std::numeric_limits<double>::infinity();
  for (int p = 0; p < n_pairs; ++p) {
    Engine engine = make_engine(derive_seed(seed, "stability", static_cast<std::uint64_t>(p)));
    std::uniform_real_distribution<double> uniform(box.gamma_min, box.gamma_max);
    StabilityPair pair;
    do {
      pair.theta = Theta(box.dimension);
      pair.theta_prime = Theta(box.dimension);
      for (int k = 0; k < box.dimension; ++k) pair.theta[k] = uniform(engine);
      for (int k = 0; k < box.dimension; ++k) pair.theta_prime[k] = uniform(engine);
    } while (pair.theta == pair.theta_prime);
    const Eigen::MatrixXd g = model.forward_matrix(pair.theta).G;
    const Eigen::MatrixXd gp = model.forward_matrix(pair.theta_prime).G;
    pair.parameter_distance = (pair.theta - pair.theta_prime).cwiseAbs().maxCoeff();
    pair.data_distance = (g - gp).norm();
    pair.ratio = pair.parameter_distance / pair.data_distance;
    pair.injectivity_flag = pair.parameter_distance > 1e-2 && pair.data_distance < 1e-10;
    report.max_ratio = std::max(report.max_ratio, pair.ratio);
    report.min_G_gap = std::min(report.min_G_gap, pair.data_distance);
    if (pair.injectivity_flag) ++report.flagged;
    report.pairs.push_back(std::move(pair));
  }
  return report;
}

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

}  // namespace eit
