#include "oracles.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

#include "eit/fem.hpp"

namespace eit::oracle {

double gap_statistic(const std::vector<Arc>& arcs, int samples_per_arc, int circle_samples) {
  double diameter = 0.0;
  for (const Arc& arc : arcs) {
    std::vector<double> xs(samples_per_arc), ys(samples_per_arc);
    for (int s = 0; s < samples_per_arc; ++s) {
      const double phi = arc.begin + (arc.end - arc.begin) * s / (samples_per_arc - 1);
      xs[s] = std::cos(phi);
      ys[s] = std::sin(phi);
    }
    for (int p = 0; p < samples_per_arc; ++p)
      for (int q = p + 1; q < samples_per_arc; ++q)
        diameter = std::max(diameter, std::hypot(xs[p] - xs[q], ys[p] - ys[q]));
  }
  const double two_pi = 2.0 * std::acos(-1.0);
  const double cell = two_pi / circle_samples;
  long uncovered = 0;
  for (int c = 0; c < circle_samples; ++c) {
    const double phi = (c + 0.5) * cell;
    bool covered = false;
    for (const Arc& arc : arcs) {
      double rel = std::fmod(phi - arc.begin, two_pi);
      if (rel < 0) rel += two_pi;
      if (rel < arc.end - arc.begin) {
        covered = true;
        break;
      }
    }
    if (!covered) ++uncovered;
  }
  return std::sqrt(uncovered * cell) + diameter;
}

double concentric_eigenvalue(double rho, double k, int n) {
  // Inside: a r^n, outside: b r^n + c r^-n; continuity of u and k du/dr at rho.
  const double r2n = std::pow(rho, 2 * n);
  const double ratio = (1.0 - k) / (1.0 + k) * r2n;  // c / b
  return n * (1.0 - ratio) / (1.0 + ratio);
}

namespace {

void arc_moments(const Arc& a, int n, double& cos_part, double& sin_part) {
  cos_part = (std::sin(n * a.end) - std::sin(n * a.begin)) / n;
  sin_part = (std::cos(n * a.begin) - std::cos(n * a.end)) / n;
}

template <class F>
double pairing(const Arc& a, const Arc& b, int n_max, F&& weight) {
  const double pi = std::acos(-1.0);
  double sum = 0.0;
  for (int n = 1; n <= n_max; ++n) {
    double ca, sa, cb, sb;
    arc_moments(a, n, ca, sa);
    arc_moments(b, n, cb, sb);
    sum += weight(n) * (ca * cb + sa * sb) / pi;
  }
  return sum / std::sqrt(a.measure() * b.measure());
}

}  // namespace

double concentric_pairing(double rho, double k, const Arc& a, const Arc& b, int n_max) {
  return pairing(a, b, n_max, [&](int n) { return concentric_eigenvalue(rho, k, n) - n; });
}

double concentric_pairing_dk(double rho, double k, const Arc& a, const Arc& b, int n_max) {
  return pairing(a, b, n_max, [&](int n) {
    const double r2n = std::pow(rho, 2 * n);
    // d/dk of n (1 - e r2n) / (1 + e r2n) with e = (1 - k) / (1 + k)
    const double e = (1.0 - k) / (1.0 + k);
    const double de = -2.0 / ((1.0 + k) * (1.0 + k));
    const double c = e * r2n;
    return n * (-2.0 / ((1.0 + c) * (1.0 + c))) * de * r2n;
  });
}

namespace {

Eigen::MatrixXd full_solves(const ForwardModel& model, const SparseMatrix& k) {
  const Mesh& mesh = model.mesh();
  const auto nv = static_cast<Eigen::Index>(mesh.vertex_count());
  const auto on_boundary = mesh.boundary_mask();
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index col = 0; col < k.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(k, col); it; ++it)
      if (!on_boundary[it.row()]) trips.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index v = 0; v < nv; ++v)
    if (on_boundary[v]) trips.emplace_back(v, v, 1.0);
  SparseMatrix a(nv, nv);
  a.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<SparseMatrix> lu(a);
  const int m = model.electrode_count();
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nv, m);
  for (int i = 0; i < m; ++i)
    for (Eigen::Index v = 0; v < nv; ++v)
      if (on_boundary[v]) rhs(v, i) = model.lift(i)[v];
  return lu.solve(rhs);
}

}  // namespace

Eigen::MatrixXd energy_difference_matrix(const ForwardModel& model, const Theta& theta) {
  std::vector<double> ones(theta.size(), 1.0);
  std::vector<double> t(theta.data(), theta.data() + theta.size());
  const SparseMatrix k1 = assemble(ones, model.stiffness());
  const SparseMatrix kt = assemble(t, model.stiffness());
  const Eigen::MatrixXd u1 = full_solves(model, k1);
  const Eigen::MatrixXd ut = full_solves(model, kt);
  const Eigen::MatrixXd e = ut.transpose() * (kt * ut) - u1.transpose() * (k1 * u1);
  const int m = model.electrode_count();
  Eigen::MatrixXd g(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      g(i, j) = e(i, j) / std::sqrt(model.electrodes().measure(i) * model.electrodes().measure(j));
  return g;
}

double chi_square_upper_tail(double x, double dof) {
  const double h = 2.0 / (9.0 * dof);
  const double z = (std::cbrt(x / dof) - (1.0 - h)) / std::sqrt(h);
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

}  // namespace eit::oracle
