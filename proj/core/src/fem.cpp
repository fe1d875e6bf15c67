#include "eit/fem.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "eit/errors.hpp"

namespace eit {

SparseMatrix RegionStiffness::total() const {
  SparseMatrix sum = blocks.front();
  for (std::size_t k = 1; k < blocks.size(); ++k) sum += blocks[k];
  return sum;
}

RegionStiffness region_stiffness(const Mesh& mesh) {
  using Triplet = Eigen::Triplet<double>;
  const int regions = mesh.region_count;
  std::vector<std::vector<Triplet>> triplets(regions + 1);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.triangle_area(t);
    double b[3];
    double c[3];
    for (int i = 0; i < 3; ++i) {
      const Point& p1 = mesh.vertices[tri[(i + 1) % 3]];
      const Point& p2 = mesh.vertices[tri[(i + 2) % 3]];
      b[i] = p1.y - p2.y;
      c[i] = p2.x - p1.x;
    }
    auto& out = triplets[mesh.labels[t]];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        out.emplace_back(tri[i], tri[j], (b[i] * b[j] + c[i] * c[j]) / (4.0 * area));
  }
  RegionStiffness rs;
  const auto n = static_cast<Eigen::Index>(mesh.vertices.size());
  for (auto& list : triplets) {
    SparseMatrix block(n, n);
    block.setFromTriplets(list.begin(), list.end());
    block.makeCompressed();
    rs.blocks.push_back(std::move(block));
  }
  return rs;
}

SparseMatrix assemble(std::span<const double> theta, const RegionStiffness& rs) {
  if (static_cast<int>(theta.size()) != rs.region_count())
    throw std::invalid_argument("assemble: theta has wrong dimension");
  SparseMatrix k = rs.blocks[0];
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (!(theta[i] > 0.0))
      throw std::domain_error("assemble: conductivity must be positive (theta_" +
                              std::to_string(i + 1) + ")");
    k += theta[i] * rs.blocks[i + 1];
  }
  return k;
}

Eigen::VectorXd boundary_lift(const Mesh& mesh, const Arc& arc) {
  const auto nb = static_cast<int>(mesh.boundary.size());
  if (arc.node_count <= 0 || arc.first_node < 0)
    throw std::invalid_argument("boundary_lift: arc contains no boundary vertex");
  if (arc.node_count > nb) throw std::invalid_argument("boundary_lift: arc longer than boundary");
  const double spacing = mesh.boundary_spacing();
  const double expected_begin = spacing * arc.first_node;
  if (std::abs(std::remainder(arc.begin - expected_begin, kTwoPi)) > 1e-9 ||
      std::abs(arc.measure() - spacing * arc.node_count) > 1e-9)
    throw std::invalid_argument("boundary_lift: arc endpoints are not snapped to this mesh");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.vertices.size()));
  for (int j = 0; j < arc.node_count; ++j) g[mesh.boundary[(arc.first_node + j) % nb]] = 1.0;
  return g;
}

DirichletSolver::DirichletSolver(const Mesh& mesh, const RegionStiffness& rs) {
  const auto n = static_cast<int>(mesh.vertices.size());
  position_.assign(n, -1);
  const auto on_boundary = mesh.boundary_mask();
  std::vector<int> boundary_position(n, -1);
  for (int v = 0; v < n; ++v) {
    if (on_boundary[v]) {
      boundary_position[v] = static_cast<int>(boundary_.size());
      boundary_.push_back(v);
    } else {
      position_[v] = static_cast<int>(interior_.size());
      interior_.push_back(v);
    }
  }
  const auto ni = static_cast<Eigen::Index>(interior_.size());
  const auto nb = static_cast<Eigen::Index>(boundary_.size());

  using Triplet = Eigen::Triplet<double>;
  std::vector<SparseMatrix> interior_blocks;
  std::vector<Triplet> union_pattern;
  for (const SparseMatrix& block : rs.blocks) {
    std::vector<Triplet> ii;
    std::vector<Triplet> ib;
    for (Eigen::Index col = 0; col < block.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(block, col); it; ++it) {
        const int pr = position_[it.row()];
        if (pr < 0) continue;
        const int pc = position_[it.col()];
        if (pc >= 0)
          ii.emplace_back(pr, pc, it.value());
        else
          ib.emplace_back(pr, boundary_position[it.col()], it.value());
      }
    }
    for (const Triplet& t : ii) union_pattern.emplace_back(t.row(), t.col(), 1.0);
    SparseMatrix m(ni, ni);
    m.setFromTriplets(ii.begin(), ii.end());
    m.makeCompressed();
    interior_blocks.push_back(std::move(m));
    SparseMatrix c(ni, nb);
    c.setFromTriplets(ib.begin(), ib.end());
    c.makeCompressed();
    coupling_.push_back(std::move(c));
  }
  interior_block_.resize(ni, ni);
  interior_block_.setFromTriplets(union_pattern.begin(), union_pattern.end());
  interior_block_.makeCompressed();

  // Scatter each block's values onto the union pattern.
  for (const SparseMatrix& block : interior_blocks) {
    std::vector<double> values(interior_block_.nonZeros(), 0.0);
    for (Eigen::Index col = 0; col < ni; ++col) {
      Eigen::Index pos = interior_block_.outerIndexPtr()[col];
      const Eigen::Index end = interior_block_.outerIndexPtr()[col + 1];
      for (SparseMatrix::InnerIterator it(block, col); it; ++it) {
        while (pos < end && interior_block_.innerIndexPtr()[pos] < it.row()) ++pos;
        if (pos == end || interior_block_.innerIndexPtr()[pos] != it.row())
          throw std::logic_error("DirichletSolver: pattern mismatch");
        values[pos] = it.value();
      }
    }
    block_values_.push_back(std::move(values));
  }
  llt_.analyzePattern(interior_block_);
}

void DirichletSolver::factorize(std::span<const double> coeffs) {
  if (coeffs.size() != block_values_.size())
    throw std::invalid_argument("DirichletSolver: coefficient count mismatch");
  coeffs_.assign(coeffs.begin(), coeffs.end());
  double* values = interior_block_.valuePtr();
  const auto nnz = interior_block_.nonZeros();
  for (Eigen::Index p = 0; p < nnz; ++p) values[p] = 0.0;
  for (std::size_t k = 0; k < coeffs_.size(); ++k) {
    const double c = coeffs_[k];
    const double* bv = block_values_[k].data();
    for (Eigen::Index p = 0; p < nnz; ++p) values[p] += c * bv[p];
  }
  llt_.factorize(interior_block_);
  factorized_ = llt_.info() == Eigen::Success;
  if (!factorized_) throw NumericalError("DirichletSolver: Cholesky factorization failed");
}

DirichletSolve DirichletSolver::solve(const Eigen::VectorXd& lift) const {
  if (!factorized_) throw std::logic_error("DirichletSolver: solve before factorize");
  if (lift.size() != static_cast<Eigen::Index>(position_.size()))
    throw std::invalid_argument("DirichletSolver: lift has wrong size");
  Eigen::VectorXd g_boundary(static_cast<Eigen::Index>(boundary_.size()));
  for (std::size_t j = 0; j < boundary_.size(); ++j) g_boundary[j] = lift[boundary_[j]];

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(interior_.size()));
  for (std::size_t k = 0; k < coeffs_.size(); ++k)
    if (coupling_[k].nonZeros() > 0) rhs.noalias() -= coeffs_[k] * (coupling_[k] * g_boundary);
  const Eigen::VectorXd interior_values = llt_.solve(rhs);
  if (llt_.info() != Eigen::Success) throw NumericalError("DirichletSolver: solve failed");

  DirichletSolve out;
  out.u = lift;
  for (std::size_t i = 0; i < interior_.size(); ++i) out.u[interior_[i]] = interior_values[i];
  const double scale = std::max(1.0, lift.cwiseAbs().maxCoeff());
  out.residual_norm = (interior_block_ * interior_values - rhs).cwiseAbs().maxCoeff() / scale;
  return out;
}

DirichletSolve solve_dirichlet(const Mesh& mesh, const SparseMatrix& stiffness,
                               const Eigen::VectorXd& lift) {
  RegionStiffness single;
  single.blocks.push_back(stiffness);
  DirichletSolver solver(mesh, single);
  const double one = 1.0;
  solver.factorize(std::span<const double>(&one, 1));
  return solver.solve(lift);
}

double energy_pairing(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const SparseMatrix& w) {
  if (u.size() != w.cols() || v.size() != w.rows() || u.size() != v.size())
    throw std::invalid_argument("energy_pairing: dimension mismatch");
  return u.dot(w * v);
}

void write_coordinate_list(const SparseMatrix& matrix, std::ostream& os) {
  const auto precision = os.precision(17);
  for (Eigen::Index col = 0; col < matrix.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(matrix, col); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  os.precision(precision);
}

RegionCondensation::RegionCondensation(const Mesh& mesh, const RegionStiffness& rs) {
  const auto nv = mesh.vertices.size();
  const int blocks = static_cast<int>(rs.blocks.size());
  constexpr int kNone = -1, kMixed = -2;
  std::vector<int> owner(nv, kNone);
  std::vector<std::vector<bool>> touches(blocks, std::vector<bool>(nv, false));
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const int label = mesh.labels[t];
    for (int v : mesh.triangles[t]) {
      touches[label][v] = true;
      owner[v] = owner[v] == kNone || owner[v] == label ? label : kMixed;
    }
  }
  const auto on_boundary = mesh.boundary_mask();
  std::vector<int> slot(nv, -1);
  for (std::size_t v = 0; v < nv; ++v) {
    if (on_boundary[v]) continue;
    if (owner[v] == kMixed) {
      slot[v] = static_cast<int>(skeleton_.size());
      skeleton_.push_back(static_cast<int>(v));
    } else if (owner[v] >= 0) {
      ++eliminated_;
    }
  }

  for (int k = 0; k < blocks; ++k) {
    CondensedRegion region;
    std::vector<int> inner;
    std::vector<int> boundary_part;
    for (std::size_t v = 0; v < nv; ++v) {
      if (!touches[k][v]) continue;
      if (on_boundary[v]) {
        boundary_part.push_back(static_cast<int>(v));
      } else if (owner[v] == kMixed) {
        region.vertices.push_back(static_cast<int>(v));
        region.skeleton_slot.push_back(slot[v]);
      } else {
        inner.push_back(static_cast<int>(v));
      }
    }
    region.skeleton_count = static_cast<int>(region.vertices.size());
    region.vertices.insert(region.vertices.end(), boundary_part.begin(), boundary_part.end());

    const auto nr = static_cast<Eigen::Index>(region.vertices.size());
    const auto ni = static_cast<Eigen::Index>(inner.size());
    std::vector<int> local(nv, -1);  // >= 0: retained index, <= -2: inner index -2 - i
    for (Eigen::Index a = 0; a < nr; ++a) local[region.vertices[a]] = static_cast<int>(a);
    for (Eigen::Index a = 0; a < ni; ++a) local[inner[a]] = -2 - static_cast<int>(a);

    Eigen::MatrixXd arr = Eigen::MatrixXd::Zero(nr, nr);
    Eigen::MatrixXd air = Eigen::MatrixXd::Zero(ni, nr);
    std::vector<Eigen::Triplet<double>> aii;
    const SparseMatrix& a = rs.blocks[k];
    for (Eigen::Index col = 0; col < a.outerSize(); ++col) {
      const int lc = local[col];
      if (lc == -1) continue;
      for (SparseMatrix::InnerIterator it(a, col); it; ++it) {
        const int lr = local[it.row()];
        if (lr == -1) continue;
        if (lr >= 0 && lc >= 0) arr(lr, lc) += it.value();
        else if (lr <= -2 && lc >= 0) air(-2 - lr, lc) += it.value();
        else if (lr <= -2 && lc <= -2) aii.emplace_back(-2 - lr, -2 - lc, it.value());
      }
    }
    if (ni > 0) {
      SparseMatrix inner_block(ni, ni);
      inner_block.setFromTriplets(aii.begin(), aii.end());
      Eigen::SimplicialLDLT<SparseMatrix> ldlt(inner_block);
      if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("RegionCondensation: region interior block is singular");
      const Eigen::MatrixXd x = ldlt.solve(air);
      arr.noalias() -= air.transpose() * x;
    }
    region.schur = 0.5 * (arr + arr.transpose());
    regions_.push_back(std::move(region));
  }
}

}  // namespace eit
