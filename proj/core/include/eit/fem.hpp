#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <span>
#include <vector>

#include "eit/geometry.hpp"

namespace eit {

using SparseMatrix = Eigen::SparseMatrix<double>;

// P1 stiffness split by region: blocks[k][p][q] = integral over region k of
// grad(phi_p) . grad(phi_q). K_theta = blocks[0] + sum_k theta_k blocks[k].
struct RegionStiffness {
  std::vector<SparseMatrix> blocks;

  int region_count() const { return static_cast<int>(blocks.size()) - 1; }
  SparseMatrix total() const;
};

RegionStiffness region_stiffness(const Mesh& mesh);

// A_0 + sum_k theta_k A_k. Throws std::domain_error for theta_k <= 0.
SparseMatrix assemble(std::span<const double> theta, const RegionStiffness& rs);

// Nodal lift of the arc indicator: 1 on the node_count boundary vertices
// starting at first_node, 0 everywhere else.
Eigen::VectorXd boundary_lift(const Mesh& mesh, const Arc& arc);

struct DirichletSolve {
  Eigen::VectorXd u;
  double residual_norm = 0.0;  // ||(K u)_interior||_inf / ||lift||_inf
};

// Sparse Cholesky of the interior block of K = sum_k c_k blocks[k]. The
// sparsity pattern and its fill-reducing ordering are analysed once; each
// factorize() call only redoes the numeric factorization. Not thread safe:
// one solver per worker.
class DirichletSolver {
 public:
  DirichletSolver(const Mesh& mesh, const RegionStiffness& rs);
  DirichletSolver(const DirichletSolver&) = delete;
  DirichletSolver& operator=(const DirichletSolver&) = delete;

  // coeffs has one entry per block (c_0 first).
  void factorize(std::span<const double> coeffs);
  DirichletSolve solve(const Eigen::VectorXd& lift) const;

  int interior_count() const { return static_cast<int>(interior_.size()); }
  const SparseMatrix& interior_matrix() const { return interior_block_; }

 private:
  std::vector<int> interior_;        // interior position -> vertex id
  std::vector<int> position_;        // vertex id -> interior position or -1
  std::vector<int> boundary_;        // vertex ids with Dirichlet data
  SparseMatrix interior_block_;      // pattern shared by all blocks
  std::vector<std::vector<double>> block_values_;
  std::vector<SparseMatrix> coupling_;  // interior x boundary, per block
  std::vector<double> coeffs_;
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt_;
  bool factorized_ = false;
};

// Static condensation of the region interiors. A vertex off the boundary
// whose triangles all carry label k only couples through blocks[k], so it
// can be eliminated once, independently of theta. What remains is the
// skeleton (interface vertices) plus the boundary, where
// K_theta = sum_k c_k C_k holds exactly with C_k the Schur complement of
// blocks[k] onto the retained vertices of region k.
struct CondensedRegion {
  std::vector<int> vertices;       // skeleton vertices first, then boundary vertices
  int skeleton_count = 0;
  std::vector<int> skeleton_slot;  // index into RegionCondensation::skeleton for the first part
  Eigen::MatrixXd schur;           // C_k on `vertices`
  // Energy identity: for u, v harmonic for blocks[k] inside region k,
  // u^T blocks[k] v = u_R^T C_k v_R.
};

class RegionCondensation {
 public:
  RegionCondensation(const Mesh& mesh, const RegionStiffness& rs);

  const std::vector<int>& skeleton() const { return skeleton_; }
  const std::vector<CondensedRegion>& regions() const { return regions_; }
  std::size_t eliminated_count() const { return eliminated_; }

 private:
  std::vector<int> skeleton_;
  std::vector<CondensedRegion> regions_;
  std::size_t eliminated_ = 0;
};

// One-off solve for an arbitrary assembled matrix.
DirichletSolve solve_dirichlet(const Mesh& mesh, const SparseMatrix& stiffness,
                               const Eigen::VectorXd& lift);

double energy_pairing(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const SparseMatrix& w);

// Coordinate list dump: one "row col value" line per stored entry.
void write_coordinate_list(const SparseMatrix& matrix, std::ostream& os);

}  // namespace eit
