#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "eit/fem.hpp"
#include "eit/geometry.hpp"

namespace eit {

using Theta = Eigen::VectorXd;

// Theta = [gamma_min, gamma_max]^D.
struct ParameterBox {
  int dimension = 1;
  double gamma_min = 0.5;
  double gamma_max = 4.0;

  bool contains(const Theta& theta) const;
  bool interior(const Theta& theta) const;
  void require_contains(const Theta& theta, const char* who) const;
  void require_interior(const Theta& theta, const char* who) const;
};

struct MeasurementMatrix {
  Eigen::MatrixXd G;
  Theta theta;
  std::string mesh_id;

  int size() const { return static_cast<int>(G.rows()); }
  Eigen::VectorXd row(int x) const { return G.row(x).transpose(); }
};

// S(i, j, k) = dG(i, j) / dtheta_k, stored as one M x M slice per region.
struct SensitivityTensor {
  std::vector<Eigen::MatrixXd> slices;
  Theta theta;

  int electrodes() const { return slices.empty() ? 0 : static_cast<int>(slices[0].rows()); }
  int dimension() const { return static_cast<int>(slices.size()); }
  double operator()(int i, int j, int k) const { return slices[k](i, j); }
  // M x D matrix with entries S(x, j, k), the derivative of row x.
  Eigen::MatrixXd row_jacobian(int x) const;
};

struct ForwardEvaluation {
  MeasurementMatrix matrix;
  SensitivityTensor sensitivity;  // empty unless requested
};

// Forward map theta -> G_theta on a fixed mesh and electrode set.
//
// The geometry, stiffness blocks, electrode lifts, the condensed region
// blocks and the unit-conductivity solves are built once and shared
// (read-only) between copies; each copy owns its own factorization
// workspace. Copy the model once per worker thread.
//
// evaluate() solves the condensed skeleton system; evaluate_reference()
// does the same computation with a sparse Cholesky of the full interior
// block and is kept for cross-checks.
class ForwardModel {
 public:
  ForwardModel(Mesh mesh, ElectrodeSet electrodes, ParameterBox box);
  ForwardModel(const ForwardModel& other);
  ForwardModel& operator=(const ForwardModel&) = delete;
  ForwardModel(ForwardModel&&) noexcept;
  ~ForwardModel();

  const Mesh& mesh() const;
  const ElectrodeSet& electrodes() const;
  const RegionStiffness& stiffness() const;
  const RegionCondensation& condensation() const;
  const ParameterBox& box() const;
  int electrode_count() const;
  int dimension() const;
  // Nodal lift of electrode i and its unit-conductivity harmonic extension.
  const Eigen::VectorXd& lift(int i) const;
  const Eigen::VectorXd& baseline_solution(int i) const;

  MeasurementMatrix forward_matrix(const Theta& theta);
  SensitivityTensor sensitivity_tensor(const Theta& theta);
  ForwardEvaluation evaluate(const Theta& theta, bool with_sensitivity);
  ForwardEvaluation evaluate_reference(const Theta& theta, bool with_sensitivity);

  // Largest relative interior residual of the most recent solves.
  double last_residual() const { return last_residual_; }
  std::uint64_t evaluation_count() const { return evaluations_; }

  // Called with every measurement matrix produced by this copy (and by
  // copies made afterwards).
  using Observer = std::function<void(const Eigen::MatrixXd&)>;
  void set_observer(Observer observer) { observer_ = std::move(observer); }

 private:
  struct Shared;
  std::shared_ptr<const Shared> shared_;
  std::unique_ptr<DirichletSolver> solver_;  // reference path, created on demand
  Eigen::LLT<Eigen::MatrixXd> dense_llt_;
  Observer observer_;
  double last_residual_ = 0.0;
  std::uint64_t evaluations_ = 0;
};

// Central finite differences (G(theta + h e_k) - G(theta - h e_k)) / 2h.
SensitivityTensor fd_sensitivity(ForwardModel& model, const Theta& theta, double step);

struct SpectralValue {
  double value = 0.0;
  double tail_bound = 0.0;
};

// Normalized pairing <(Lambda_gamma - Lambda_1) 1_{J_i}, 1_{J_j}> / sqrt(|J_i||J_j|)
// for the unit disk with conductivity k on {r < rho} and 1 elsewhere, by
// separation of variables truncated at |n| <= n_max.
SpectralValue spectral_oracle_entry(double rho, double k, const Arc& arc_i, const Arc& arc_j,
                                    int n_max);
Eigen::MatrixXd spectral_oracle_matrix(double rho, double k, const ElectrodeSet& electrodes,
                                       int n_max);

struct StabilityPair {
  Theta theta;
  Theta theta_prime;
  double parameter_distance = 0.0;  // sup norm
  double data_distance = 0.0;       // Frobenius norm of G difference
  double ratio = 0.0;
  bool injectivity_flag = false;
};

struct StabilityReport {
  double max_ratio = 0.0;
  double min_G_gap = 0.0;
  int flagged = 0;
  std::vector<StabilityPair> pairs;
};

// Uniform pairs in Theta; the first n pairs do not depend on n_pairs.
StabilityReport stability_probe(ForwardModel& model, int n_pairs, std::uint64_t seed);

double spectral_norm(const Eigen::MatrixXd& m);

}  // namespace eit
