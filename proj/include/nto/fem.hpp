#pragma once

// Regular-grid SIMP finite elements (bilinear quads in plane stress, trilinear hexes),
// used as an independent compliance oracle and reference optimizer.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "nto/problem.hpp"

namespace nto::fem {

struct FemModel {
  int dim = 2;
  std::vector<int> nel;  // elements per axis
  Box domain;
  Vec h;  // element size per axis
  Material material;
  Eigen::MatrixXd ke;  // unit-modulus element stiffness
  /// Element -> global dof map, one row per element (nodes counterclockwise, z-major in 3D).
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> edofs;
  std::vector<char> fixed;  // per dof
  Eigen::VectorXd prescribed;  // per dof, meaningful where fixed
  Eigen::VectorXd force;
  /// Elements whose density is held (holes); value in `passive_value`.
  std::vector<char> passive;
  Eigen::VectorXd passive_value;

  [[nodiscard]] int element_count() const;
  [[nodiscard]] int node_count() const;
  [[nodiscard]] int dof_count() const { return node_count() * dim; }
  [[nodiscard]] std::vector<int> node_dims() const;
  [[nodiscard]] int node_index(std::span<const int> ijk) const;
  [[nodiscard]] Vec node_position(int node) const;
  [[nodiscard]] Vec element_center(int e) const;
};

/// Plane-stress bilinear quad (dim 2) or trilinear hex (dim 3), 2-point Gauss per axis, unit E.
Eigen::MatrixXd element_stiffness(int dim, const Vec& h, double nu);

FemModel build_model(const ProblemSpec& problem, const std::vector<int>& nel);

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Throws NumericalError naming rigid-body modes the fixed dofs do not remove.
void check_supports(const FemModel& model);

/// Solves K(rho) u = f by Jacobi-preconditioned CG. `u` is used as the initial guess when sized.
SolveStats solve(const FemModel& model, const Eigen::VectorXd& rho, Eigen::VectorXd& u, double tol = 1e-8,
                 int max_iterations = 0);

/// Per-element u_e^T KE u_e.
Eigen::VectorXd element_energy(const FemModel& model, const Eigen::VectorXd& u);

/// K(rho) x restricted to free dofs (fixed rows and columns act as identity-zero).
void apply_stiffness(const FemModel& model, const Eigen::VectorXd& modulus, const Eigen::VectorXd& x,
                     Eigen::VectorXd& y);

double compliance(const FemModel& model, const Eigen::VectorXd& rho, Eigen::VectorXd* u_out = nullptr);

struct SimpOptions {
  double filter_radius = 2.5;  // element widths
  double move_limit = 0.2;
  double damping = 0.5;
  double change_tolerance = 0.01;
  int max_iterations = 300;
};

struct SimpResult {
  Eigen::VectorXd rho;
  double compliance = 0.0;
  double volume = 0.0;
  int iterations = 0;
  std::vector<double> history;
};

SimpResult simp_optimize(const ProblemSpec& problem, const std::vector<int>& nel, const SimpOptions& options = {});

}  // namespace nto::fem
