#pragma once

// Mesh-free linear elasticity on top of the recorded network evaluation.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

#include "nto/autodiff.hpp"
#include "nto/networks.hpp"
#include "nto/problem.hpp"
#include "nto/sampling.hpp"

namespace nto {

/// Per-component distance factors d_c (zero on the constrained boundary) and their gradients,
/// evaluated at a set of points. Each region's distance is normalized to O(1) over the domain
/// (axis distances by the box extent, point/sphere distances by the box diagonal); several
/// regions constraining the same component multiply.
struct BoundaryData {
  Eigen::MatrixXd distance;                    // dim x n
  std::vector<Eigen::MatrixXd> distance_grad;  // per spatial axis k: dim x n
  Vec prescribed;                              // constant u-bar per component
};

BoundaryData boundary_data(const ProblemSpec& problem, const Eigen::MatrixXd& points);

struct DisplacementField {
  ad::Var value;                  // dim x n
  std::vector<ad::Var> jacobian;  // jacobian[k] = d u / d x_k, dim x n
};

/// u = d * (scale * Phi_u) + u-bar, with the product rule applied to the spatial derivatives.
DisplacementField displacement(ad::Tape& tape, const ad::DualBlock& phi, const BoundaryData& bc, double scale);
/// Same construction without derivatives.
ad::Var displacement_values(ad::Tape& tape, ad::Var phi, const BoundaryData& bc, double scale);
Eigen::MatrixXd displacement_values(const Eigen::MatrixXd& phi, const BoundaryData& bc, double scale);

/// Independent strain components in Voigt order: 2D (xx, yy, xy), 3D (xx, yy, zz, xy, yz, xz).
template <typename T>
struct Strain {
  int dim = 2;
  std::array<T, 6> c{};

  [[nodiscard]] int count() const { return dim == 2 ? 3 : 6; }
};

/// Recorded strain from the displacement Jacobian.
Strain<ad::Var> strain(ad::Tape& tape, const DisplacementField& u);
/// Strain components per sample from plain Jacobian values (jac[k] = d u / d x_k, dim x n).
Strain<Eigen::ArrayXd> strain(const std::vector<Eigen::MatrixXd>& jac);

/// Pointwise epsilon : sigma for unit Young's modulus (plane stress in 2D, Hooke's law in 3D).
/// Multiply by E to obtain the pointwise compliance.
template <typename T>
T unit_compliance(const Strain<T>& eps, double nu) {
  if (eps.dim == 2) {
    const T& xx = eps.c[0];
    const T& yy = eps.c[1];
    const T& xy = eps.c[2];
    const T trace = xx + yy;
    const T contraction = xx * xx + yy * yy + 2.0 * (xy * xy);
    return (1.0 / (1.0 - nu * nu)) * ((1.0 - nu) * contraction + nu * (trace * trace));
  }
  const double lambda = nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = 1.0 / (2.0 * (1.0 + nu));
  const T trace = eps.c[0] + eps.c[1] + eps.c[2];
  const T diag = eps.c[0] * eps.c[0] + eps.c[1] * eps.c[1] + eps.c[2] * eps.c[2];
  const T off = eps.c[3] * eps.c[3] + eps.c[4] * eps.c[4] + eps.c[5] * eps.c[5];
  return lambda * (trace * trace) + (2.0 * mu) * (diag + 2.0 * off);
}

/// Symmetric part of a displacement gradient.
Eigen::MatrixXd strain_tensor(const Eigen::MatrixXd& grad_u);
/// Plane stress (dim 2) or isotropic Hooke's law (dim 3). Throws ConfigError for nu = 0.5 in 3D.
Eigen::MatrixXd stress_tensor(const Eigen::MatrixXd& eps, double E, double nu, int dim);
/// epsilon : sigma, twice the internal energy density.
double pointwise_compliance(const Eigen::MatrixXd& eps, const Eigen::MatrixXd& sigma);
double lame_lambda(double E, double nu);
double lame_mu(double E, double nu);

/// Points where the external work is evaluated, already carrying their force weights.
/// Point loads contribute one column each; distributed loads contribute stratified samples
/// whose forces sum to the total load. `inputs` holds the network inputs (spatial rows
/// first, then any solution-space parameters).
struct LoadSamples {
  Eigen::MatrixXd inputs;  // input_dim x m
  Eigen::MatrixXd forces;  // dim x m

  [[nodiscard]] Eigen::Index size() const { return inputs.cols(); }
  void append(const LoadSamples& other);
};

/// Load samples for a problem. `extra` rows are appended to every network input, and all
/// forces are multiplied by `weight` (used to average over solution-space parameters).
LoadSamples load_samples(const ProblemSpec& problem, std::uint64_t seed, const Vec& extra = Vec(),
                         double weight = 1.0);

/// Recorded sum_m u(x_m) . F_m.
ad::Var external_work(ad::Tape& tape, const BoundNetwork& displacement_net, const LoadSamples& loads,
                      const ProblemSpec& problem);

struct SimLoss {
  ad::Var loss;
  ad::Var internal_energy;
  ad::Var external_work;
};

/// Monte Carlo estimate of the total potential energy,
/// weight * sum_i 1/2 E(rho_i) eps_i : sigma_i(unit E) - external work.
/// `inputs` are the displacement-network inputs for the batch samples (spatial rows first);
/// `modulus` is E(rho) per sample.
SimLoss sim_loss(ad::Tape& tape, const BoundNetwork& displacement_net, const Eigen::MatrixXd& inputs,
                 double sample_weight, const Eigen::VectorXd& modulus, const LoadSamples& loads,
                 const ProblemSpec& problem);

/// Plain evaluation of the unit-modulus pointwise compliance at the given inputs.
Eigen::VectorXd unit_compliance_at(const NetworkParams& displacement_net, const Eigen::MatrixXd& inputs,
                                   const ProblemSpec& problem);

/// Plain evaluation of the displacement field (dim x n).
Eigen::MatrixXd displacement_at(const NetworkParams& displacement_net, const Eigen::MatrixXd& inputs,
                                const ProblemSpec& problem);

/// Point loads whose location is fully clamped to zero displacement do no work; reports them.
std::vector<std::size_t> degenerate_point_loads(const ProblemSpec& problem);

}  // namespace nto
