#pragma once

// Density field rho = sigmoid(5 Phi_rho), SIMP modulus, and the density-space sensitivity.

#include <Eigen/Dense>

#include "nto/autodiff.hpp"
#include "nto/networks.hpp"
#include "nto/problem.hpp"

namespace nto {

inline constexpr double kDensitySharpness = 5.0;

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Samples inside any hole constraint, and the value each is pinned to (NaN-free; 0 where unconstrained).
Mask hole_mask(const DomainSpec& domain, const Eigen::MatrixXd& positions, Eigen::VectorXd* pinned = nullptr);

/// Plain evaluation; `inputs` carries spatial rows first. Hole samples take their constraint value.
Eigen::VectorXd density(const NetworkParams& net, const Eigen::MatrixXd& inputs, const DomainSpec& domain);
/// Single-precision variant used for interactive inference.
Eigen::VectorXf density(const FloatNetwork& net, const Eigen::MatrixXf& inputs, const DomainSpec& domain);

/// Recorded sigmoid(5 Phi_rho), 1 x n, without hole overrides (the caller masks constrained samples).
ad::Var density(ad::Tape& tape, const BoundNetwork& net, const Eigen::MatrixXd& inputs);

double simp_modulus(double rho, const Material& material);
Eigen::VectorXd simp_modulus(const Eigen::VectorXd& rho, const Material& material);

/// s = -p rho^(p-1) (E1 - E_min) e_hat, with e_hat the unit-modulus pointwise compliance.
double sensitivity(double rho, double unit_energy, const Material& material);
Eigen::VectorXd sensitivity(const Eigen::VectorXd& rho, const Eigen::VectorXd& unit_energy, const Material& material);

}  // namespace nto
