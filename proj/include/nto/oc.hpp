#pragma once

// Optimality-criterion target densities with a shared Lagrange multiplier across batches.

#include <Eigen/Dense>

#include <vector>

#include "nto/density.hpp"
#include "nto/sampling.hpp"

namespace nto {

struct OcParams {
  double move_limit = 0.2;
  double damping = 0.5;
  double lambda_lo = 1e-12;
  double lambda_hi = 1e12;
  double volume_tolerance = 1e-4;
  int max_steps = 80;

  void validate() const;
};

struct OcResult {
  std::vector<Eigen::VectorXd> targets;
  double lambda = 0.0;
  double volume = 0.0;
  int steps = 0;
  /// False when the target volume cannot be reached within the move limits this step;
  /// the targets are then saturated at the limit closest to it.
  bool feasible = true;
  bool degenerate = false;
};

/// rho^ = clamp(rho B^eta, max(0, rho - m), min(1, rho + m)), B = max(0, -s~ / lambda), with lambda
/// chosen by bisection on log lambda so the pooled mean of rho^ equals `target_volume`.
/// Samples flagged in `fixed` keep their density but count toward the volume.
OcResult oc_targets(const std::vector<Eigen::VectorXd>& rho, const std::vector<Eigen::VectorXd>& sens,
                    double target_volume, const OcParams& params, const std::vector<Mask>* fixed = nullptr);

/// Runs the update on batch columns: reads rho, filtered (or sensitivity when unfiltered) and
/// constrained; writes target.
OcResult oc_update(std::vector<SampleBatch>& batches, double target_volume, const OcParams& params);

/// Mean over every sample of every column.
double volume_estimate(const std::vector<Eigen::VectorXd>& rho);

}  // namespace nto
