#pragma once

// Sensitivity filter over one stratified batch, using the grid to find neighbors.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "nto/sampling.hpp"

namespace nto {

struct FilterSpec {
  /// Kernel radius in domain units; <= 0 selects the default (2.5 cell diagonals).
  double radius = 0.0;
  double epsilon = 1e-3;
};

double default_filter_radius(const SampleBatch& batch);
double resolve_radius(const FilterSpec& spec, const SampleBatch& batch);

/// Compressed neighbor lists with kernel weights H = r - |w_j - w_k| > 0.
struct Neighborhoods {
  std::vector<std::int64_t> offsets;  // n + 1
  std::vector<std::int64_t> index;
  std::vector<double> weight;

  [[nodiscard]] std::size_t size() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

/// Scans the cells that intersect the radius-r ball around each sample.
Neighborhoods build_neighborhoods(const SampleBatch& batch, double radius);

/// s~_j = sum_k H_jk rho_k s_k / (max(eps, rho_j) sum_k H_jk).
Eigen::VectorXd filter_sensitivities(const Eigen::VectorXd& rho, const Eigen::VectorXd& s, const Neighborhoods& nb,
                                     double epsilon);
Eigen::VectorXd filter_sensitivities(const Eigen::VectorXd& rho, const Eigen::VectorXd& s, const SampleBatch& batch,
                                     const FilterSpec& spec);

}  // namespace nto
