#pragma once

// Stratified (jittered-grid) sampling over box domains and parameter ranges.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "nto/problem.hpp"

namespace nto {

/// One jittered sample per grid cell. Sample i lies in cell i, with x varying fastest.
/// The per-sample columns are filled in by later pipeline stages.
struct SampleBatch {
  Eigen::MatrixXd positions;  // dim x n
  double weight = 0.0;        // |domain| / n
  std::vector<int> grid_dims;
  std::uint64_t seed = 0;
  Box domain;

  Eigen::VectorXd rho;
  Eigen::VectorXd sensitivity;
  Eigen::VectorXd filtered;
  Eigen::VectorXd target;
  /// Samples inside a hole constraint; excluded from OC updates.
  Eigen::Array<bool, Eigen::Dynamic, 1> constrained;

  [[nodiscard]] Eigen::Index size() const { return positions.cols(); }
  [[nodiscard]] int dim() const { return static_cast<int>(positions.rows()); }
  [[nodiscard]] Vec cell_size() const;
  /// Grid coordinates of cell i.
  [[nodiscard]] std::vector<int> cell_of(Eigen::Index i) const;
};

SampleBatch stratified_batch(const Box& domain, std::span<const int> grid_dims, std::uint64_t seed);

/// `count` stratified samples over an axis-aligned region whose degenerate axes are held fixed
/// (segments and faces for distributed loads). Returns positions (dim x count).
Eigen::MatrixXd stratified_region(const Box& region, int count, std::uint64_t seed);

/// One uniform draw per sub-interval of [lo, hi] split into `count` equal pieces, in order.
Eigen::VectorXd sample_parameters(double lo, double hi, int count, std::uint64_t seed);

/// Cell centers of a regular grid (dim x prod(grid)), x varying fastest.
Eigen::MatrixXd cell_centers(const Box& domain, std::span<const int> grid_dims);

/// Grid with roughly `total_cells` cells whose cells are as close to cubes as possible.
std::vector<int> aspect_matched_grid(const Box& domain, int total_cells);

}  // namespace nto
