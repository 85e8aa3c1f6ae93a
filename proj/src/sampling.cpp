#include "nto/sampling.hpp"


#include <cmath>

#include "nto/error.hpp"
#include "nto/random.hpp"

namespace nto {

Vec SampleBatch::cell_size() const {
  Vec h = domain.extent();
  for (std::size_t a = 0; a < grid_dims.size(); ++a) h(static_cast<Eigen::Index>(a)) /= grid_dims[a];
  return h;
}

std::vector<int> SampleBatch::cell_of(Eigen::Index i) const {
  std::vector<int> cell(grid_dims.size());
  auto rest = static_cast<long long>(i);
  for (std::size_t a = 0; a < grid_dims.size(); ++a) {
    cell[a] = static_cast<int>(rest % grid_dims[a]);
    rest /= grid_dims[a];
  }
  return cell;
}

SampleBatch stratified_batch(const Box& domain, std::span<const int> grid_dims, std::uint64_t seed) {
  const int dim = domain.dim();
  if (static_cast<int>(grid_dims.size()) != dim) throw ConfigError("grid needs one cell count per axis");
  Eigen::Index n = 1;
  for (int g : grid_dims) {
    if (g < 1) throw ConfigError("grid cell counts must be positive");
    n *= g;
  }
  SampleBatch batch;
  batch.domain = domain;
  batch.grid_dims.assign(grid_dims.begin(), grid_dims.end());
  batch.seed = seed;
  batch.positions.resize(dim, n);
  batch.weight = domain.measure() / static_cast<double>(n);

  const Vec h = batch.cell_size();
  Rng rng(seed);
  std::vector<int> cell(static_cast<std::size_t>(dim), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int a = 0; a < dim; ++a) {
      batch.positions(a, i) = domain.lo(a) + (cell[static_cast<std::size_t>(a)] + rng.uniform()) * h(a);
    }
    for (int a = 0; a < dim; ++a) {
      auto& c = cell[static_cast<std::size_t>(a)];
      if (++c < grid_dims[static_cast<std::size_t>(a)]) break;
      c = 0;
    }
  }
  return batch;
}

Eigen::MatrixXd stratified_region(const Box& region, int count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("region sample count must be positive");
  const int dim = region.dim();
  const Vec extent = region.extent();
  std::vector<int> active;
  for (int a = 0; a < dim; ++a) {
    if (extent(a) > 0.0) active.push_back(a);
  }
  Eigen::MatrixXd points(dim, count);
  Rng rng(seed);
  if (active.empty()) {
    for (int i = 0; i < count; ++i) points.col(i) = region.lo;
    return points;
  }
  // Stratify along the longest active axis; other active axes are jittered uniformly.
  int longest = active.front();
  for (int a : active) {
    if (extent(a) > extent(longest)) longest = a;
  }
  for (int i = 0; i < count; ++i) {
    for (int a = 0; a < dim; ++a) {
      if (a == longest) {
        points(a, i) = region.lo(a) + (i + rng.uniform()) * extent(a) / count;
      } else if (extent(a) > 0.0) {
        points(a, i) = region.lo(a) + rng.uniform() * extent(a);
      } else {
        points(a, i) = region.lo(a);
      }
    }
  }
  return points;
}

Eigen::VectorXd sample_parameters(double lo, double hi, int count, std::uint64_t seed) {
  if (count < 1 || !(hi >= lo)) throw ConfigError("parameter range must be nonempty with a positive count");
  Rng rng(seed);
  Eigen::VectorXd q(count);
  const double width = (hi - lo) / count;
  for (int i = 0; i < count; ++i) q(i) = lo + (i + rng.uniform()) * width;
  return q;
}

Eigen::MatrixXd cell_centers(const Box& domain, std::span<const int> grid_dims) {
  const int dim = domain.dim();
  if (static_cast<int>(grid_dims.size()) != dim) throw ConfigError("grid needs one cell count per axis");
  Eigen::Index n = 1;
  for (int g : grid_dims) {
    if (g < 1) throw ConfigError("grid cell counts must be positive");
    n *= g;
  }
  Eigen::MatrixXd out(dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index rest = i;
    for (int a = 0; a < dim; ++a) {
      const int g = grid_dims[static_cast<std::size_t>(a)];
      out(a, i) = domain.lo(a) + (static_cast<double>(rest % g) + 0.5) * (domain.hi(a) - domain.lo(a)) / g;
      rest /= g;
    }
  }
  return out;
}

std::vector<int> aspect_matched_grid(const Box& domain, int total_cells) {
  const Vec e = domain.extent();
  const double cell = std::pow(domain.measure() / total_cells, 1.0 / domain.dim());
  std::vector<int> grid;
  for (Eigen::Index a = 0; a < e.size(); ++a) grid.push_back(std::max(1, static_cast<int>(std::lround(e(a) / cell))));
  return grid;
}

}  // namespace nto
