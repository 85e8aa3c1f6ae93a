#include "nto/filter.hpp"

#include <algorithm>
#include <cmath>

#include "nto/error.hpp"

namespace nto {

double default_filter_radius(const SampleBatch& batch) { return 2.5 * batch.cell_size().norm(); }

double resolve_radius(const FilterSpec& spec, const SampleBatch& batch) {
  return spec.radius > 0.0 ? spec.radius : default_filter_radius(batch);
}

Neighborhoods build_neighborhoods(const SampleBatch& batch, double radius) {
  if (!(radius > 0.0)) throw ConfigError("filter radius must be positive");
  const int dim = batch.dim();
  const Eigen::Index n = batch.size();
  const Vec h = batch.cell_size();
  std::vector<int> reach(static_cast<std::size_t>(dim));
  std::vector<int> stride(static_cast<std::size_t>(dim));
  int s = 1;
  for (int a = 0; a < dim; ++a) {
    // a sample can sit anywhere in its cell, so reach one extra cell beyond r / h
    reach[static_cast<std::size_t>(a)] = static_cast<int>(std::ceil(radius / h(a)));
    stride[static_cast<std::size_t>(a)] = s;
    s *= batch.grid_dims[static_cast<std::size_t>(a)];
  }

  Neighborhoods nb;
  nb.offsets.reserve(static_cast<std::size_t>(n) + 1);
  nb.offsets.push_back(0);
  std::vector<int> lo(static_cast<std::size_t>(dim)), hi(static_cast<std::size_t>(dim)), cur(static_cast<std::size_t>(dim));
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::vector<int> cell = batch.cell_of(j);
    for (int a = 0; a < dim; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      lo[ua] = std::max(0, cell[ua] - reach[ua]);
      hi[ua] = std::min(batch.grid_dims[ua] - 1, cell[ua] + reach[ua]);
      cur[ua] = lo[ua];
    }
    const auto xj = batch.positions.col(j);
    while (true) {
      std::int64_t k = 0;
      for (int a = 0; a < dim; ++a) k += static_cast<std::int64_t>(cur[static_cast<std::size_t>(a)]) * stride[static_cast<std::size_t>(a)];
      const double dist = (batch.positions.col(k) - xj).norm();
      const double H = radius - dist;
      if (H > 0.0) {
        nb.index.push_back(k);
        nb.weight.push_back(H);
      }
      int a = 0;
      for (; a < dim; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        if (++cur[ua] <= hi[ua]) break;
        cur[ua] = lo[ua];
      }
      if (a == dim) break;
    }
    nb.offsets.push_back(static_cast<std::int64_t>(nb.index.size()));
  }
  return nb;
}

Eigen::VectorXd filter_sensitivities(const Eigen::VectorXd& rho, const Eigen::VectorXd& s, const Neighborhoods& nb,
                                     double epsilon) {
  const auto n = static_cast<Eigen::Index>(nb.size());
  if (rho.size() != n || s.size() != n) throw ContractViolation("filter inputs must match the neighbor index");
  Eigen::VectorXd out(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double num = 0.0;
    double den = 0.0;
    for (auto e = nb.offsets[static_cast<std::size_t>(j)]; e < nb.offsets[static_cast<std::size_t>(j) + 1]; ++e) {
      const auto ue = static_cast<std::size_t>(e);
      const auto k = nb.index[ue];
      num += nb.weight[ue] * rho(k) * s(k);
      den += nb.weight[ue];
    }
    out(j) = num / (std::max(epsilon, rho(j)) * den);
  }
  return out;
}

Eigen::VectorXd filter_sensitivities(const Eigen::VectorXd& rho, const Eigen::VectorXd& s, const SampleBatch& batch,
                                     const FilterSpec& spec) {
  return filter_sensitivities(rho, s, build_neighborhoods(batch, resolve_radius(spec, batch)), spec.epsilon);
}

}  // namespace nto
