#include "nto/problem.hpp"

#include <cmath>
#include <string>

#include "nto/error.hpp"

namespace nto {

double Box::measure() const {
  double m = 1.0;
  const Vec e = extent();
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    if (e(i) > 0.0) m *= e(i);
  }
  return m;
}

bool Box::contains(const Vec& x, double tol) const {
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (x(i) < lo(i) - tol || x(i) > hi(i) + tol) return false;
  }
  return true;
}

void Material::validate(int dim) const {
  if (!(E1 > 0.0)) throw ConfigError("material.E1 must be positive");
  if (!(nu >= 0.0 && nu < 0.5)) throw ConfigError("material.nu must lie in [0, 0.5)");
  if (dim == 3 && nu >= 0.5) throw ConfigError("nu = 0.5 makes the 3D Lame parameter singular");
  if (!(penalty >= 1.0)) throw ConfigError("material.p must be >= 1");
  if (use_floor && !(min_ratio > 0.0 && min_ratio < 1.0)) {
    throw ConfigError("material E_min ratio must lie in (0, 1)");
  }
}

double shape_distance(const Shape& shape, const Eigen::Ref<const Vec>& x) {
  switch (shape.kind) {
    case Shape::Kind::plane:
      return std::abs(x(shape.axis) - shape.offset);
    case Shape::Kind::point:
      return (x - shape.center).norm();
    case Shape::Kind::sphere:
      return std::abs((x - shape.center).norm() - shape.radius);
  }
  return 0.0;
}

Vec ProblemSpec::prescribed_displacement() const {
  Vec value = Vec::Zero(dim());
  for (const auto& region : dirichlet) {
    for (int c : region.components) value(c) = region.value(c);
  }
  return value;
}

void ProblemSpec::validate() const {
  const int d = dim();
  if (d != 2 && d != 3) throw ConfigError("domain must be 2D or 3D");
  if (domain.box.hi.size() != d) throw ConfigError("domain min/max dimension mismatch");
  for (int i = 0; i < d; ++i) {
    if (!(domain.box.hi(i) > domain.box.lo(i))) throw ConfigError("domain max must exceed min on every axis");
  }
  material.validate(d);
  if (!(volume_fraction > 0.0 && volume_fraction < 1.0)) throw ConfigError("volume_fraction must lie in (0, 1)");
  if (static_cast<int>(grid.size()) != d) throw ConfigError("grid needs one cell count per axis");
  for (int n : grid) {
    if (n < 1) throw ConfigError("grid cell counts must be positive");
  }
  if (!(displacement_scale > 0.0)) throw ConfigError("displacement_scale must be positive");
  if (dirichlet.empty()) throw ConfigError("at least one Dirichlet region is required");

  Vec prescribed = Vec::Zero(d);
  std::vector<bool> seen(static_cast<std::size_t>(d), false);
  for (std::size_t r = 0; r < dirichlet.size(); ++r) {
    const auto& region = dirichlet[r];
    const std::string where = "dirichlet[" + std::to_string(r) + "]";
    if (region.components.empty()) throw ConfigError(where + ": no constrained components");
    if (region.value.size() != d) throw ConfigError(where + ": value needs one entry per axis");
    if (region.shape.kind == Shape::Kind::plane) {
      if (region.shape.axis < 0 || region.shape.axis >= d) throw ConfigError(where + ": plane axis out of range");
    } else if (region.shape.center.size() != d) {
      throw ConfigError(where + ": center dimension mismatch");
    }
    for (int c : region.components) {
      if (c < 0 || c >= d) throw ConfigError(where + ": component index out of range");
      const auto uc = static_cast<std::size_t>(c);
      if (seen[uc] && prescribed(c) != region.value(c)) {
        throw ConfigError(where + ": prescribed displacements must agree across regions (constant interpolant)");
      }
      seen[uc] = true;
      prescribed(c) = region.value(c);
    }
  }
  for (std::size_t i = 0; i < point_loads.size(); ++i) {
    const auto& load = point_loads[i];
    if (load.location.size() != d || load.force.size() != d) {
      throw ConfigError("point_loads[" + std::to_string(i) + "]: dimension mismatch");
    }
    if (!domain.box.contains(load.location, 1e-9)) {
      throw ConfigError("point_loads[" + std::to_string(i) + "]: location outside the domain");
    }
  }
  for (std::size_t i = 0; i < distributed_loads.size(); ++i) {
    const auto& load = distributed_loads[i];
    const std::string where = "distributed_loads[" + std::to_string(i) + "]";
    if (load.region.dim() != d || load.region.hi.size() != d || load.force.size() != d) {
      throw ConfigError(where + ": dimension mismatch");
    }
    if (!domain.box.contains(load.region.lo, 1e-9) || !domain.box.contains(load.region.hi, 1e-9)) {
      throw ConfigError(where + ": region outside the domain");
    }
    if (load.samples < 1) throw ConfigError(where + ": samples must be positive");
  }
  if (point_loads.empty() && distributed_loads.empty()) throw ConfigError("problem has no loads");
  for (std::size_t i = 0; i < domain.holes.size(); ++i) {
    const auto& hole = domain.holes[i];
    const std::string where = "holes[" + std::to_string(i) + "]";
    if (hole.center.size() != d) throw ConfigError(where + ": center dimension mismatch");
    if (!(hole.radius > 0.0)) throw ConfigError(where + ": radius must be positive");
    const Vec lo = hole.center.array() - hole.radius;
    const Vec hi = hole.center.array() + hole.radius;
    if (!domain.box.contains(lo, 1e-9) || !domain.box.contains(hi, 1e-9)) {
      throw ConfigError(where + ": excluded region must lie inside the domain");
    }
    if (!(hole.value >= 0.0 && hole.value <= 1.0)) throw ConfigError(where + ": value must lie in [0, 1]");
  }
}

}  // namespace nto
