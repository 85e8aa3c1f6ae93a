#pragma once

// Problem description shared by the mesh-free solver and the FEM reference.

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace nto {

using Vec = Eigen::VectorXd;

struct Box {
  Vec lo;
  Vec hi;

  [[nodiscard]] int dim() const { return static_cast<int>(lo.size()); }
  [[nodiscard]] Vec extent() const { return hi - lo; }
  /// Product of the non-degenerate extents (length of a segment, area of a face, ...).
  [[nodiscard]] double measure() const;
  [[nodiscard]] double diagonal() const { return extent().norm(); }
  [[nodiscard]] bool contains(const Vec& x, double tol = 1e-12) const;
};

/// Circular (2D) or spherical (3D) subregion whose density is pinned to `value`.
struct HoleConstraint {
  Vec center;
  double radius = 0.0;
  double value = 0.0;

  [[nodiscard]] bool contains(const Eigen::Ref<const Vec>& x) const { return (x - center).norm() < radius; }
};

struct DomainSpec {
  Box box;
  std::vector<HoleConstraint> holes;
};

/// Zero set of a Dirichlet region: an axis-aligned plane, a point, or a circle/sphere surface.
struct Shape {
  enum class Kind { plane, point, sphere };
  Kind kind = Kind::plane;
  int axis = 0;
  double offset = 0.0;
  Vec center;
  double radius = 0.0;
};

/// Displacement components in `components` are held at `value` on the zero set of `shape`.
struct DirichletRegion {
  Shape shape;
  std::vector<int> components;
  Vec value;
};

struct PointLoad {
  Vec location;
  Vec force;
};

/// Load spread uniformly over an axis-aligned region (degenerate axes allowed: segments, faces).
/// `force` is the total force; the traction density is force / measure.
struct DistributedLoad {
  Box region;
  Vec force;
  int samples = 256;

  [[nodiscard]] Vec traction() const { return force / region.measure(); }
};

struct Material {
  double E1 = 1.0;
  double nu = 0.3;
  double penalty = 3.0;
  /// E_min = min_ratio * E1 when use_floor is set, else 0.
  double min_ratio = 1e-4;
  bool use_floor = true;

  [[nodiscard]] double E_min() const { return use_floor ? min_ratio * E1 : 0.0; }
  void validate(int dim) const;
};

struct ProblemSpec {
  std::string name;
  DomainSpec domain;
  std::vector<DirichletRegion> dirichlet;
  std::vector<PointLoad> point_loads;
  std::vector<DistributedLoad> distributed_loads;
  Material material;
  double volume_fraction = 0.5;
  /// Stratified sampling grid; also the FEM mesh used for evaluation.
  std::vector<int> grid;
  /// Characteristic displacement magnitude; the displacement net predicts u / displacement_scale.
  double displacement_scale = 1.0;

  [[nodiscard]] int dim() const { return domain.box.dim(); }
  /// Throws ConfigError describing the first inconsistency found.
  void validate() const;
  /// Prescribed value per component (zero where unconstrained).
  [[nodiscard]] Vec prescribed_displacement() const;
};

/// Raw distance from x to the zero set of a shape.
double shape_distance(const Shape& shape, const Eigen::Ref<const Vec>& x);

}  // namespace nto
