#include "nto/canonical.hpp"

#include "nto/error.hpp"

namespace nto {

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

DirichletRegion clamp_plane(int axis, double offset, std::vector<int> components, int dim) {
  DirichletRegion r;
  r.shape.kind = Shape::Kind::plane;
  r.shape.axis = axis;
  r.shape.offset = offset;
  r.components = std::move(components);
  r.value = Vec::Zero(dim);
  return r;
}

ProblemSpec beam2d(const std::string& name, double length, Vec load_at, std::vector<int> grid) {
  ProblemSpec p;
  p.name = name;
  p.domain.box = {v2(0.0, 0.0), v2(length, 0.5)};
  p.dirichlet.push_back(clamp_plane(0, 0.0, {0, 1}, 2));
  p.point_loads.push_back({std::move(load_at), v2(0.0, -1.0)});
  p.grid = std::move(grid);
  return p;
}

}  // namespace

std::vector<std::string> canonical_names() {
  return {"ShortBeam", "LongBeam", "Distributed", "Bridge", "Beam3D", "Bridge3D", "Cantilever"};
}

ProblemSpec canonical_problem(const std::string& name) {
  ProblemSpec p;
  if (name == "ShortBeam") {
    p = beam2d(name, 1.5, v2(1.5, 0.25), {150, 50});
    p.displacement_scale = 100.0;
  } else if (name == "LongBeam") {
    p = beam2d(name, 2.0, v2(2.0, 0.0), {200, 50});
    p.displacement_scale = 300.0;
  } else if (name == "Distributed") {
    p.name = name;
    p.domain.box = {v2(0.0, 0.0), v2(1.5, 0.5)};
    p.dirichlet.push_back(clamp_plane(0, 0.0, {0, 1}, 2));
    p.distributed_loads.push_back({Box{v2(0.0, 0.5), v2(1.5, 0.5)}, v2(0.0, -1.0), 256});
    p.grid = {150, 50};
    p.displacement_scale = 30.0;
  } else if (name == "Bridge") {
    p.name = name;
    p.domain.box = {v2(0.0, 0.0), v2(2.0, 1.0)};
    p.dirichlet.push_back(clamp_plane(0, 0.0, {0, 1}, 2));
    p.dirichlet.push_back(clamp_plane(0, 2.0, {0, 1}, 2));
    p.point_loads.push_back({v2(1.0, 0.0), v2(0.0, -1.0)});
    p.grid = {100, 50};
    p.displacement_scale = 5.0;
  } else if (name == "Beam3D") {
    // half of a 2 x 1 x 1 cantilever; z = 0.5 is the symmetry plane (u_z = 0)
    p.name = name;
    p.domain.box = {v3(0.0, 0.0, 0.0), v3(2.0, 1.0, 0.5)};
    p.dirichlet.push_back(clamp_plane(0, 0.0, {0, 1, 2}, 3));
    p.dirichlet.push_back(clamp_plane(2, 0.5, {2}, 3));
    p.point_loads.push_back({v3(2.0, 0.5, 0.5), v3(0.0, -0.5, 0.0)});
    p.grid = {80, 40, 20};
    p.volume_fraction = 0.3;
    p.displacement_scale = 20.0;
  } else if (name == "Bridge3D") {
    // quarter of a 2 x 1 x 1 bridge clamped at both ends; x = 1 and z = 0.5 are symmetry planes
    p.name = name;
    p.domain.box = {v3(0.0, 0.0, 0.0), v3(1.0, 1.0, 0.5)};
    p.dirichlet.push_back(clamp_plane(0, 0.0, {0, 1, 2}, 3));
    p.dirichlet.push_back(clamp_plane(0, 1.0, {0}, 3));
    p.dirichlet.push_back(clamp_plane(2, 0.5, {2}, 3));
    p.distributed_loads.push_back({Box{v3(0.0, 1.0, 0.0), v3(1.0, 1.0, 0.5)}, v3(0.0, -0.25, 0.0), 512});
    p.grid = {40, 40, 20};
    p.volume_fraction = 0.2;
    p.displacement_scale = 2.0;
  } else if (name == "Cantilever") {
    p.name = name;
    p.domain.box = {v2(0.0, 0.0), v2(1.5, 0.5)};
    p.dirichlet.push_back(clamp_plane(0, 0.0, {0, 1}, 2));
    p.distributed_loads.push_back({Box{v2(1.5, 0.0), v2(1.5, 0.5)}, v2(0.0, -1.0), 64});
    p.grid = {60, 20};
    p.volume_fraction = 0.5;
    p.displacement_scale = 100.0;
  } else {
    throw ConfigError("unknown canonical problem '" + name + "'");
  }
  p.validate();
  return p;
}

}  // namespace nto
