#include "nto/elasticity.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <string>

#include "nto/error.hpp"
#include "nto/random.hpp"

namespace nto {

namespace {

constexpr std::uint64_t kLoadStream = 0x10ad0000;
constexpr Eigen::Index kEvalChunk = 8192;

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Normalized distance to a region's zero set and its gradient at x.
double region_distance(const Shape& shape, const Box& box, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> grad) {
  grad.setZero();
  switch (shape.kind) {
    case Shape::Kind::plane: {
      const double scale = box.extent()(shape.axis);
      const double r = x(shape.axis) - shape.offset;
      grad(shape.axis) = sign_of(r) / scale;
      return std::abs(r) / scale;
    }
    case Shape::Kind::point: {
      const double diag = box.diagonal();
      const Vec delta = x - shape.center;
      const double r = delta.norm();
      if (r > 0.0) grad = delta / (r * diag);
      return r / diag;
    }
    case Shape::Kind::sphere: {
      const double diag = box.diagonal();
      const Vec delta = x - shape.center;
      const double r = delta.norm();
      const double g = r - shape.radius;
      if (r > 0.0) grad = sign_of(g) * delta / (r * diag);
      return std::abs(g) / diag;
    }
  }
  return 0.0;
}

ad::Var strain_row(ad::Tape& tape, const DisplacementField& u, int i, int j) {
  ad::Var a = tape.slice_rows(u.jacobian[static_cast<std::size_t>(j)], i, 1);
  if (i == j) return a;
  ad::Var b = tape.slice_rows(u.jacobian[static_cast<std::size_t>(i)], j, 1);
  return 0.5 * (a + b);
}

template <typename Fn>
void for_chunks(Eigen::Index n, Fn&& fn) {
  for (Eigen::Index start = 0; start < n; start += kEvalChunk) fn(start, std::min(kEvalChunk, n - start));
}

}  // namespace

BoundaryData boundary_data(const ProblemSpec& problem, const Eigen::MatrixXd& points) {
  const int dim = problem.dim();
  const Eigen::Index n = points.cols();
  BoundaryData bc;
  bc.distance = Eigen::MatrixXd::Ones(dim, n);
  bc.distance_grad.assign(static_cast<std::size_t>(dim), Eigen::MatrixXd::Zero(dim, n));
  bc.prescribed = problem.prescribed_displacement();

  Vec g(dim);
  for (const auto& region : problem.dirichlet) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = region_distance(region.shape, problem.domain.box, points.col(i).head(dim), g);
      for (int c : region.components) {
        // product rule: grad(d_old * d) = grad(d_old) * d + d_old * grad(d)
        const double old = bc.distance(c, i);
        for (int k = 0; k < dim; ++k) {
          auto& gk = bc.distance_grad[static_cast<std::size_t>(k)](c, i);
          gk = gk * d + old * g(k);
        }
        bc.distance(c, i) = old * d;
      }
    }
  }
  return bc;
}

DisplacementField displacement(ad::Tape& tape, const ad::DualBlock& phi, const BoundaryData& bc, double scale) {
  DisplacementField u;
  ad::Var d = tape.constant(bc.distance);
  ad::Var phi_s = tape.scale(phi.value, scale);
  u.value = d * phi_s;
  if (bc.prescribed.cwiseAbs().maxCoeff() > 0.0) u.value = u.value + tape.constant(Eigen::MatrixXd(bc.prescribed));
  for (std::size_t k = 0; k < phi.tangents.size(); ++k) {
    ad::Var grad_d = tape.constant(bc.distance_grad[k]);
    u.jacobian.push_back(grad_d * phi_s + d * tape.scale(phi.tangents[k], scale));
  }
  return u;
}

ad::Var displacement_values(ad::Tape& tape, ad::Var phi, const BoundaryData& bc, double scale) {
  ad::Var u = tape.constant(bc.distance) * tape.scale(phi, scale);
  if (bc.prescribed.cwiseAbs().maxCoeff() > 0.0) u = u + tape.constant(Eigen::MatrixXd(bc.prescribed));
  return u;
}

Eigen::MatrixXd displacement_values(const Eigen::MatrixXd& phi, const BoundaryData& bc, double scale) {
  Eigen::MatrixXd u = scale * bc.distance.cwiseProduct(phi);
  u.colwise() += bc.prescribed;
  return u;
}

Strain<ad::Var> strain(ad::Tape& tape, const DisplacementField& u) {
  Strain<ad::Var> eps;
  eps.dim = static_cast<int>(u.jacobian.size());
  if (eps.dim == 2) {
    eps.c = {strain_row(tape, u, 0, 0), strain_row(tape, u, 1, 1), strain_row(tape, u, 0, 1)};
  } else if (eps.dim == 3) {
    eps.c = {strain_row(tape, u, 0, 0), strain_row(tape, u, 1, 1), strain_row(tape, u, 2, 2),
             strain_row(tape, u, 0, 1), strain_row(tape, u, 1, 2), strain_row(tape, u, 0, 2)};
  } else {
    throw ContractViolation("strain needs a 2D or 3D displacement Jacobian");
  }
  return eps;
}

Strain<Eigen::ArrayXd> strain(const std::vector<Eigen::MatrixXd>& jac) {
  Strain<Eigen::ArrayXd> eps;
  eps.dim = static_cast<int>(jac.size());
  auto e = [&](int i, int j) -> Eigen::ArrayXd {
    if (i == j) return jac[static_cast<std::size_t>(j)].row(i).transpose().array();
    return 0.5 * (jac[static_cast<std::size_t>(j)].row(i).transpose().array() +
                  jac[static_cast<std::size_t>(i)].row(j).transpose().array());
  };
  if (eps.dim == 2) {
    eps.c[0] = e(0, 0);
    eps.c[1] = e(1, 1);
    eps.c[2] = e(0, 1);
  } else if (eps.dim == 3) {
    eps.c[0] = e(0, 0);
    eps.c[1] = e(1, 1);
    eps.c[2] = e(2, 2);
    eps.c[3] = e(0, 1);
    eps.c[4] = e(1, 2);
    eps.c[5] = e(0, 2);
  } else {
    throw ContractViolation("strain needs a 2D or 3D displacement Jacobian");
  }
  return eps;
}

Eigen::MatrixXd strain_tensor(const Eigen::MatrixXd& grad_u) {
  if (grad_u.rows() != grad_u.cols()) throw ContractViolation("strain needs a square displacement gradient");
  return 0.5 * (grad_u + grad_u.transpose());
}

double lame_lambda(double E, double nu) {
  if (nu >= 0.5) throw ConfigError("nu = 0.5 makes the Lame parameter lambda singular");
  return E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
}

double lame_mu(double E, double nu) { return E / (2.0 * (1.0 + nu)); }

Eigen::MatrixXd stress_tensor(const Eigen::MatrixXd& eps, double E, double nu, int dim) {
  if (eps.rows() != dim || eps.cols() != dim) throw ContractViolation("strain tensor shape does not match dimension");
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);
  if (dim == 2) return (E / (1.0 - nu * nu)) * ((1.0 - nu) * eps + nu * eps.trace() * I);
  if (dim == 3) return lame_lambda(E, nu) * eps.trace() * I + 2.0 * lame_mu(E, nu) * eps;
  throw ConfigError("stress is defined for 2D and 3D only");
}

double pointwise_compliance(const Eigen::MatrixXd& eps, const Eigen::MatrixXd& sigma) {
  return eps.cwiseProduct(sigma).sum();
}

void LoadSamples::append(const LoadSamples& other) {
  if (other.size() == 0) return;
  if (size() == 0) {
    *this = other;
    return;
  }
  Eigen::MatrixXd in(inputs.rows(), size() + other.size());
  in << inputs, other.inputs;
  Eigen::MatrixXd f(forces.rows(), size() + other.size());
  f << forces, other.forces;
  inputs = std::move(in);
  forces = std::move(f);
}

LoadSamples load_samples(const ProblemSpec& problem, std::uint64_t seed, const Vec& extra, double weight) {
  const int dim = problem.dim();
  Eigen::Index m = static_cast<Eigen::Index>(problem.point_loads.size());
  for (const auto& load : problem.distributed_loads) m += load.samples;
  LoadSamples out;
  out.inputs.resize(dim + extra.size(), m);
  out.forces.resize(dim, m);
  Eigen::Index col = 0;
  for (const auto& load : problem.point_loads) {
    out.inputs.col(col).head(dim) = load.location;
    out.inputs.col(col).tail(extra.size()) = extra;
    out.forces.col(col) = weight * load.force;
    ++col;
  }
  for (std::size_t i = 0; i < problem.distributed_loads.size(); ++i) {
    const auto& load = problem.distributed_loads[i];
    const Eigen::MatrixXd pts = stratified_region(load.region, load.samples, derive_seed(seed, kLoadStream, i));
    const Vec share = weight * load.force / static_cast<double>(load.samples);
    for (Eigen::Index j = 0; j < pts.cols(); ++j, ++col) {
      out.inputs.col(col).head(dim) = pts.col(j);
      out.inputs.col(col).tail(extra.size()) = extra;
      out.forces.col(col) = share;
    }
  }
  return out;
}

ad::Var external_work(ad::Tape& tape, const BoundNetwork& displacement_net, const LoadSamples& loads,
                      const ProblemSpec& problem) {
  if (loads.size() == 0) return tape.constant(0.0);
  const int dim = problem.dim();
  const BoundaryData bc = boundary_data(problem, loads.inputs.topRows(dim));
  ad::Var phi = forward(tape, displacement_net, loads.inputs);
  ad::Var u = displacement_values(tape, phi, bc, problem.displacement_scale);
  return tape.sum(u * tape.constant(loads.forces));
}

SimLoss sim_loss(ad::Tape& tape, const BoundNetwork& displacement_net, const Eigen::MatrixXd& inputs,
                 double sample_weight, const Eigen::VectorXd& modulus, const LoadSamples& loads,
                 const ProblemSpec& problem) {
  const int dim = problem.dim();
  if (modulus.size() != inputs.cols()) throw ContractViolation("one modulus value per sample is required");
  const BoundaryData bc = boundary_data(problem, inputs.topRows(dim));
  const ad::DualBlock phi =
      eval_with_spatial_jacobian(tape, displacement_net, inputs, static_cast<std::size_t>(dim));
  const DisplacementField u = displacement(tape, phi, bc, problem.displacement_scale);
  const ad::Var e = unit_compliance(strain(tape, u), problem.material.nu);

  SimLoss out;
  out.internal_energy = tape.scale(tape.sum(e * tape.constant(Eigen::MatrixXd(modulus.transpose()))),
                                   0.5 * sample_weight);
  out.external_work = external_work(tape, displacement_net, loads, problem);
  out.loss = out.internal_energy - out.external_work;
  const double value = out.loss.value()(0, 0);
  if (!std::isfinite(value)) {
    throw NumericalError("simulation loss is not finite (internal energy " +
                         std::to_string(out.internal_energy.value()(0, 0)) + ", work " +
                         std::to_string(out.external_work.value()(0, 0)) + ")");
  }
  return out;
}

Eigen::VectorXd unit_compliance_at(const NetworkParams& displacement_net, const Eigen::MatrixXd& inputs,
                                   const ProblemSpec& problem) {
  const int dim = problem.dim();
  Eigen::VectorXd out(inputs.cols());
  ad::Tape tape;
  for_chunks(inputs.cols(), [&](Eigen::Index start, Eigen::Index count) {
    tape.reset();
    const Eigen::MatrixXd chunk = inputs.middleCols(start, count);
    const BoundNetwork net = bind(tape, displacement_net);
    const ad::DualBlock phi = eval_with_spatial_jacobian(tape, net, chunk, static_cast<std::size_t>(dim));
    const BoundaryData bc = boundary_data(problem, chunk.topRows(dim));
    std::vector<Eigen::MatrixXd> jac;
    const double scale = problem.displacement_scale;
    const Eigen::MatrixXd& p = phi.value.value();
    for (int k = 0; k < dim; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      jac.push_back(scale * (bc.distance_grad[uk].cwiseProduct(p) + bc.distance.cwiseProduct(phi.tangents[uk].value())));
    }
    out.segment(start, count) = unit_compliance(strain(jac), problem.material.nu).matrix();
  });
  return out;
}

Eigen::MatrixXd displacement_at(const NetworkParams& displacement_net, const Eigen::MatrixXd& inputs,
                                const ProblemSpec& problem) {
  const int dim = problem.dim();
  Eigen::MatrixXd out(dim, inputs.cols());
  for_chunks(inputs.cols(), [&](Eigen::Index start, Eigen::Index count) {
    const Eigen::MatrixXd chunk = inputs.middleCols(start, count);
    const BoundaryData bc = boundary_data(problem, chunk.topRows(dim));
    out.middleCols(start, count) = displacement_values(forward(displacement_net, chunk), bc, problem.displacement_scale);
  });
  return out;
}

std::vector<std::size_t> degenerate_point_loads(const ProblemSpec& problem) {
  std::vector<std::size_t> out;
  const Vec prescribed = problem.prescribed_displacement();
  for (std::size_t i = 0; i < problem.point_loads.size(); ++i) {
    const auto& load = problem.point_loads[i];
    const BoundaryData bc = boundary_data(problem, Eigen::MatrixXd(load.location));
    bool does_work = false;
    for (int c = 0; c < problem.dim(); ++c) {
      if (load.force(c) != 0.0 && (bc.distance(c, 0) != 0.0 || prescribed(c) != 0.0)) does_work = true;
    }
    if (!does_work) {
      spdlog::warn("point load {} sits on a clamped boundary and does no work", i);
      out.push_back(i);
    }
  }
  return out;
}

}  // namespace nto
