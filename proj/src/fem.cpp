#include "nto/fem.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "nto/error.hpp"

namespace nto::fem {

namespace {

// Corner signs in natural coordinates, counterclockwise, bottom face first in 3D.
constexpr std::array<std::array<int, 3>, 8> kCorners = {{{-1, -1, -1},
                                                         {1, -1, -1},
                                                         {1, 1, -1},
                                                         {-1, 1, -1},
                                                         {-1, -1, 1},
                                                         {1, -1, 1},
                                                         {1, 1, 1},
                                                         {-1, 1, 1}}};

Eigen::MatrixXd constitutive(int dim, double nu) {
  if (dim == 2) {
    Eigen::Matrix3d D;
    D << 1.0, nu, 0.0, nu, 1.0, 0.0, 0.0, 0.0, (1.0 - nu) / 2.0;
    return D / (1.0 - nu * nu);
  }
  const double lambda = nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = 1.0 / (2.0 * (1.0 + nu));
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(6, 6);
  D.topLeftCorner(3, 3).setConstant(lambda);
  for (int i = 0; i < 3; ++i) D(i, i) += 2.0 * mu;
  for (int i = 3; i < 6; ++i) D(i, i) = mu;
  return D;
}

template <int N>
void apply_impl(const FemModel& model, const Eigen::VectorXd& modulus, const Eigen::VectorXd& x, Eigen::VectorXd& y) {
  const Eigen::Matrix<double, N, N> ke = model.ke;
  y.setZero(x.size());
  Eigen::Matrix<double, N, 1> ue;
  const int ne = static_cast<int>(model.edofs.rows());
  for (int e = 0; e < ne; ++e) {
    const int* dofs = model.edofs.row(e).data();
    for (int i = 0; i < N; ++i) ue(i) = x(dofs[i]);
    const Eigen::Matrix<double, N, 1> fe = modulus(e) * (ke * ue);
    for (int i = 0; i < N; ++i) y(dofs[i]) += fe(i);
  }
}

Eigen::VectorXd element_modulus(const FemModel& model, const Eigen::VectorXd& rho) {
  const double e_min = model.material.E_min();
  const double range = model.material.E1 - e_min;
  return (e_min + rho.array().pow(model.material.penalty) * range).matrix();
}

// Bilinear/trilinear shape-function weights of a point inside the grid.
void scatter_point(const FemModel& model, const Vec& x, const Vec& force, Eigen::VectorXd& f) {
  std::array<int, 3> cell{};
  std::array<double, 3> xi{};
  for (int a = 0; a < model.dim; ++a) {
    const double t = (x(a) - model.domain.lo(a)) / model.h(a);
    const int c = std::clamp(static_cast<int>(std::floor(t)), 0, model.nel[static_cast<std::size_t>(a)] - 1);
    cell[static_cast<std::size_t>(a)] = c;
    xi[static_cast<std::size_t>(a)] = std::clamp(t - c, 0.0, 1.0);
  }
  const int corners = model.dim == 2 ? 4 : 8;
  for (int k = 0; k < corners; ++k) {
    std::array<int, 3> node{};
    double w = 1.0;
    for (int a = 0; a < model.dim; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      const bool upper = kCorners[static_cast<std::size_t>(k)][ua] > 0;
      node[ua] = cell[ua] + (upper ? 1 : 0);
      w *= upper ? xi[ua] : 1.0 - xi[ua];
    }
    if (w == 0.0) continue;
    const int n = model.node_index(std::span<const int>(node.data(), static_cast<std::size_t>(model.dim)));
    for (int c = 0; c < model.dim; ++c) f(n * model.dim + c) += w * force(c);
  }
}

}  // namespace

int FemModel::element_count() const {
  int n = 1;
  for (int v : nel) n *= v;
  return n;
}

std::vector<int> FemModel::node_dims() const {
  std::vector<int> d;
  for (int v : nel) d.push_back(v + 1);
  return d;
}

int FemModel::node_count() const {
  int n = 1;
  for (int v : nel) n *= v + 1;
  return n;
}

int FemModel::node_index(std::span<const int> ijk) const {
  int idx = 0;
  int stride = 1;
  for (int a = 0; a < dim; ++a) {
    idx += ijk[static_cast<std::size_t>(a)] * stride;
    stride *= nel[static_cast<std::size_t>(a)] + 1;
  }
  return idx;
}

Vec FemModel::node_position(int node) const {
  Vec p(dim);
  for (int a = 0; a < dim; ++a) {
    const int n = nel[static_cast<std::size_t>(a)] + 1;
    p(a) = domain.lo(a) + (node % n) * h(a);
    node /= n;
  }
  return p;
}

Vec FemModel::element_center(int e) const {
  Vec p(dim);
  for (int a = 0; a < dim; ++a) {
    const int n = nel[static_cast<std::size_t>(a)];
    p(a) = domain.lo(a) + ((e % n) + 0.5) * h(a);
    e /= n;
  }
  return p;
}

Eigen::MatrixXd element_stiffness(int dim, const Vec& h, double nu) {
  if (dim != 2 && dim != 3) throw ConfigError("element stiffness is defined for 2D and 3D");
  const int corners = dim == 2 ? 4 : 8;
  const int ndof = corners * dim;
  const int nstrain = dim == 2 ? 3 : 6;
  const Eigen::MatrixXd D = constitutive(dim, nu);
  Eigen::MatrixXd ke = Eigen::MatrixXd::Zero(ndof, ndof);
  const double g = 1.0 / std::sqrt(3.0);
  double det = 1.0;
  for (int a = 0; a < dim; ++a) det *= h(a) / 2.0;
  const int points = dim == 2 ? 4 : 8;
  for (int q = 0; q < points; ++q) {
    const auto& gp = kCorners[static_cast<std::size_t>(q)];
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(nstrain, ndof);
    for (int k = 0; k < corners; ++k) {
      const auto& c = kCorners[static_cast<std::size_t>(k)];
      std::array<double, 3> dN{};
      for (int a = 0; a < dim; ++a) {
        double v = 0.5 * c[static_cast<std::size_t>(a)];
        for (int b = 0; b < dim; ++b) {
          if (b != a) v *= 0.5 * (1.0 + c[static_cast<std::size_t>(b)] * gp[static_cast<std::size_t>(b)] * g);
        }
        dN[static_cast<std::size_t>(a)] = v * 2.0 / h(a);
      }
      const int col = k * dim;
      if (dim == 2) {
        B(0, col) = dN[0];
        B(1, col + 1) = dN[1];
        B(2, col) = dN[1];
        B(2, col + 1) = dN[0];
      } else {
        B(0, col) = dN[0];
        B(1, col + 1) = dN[1];
        B(2, col + 2) = dN[2];
        B(3, col) = dN[1];
        B(3, col + 1) = dN[0];
        B(4, col + 1) = dN[2];
        B(4, col + 2) = dN[1];
        B(5, col) = dN[2];
        B(5, col + 2) = dN[0];
      }
    }
    ke += B.transpose() * D * B * det;
  }
  return 0.5 * (ke + ke.transpose());
}

FemModel build_model(const ProblemSpec& problem, const std::vector<int>& nel) {
  problem.validate();
  FemModel m;
  m.dim = problem.dim();
  if (static_cast<int>(nel.size()) != m.dim) throw ConfigError("mesh needs one element count per axis");
  for (int v : nel) {
    if (v < 1) throw ConfigError("mesh element counts must be positive");
  }
  m.nel = nel;
  m.domain = problem.domain.box;
  m.material = problem.material;
  m.h = m.domain.extent();
  for (int a = 0; a < m.dim; ++a) m.h(a) /= nel[static_cast<std::size_t>(a)];
  m.ke = element_stiffness(m.dim, m.h, problem.material.nu);

  const int ne = m.element_count();
  const int corners = m.dim == 2 ? 4 : 8;
  m.edofs.resize(ne, corners * m.dim);
  for (int e = 0; e < ne; ++e) {
    std::array<int, 3> cell{};
    int rest = e;
    for (int a = 0; a < m.dim; ++a) {
      cell[static_cast<std::size_t>(a)] = rest % nel[static_cast<std::size_t>(a)];
      rest /= nel[static_cast<std::size_t>(a)];
    }
    for (int k = 0; k < corners; ++k) {
      std::array<int, 3> node{};
      for (int a = 0; a < m.dim; ++a) {
        node[static_cast<std::size_t>(a)] =
            cell[static_cast<std::size_t>(a)] + (kCorners[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)] > 0);
      }
      const int n = m.node_index(std::span<const int>(node.data(), static_cast<std::size_t>(m.dim)));
      for (int c = 0; c < m.dim; ++c) m.edofs(e, k * m.dim + c) = n * m.dim + c;
    }
  }

  const int nn = m.node_count();
  m.fixed.assign(static_cast<std::size_t>(m.dof_count()), 0);
  m.prescribed = Eigen::VectorXd::Zero(m.dof_count());
  const double h_min = m.h.minCoeff();
  for (const auto& region : problem.dirichlet) {
    double tol = 1e-9 * m.domain.diagonal();
    switch (region.shape.kind) {
      case Shape::Kind::plane:
        tol = 0.5 * m.h(region.shape.axis) * (1.0 - 1e-9);
        break;
      case Shape::Kind::point:
      case Shape::Kind::sphere:
        tol = 0.5 * h_min * (1.0 + 1e-9);
        break;
    }
    int hits = 0;
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int n = 0; n < nn; ++n) {
      const double d = shape_distance(region.shape, m.node_position(n));
      if (d < best) {
        best = d;
        nearest = n;
      }
      if (d <= tol) {
        ++hits;
        for (int c : region.components) {
          m.fixed[static_cast<std::size_t>(n * m.dim + c)] = 1;
          m.prescribed(n * m.dim + c) = region.value(c);
        }
      }
    }
    if (hits == 0) {
      for (int c : region.components) {
        m.fixed[static_cast<std::size_t>(nearest * m.dim + c)] = 1;
        m.prescribed(nearest * m.dim + c) = region.value(c);
      }
    }
  }

  m.force = Eigen::VectorXd::Zero(m.dof_count());
  for (const auto& load : problem.point_loads) scatter_point(m, load.location, load.force, m.force);
  for (const auto& load : problem.distributed_loads) {
    const Vec ext = load.region.extent();
    std::vector<int> counts(static_cast<std::size_t>(m.dim), 1);
    int total = 1;
    for (int a = 0; a < m.dim; ++a) {
      if (ext(a) > 0.0) counts[static_cast<std::size_t>(a)] = 16 * std::max(1, static_cast<int>(std::ceil(ext(a) / m.h(a))));
      total *= counts[static_cast<std::size_t>(a)];
    }
    const Vec share = load.force / static_cast<double>(total);
    for (int i = 0; i < total; ++i) {
      Vec x(m.dim);
      int rest = i;
      for (int a = 0; a < m.dim; ++a) {
        const int n = counts[static_cast<std::size_t>(a)];
        x(a) = load.region.lo(a) + ((rest % n) + 0.5) * ext(a) / n;
        rest /= n;
      }
      scatter_point(m, x, share, m.force);
    }
  }

  m.passive.assign(static_cast<std::size_t>(ne), 0);
  m.passive_value = Eigen::VectorXd::Zero(ne);
  for (int e = 0; e < ne; ++e) {
    const Vec c = m.element_center(e);
    for (const auto& hole : problem.domain.holes) {
      if (hole.contains(c)) {
        m.passive[static_cast<std::size_t>(e)] = 1;
        m.passive_value(e) = hole.value;
      }
    }
  }
  check_supports(m);
  return m;
}

void check_supports(const FemModel& model) {
  const int dim = model.dim;
  const int modes = dim == 2 ? 3 : 6;
  const Vec center = 0.5 * (model.domain.lo + model.domain.hi);
  const double scale = model.domain.diagonal();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(modes, modes);
  const int nn = model.node_count();
  for (int n = 0; n < nn; ++n) {
    const Vec p = (model.node_position(n) - center) / scale;
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(dim, modes);
    for (int a = 0; a < dim; ++a) R(a, a) = 1.0;
    if (dim == 2) {
      R(0, 2) = -p(1);
      R(1, 2) = p(0);
    } else {
      // rotations about x, y, z
      R(1, 3) = -p(2);
      R(2, 3) = p(1);
      R(0, 4) = p(2);
      R(2, 4) = -p(0);
      R(0, 5) = -p(1);
      R(1, 5) = p(0);
    }
    for (int c = 0; c < dim; ++c) {
      if (model.fixed[static_cast<std::size_t>(n * dim + c)]) gram += R.row(c).transpose() * R.row(c);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double cutoff = 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff());
  static const char* names2[] = {"translation x", "translation y", "rotation in plane"};
  static const char* names3[] = {"translation x", "translation y", "translation z",
                                 "rotation about x", "rotation about y", "rotation about z"};
  std::vector<std::string> missing;
  for (int i = 0; i < modes; ++i) {
    if (eig.eigenvalues()(i) > cutoff) continue;
    Eigen::Index k = 0;
    eig.eigenvectors().col(i).cwiseAbs().maxCoeff(&k);
    missing.emplace_back(dim == 2 ? names2[k] : names3[k]);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "stiffness matrix is singular: supports do not restrain";
    for (std::size_t i = 0; i < missing.size(); ++i) msg << (i ? ", " : " ") << missing[i];
    throw NumericalError(msg.str());
  }
}

void apply_stiffness(const FemModel& model, const Eigen::VectorXd& modulus, const Eigen::VectorXd& x,
                     Eigen::VectorXd& y) {
  if (model.dim == 2) {
    apply_impl<8>(model, modulus, x, y);
  } else {
    apply_impl<24>(model, modulus, x, y);
  }
}

SolveStats solve(const FemModel& model, const Eigen::VectorXd& rho, Eigen::VectorXd& u, double tol,
                 int max_iterations) {
  const int n = model.dof_count();
  if (rho.size() != model.element_count()) throw ContractViolation("density grid does not match the mesh");
  const Eigen::VectorXd E = element_modulus(model, rho);
  if (u.size() != n) u = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (model.fixed[static_cast<std::size_t>(i)]) u(i) = model.prescribed(i);
  }
  if (max_iterations <= 0) max_iterations = std::max(1000, 10 * n);

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd ke_diag = model.ke.diagonal();
  for (int e = 0; e < model.edofs.rows(); ++e) {
    for (int i = 0; i < model.edofs.cols(); ++i) diag(model.edofs(e, i)) += E(e) * ke_diag(i);
  }
  auto zero_fixed = [&](Eigen::VectorXd& v) {
    for (int i = 0; i < n; ++i) {
      if (model.fixed[static_cast<std::size_t>(i)]) v(i) = 0.0;
    }
  };

  Eigen::VectorXd r(n);
  Eigen::VectorXd Ap(n);
  apply_stiffness(model, E, u, Ap);
  r = model.force - Ap;
  zero_fixed(r);
  Eigen::VectorXd lift = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (model.fixed[static_cast<std::size_t>(i)]) lift(i) = model.prescribed(i);
  }
  Eigen::VectorXd b(n);
  apply_stiffness(model, E, lift, b);
  b = model.force - b;
  zero_fixed(b);
  const double b_norm = b.norm();
  SolveStats stats;
  if (b_norm == 0.0) {
    u = lift;
    return stats;
  }
  Eigen::VectorXd inv_diag = diag.cwiseInverse();
  Eigen::VectorXd z = r.cwiseProduct(inv_diag);
  zero_fixed(z);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  stats.relative_residual = r.norm() / b_norm;
  while (stats.relative_residual > tol && stats.iterations < max_iterations) {
    apply_stiffness(model, E, p, Ap);
    zero_fixed(Ap);
    const double alpha = rz / p.dot(Ap);
    u += alpha * p;
    r -= alpha * Ap;
    z = r.cwiseProduct(inv_diag);
    zero_fixed(z);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
    ++stats.iterations;
    stats.relative_residual = r.norm() / b_norm;
  }
  if (!std::isfinite(stats.relative_residual)) throw NumericalError("CG produced a non-finite residual");
  if (stats.relative_residual > tol) {
    spdlog::warn("CG stopped at relative residual {:.3g} after {} iterations", stats.relative_residual,
                 stats.iterations);
  }
  return stats;
}

Eigen::VectorXd element_energy(const FemModel& model, const Eigen::VectorXd& u) {
  const int ne = static_cast<int>(model.edofs.rows());
  Eigen::VectorXd ce(ne);
  Eigen::VectorXd ue(model.edofs.cols());
  for (int e = 0; e < ne; ++e) {
    for (int i = 0; i < ue.size(); ++i) ue(i) = u(model.edofs(e, i));
    ce(e) = ue.dot(model.ke * ue);
  }
  return ce;
}

double compliance(const FemModel& model, const Eigen::VectorXd& rho, Eigen::VectorXd* u_out) {
  Eigen::VectorXd local;
  Eigen::VectorXd& u = u_out ? *u_out : local;
  solve(model, rho, u);
  return model.force.dot(u);
}

SimpResult simp_optimize(const ProblemSpec& problem, const std::vector<int>& nel, const SimpOptions& options) {
  const FemModel model = build_model(problem, nel);
  const int ne = model.element_count();
  const double vf = problem.volume_fraction;
  const Material& mat = problem.material;

  // Sensitivity filter weights in element-width units.
  const double rmin = options.filter_radius;
  const int reach = static_cast<int>(std::ceil(rmin)) - 1;
  std::vector<std::vector<std::pair<int, double>>> nbrs(static_cast<std::size_t>(ne));
  std::vector<double> hsum(static_cast<std::size_t>(ne), 0.0);
  for (int e = 0; e < ne; ++e) {
    std::array<int, 3> c{};
    int rest = e;
    for (int a = 0; a < model.dim; ++a) {
      c[static_cast<std::size_t>(a)] = rest % nel[static_cast<std::size_t>(a)];
      rest /= nel[static_cast<std::size_t>(a)];
    }
    const int zr = model.dim == 3 ? reach : 0;
    for (int dz = -zr; dz <= zr; ++dz) {
      for (int dy = -reach; dy <= reach; ++dy) {
        for (int dx = -reach; dx <= reach; ++dx) {
          const std::array<int, 3> o = {c[0] + dx, c[1] + dy, c[2] + dz};
          bool inside = true;
          int idx = 0;
          int stride = 1;
          for (int a = 0; a < model.dim; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            if (o[ua] < 0 || o[ua] >= nel[ua]) inside = false;
            idx += o[ua] * stride;
            stride *= nel[ua];
          }
          if (!inside) continue;
          const double w = rmin - std::sqrt(static_cast<double>(dx * dx + dy * dy + dz * dz));
          if (w <= 0.0) continue;
          nbrs[static_cast<std::size_t>(e)].emplace_back(idx, w);
          hsum[static_cast<std::size_t>(e)] += w;
        }
      }
    }
  }

  SimpResult res;
  Eigen::VectorXd x = Eigen::VectorXd::Constant(ne, vf);
  for (int e = 0; e < ne; ++e) {
    if (model.passive[static_cast<std::size_t>(e)]) x(e) = model.passive_value(e);
  }
  Eigen::VectorXd u;
  Eigen::VectorXd xnew(ne);
  Eigen::VectorXd dc(ne);
  Eigen::VectorXd dcf(ne);
  for (int it = 1; it <= options.max_iterations; ++it) {
    solve(model, x, u);
    const Eigen::VectorXd ce = element_energy(model, u);
    const double c = model.force.dot(u);
    res.history.push_back(c);
    for (int e = 0; e < ne; ++e) {
      dc(e) = -mat.penalty * std::pow(x(e), mat.penalty - 1.0) * (mat.E1 - mat.E_min()) * ce(e);
    }
    for (int e = 0; e < ne; ++e) {
      double acc = 0.0;
      for (const auto& [k, w] : nbrs[static_cast<std::size_t>(e)]) acc += w * x(k) * dc(k);
      dcf(e) = acc / (hsum[static_cast<std::size_t>(e)] * std::max(1e-3, x(e)));
    }
    double l1 = 0.0;
    double l2 = 1e9;
    auto update = [&](double lambda) {
      for (int e = 0; e < ne; ++e) {
        if (model.passive[static_cast<std::size_t>(e)]) {
          xnew(e) = x(e);
          continue;
        }
        const double B = std::max(0.0, -dcf(e) / lambda);
        xnew(e) = std::clamp(x(e) * std::pow(B, options.damping), std::max(0.0, x(e) - options.move_limit),
                             std::min(1.0, x(e) + options.move_limit));
      }
      return xnew.mean();
    };
    while ((l2 - l1) / (l1 + l2) > 1e-9) {
      const double mid = 0.5 * (l1 + l2);
      if (update(mid) > vf) {
        l1 = mid;
      } else {
        l2 = mid;
      }
    }
    update(0.5 * (l1 + l2));
    const double change = (xnew - x).cwiseAbs().maxCoeff();
    x = xnew;
    res.iterations = it;
    if (change < options.change_tolerance) break;
  }
  res.compliance = compliance(model, x, &u);
  res.rho = x;
  res.volume = x.mean();
  return res;
}

}  // namespace nto::fem
