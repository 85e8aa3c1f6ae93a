#include "nto/density.hpp"

#include <cmath>

#include "nto/error.hpp"

namespace nto {

Mask hole_mask(const DomainSpec& domain, const Eigen::MatrixXd& positions, Eigen::VectorXd* pinned) {
  const Eigen::Index n = positions.cols();
  const int dim = domain.box.dim();
  Mask mask = Mask::Constant(n, false);
  if (pinned) pinned->setZero(n);
  for (const auto& hole : domain.holes) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (hole.contains(positions.col(i).head(dim))) {
        mask(i) = true;
        if (pinned) (*pinned)(i) = hole.value;
      }
    }
  }
  return mask;
}

Eigen::VectorXd density(const NetworkParams& net, const Eigen::MatrixXd& inputs, const DomainSpec& domain) {
  if (net.arch.output_dim != 1) throw ConfigError("density network must have a single output");
  const Eigen::MatrixXd phi = forward(net, inputs);
  Eigen::VectorXd rho = (1.0 / (1.0 + (-kDensitySharpness * phi.row(0).transpose().array()).exp())).matrix();
  if (!domain.holes.empty()) {
    Eigen::VectorXd pinned;
    const Mask mask = hole_mask(domain, inputs.topRows(domain.box.dim()), &pinned);
    rho = mask.select(pinned, rho);
  }
  return rho;
}

Eigen::VectorXf density(const FloatNetwork& net, const Eigen::MatrixXf& inputs, const DomainSpec& domain) {
  const Eigen::MatrixXf phi = net.forward(inputs);
  Eigen::VectorXf rho = (1.0f / (1.0f + (-static_cast<float>(kDensitySharpness) * phi.row(0).transpose().array()).exp())).matrix();
  if (!domain.holes.empty()) {
    Eigen::VectorXd pinned;
    const Mask mask = hole_mask(domain, inputs.topRows(domain.box.dim()).cast<double>(), &pinned);
    rho = mask.select(pinned.cast<float>(), rho);
  }
  return rho;
}

ad::Var density(ad::Tape& tape, const BoundNetwork& net, const Eigen::MatrixXd& inputs) {
  return tape.sigmoid(tape.scale(forward(tape, net, inputs), kDensitySharpness));
}

double simp_modulus(double rho, const Material& material) {
  const double e_min = material.E_min();
  return e_min + std::pow(rho, material.penalty) * (material.E1 - e_min);
}

Eigen::VectorXd simp_modulus(const Eigen::VectorXd& rho, const Material& material) {
  const double e_min = material.E_min();
  return (e_min + rho.array().pow(material.penalty) * (material.E1 - e_min)).matrix();
}

double sensitivity(double rho, double unit_energy, const Material& material) {
  return -material.penalty * std::pow(rho, material.penalty - 1.0) * (material.E1 - material.E_min()) * unit_energy;
}

Eigen::VectorXd sensitivity(const Eigen::VectorXd& rho, const Eigen::VectorXd& unit_energy, const Material& material) {
  if (rho.size() != unit_energy.size()) throw ContractViolation("sensitivity needs matching rho and energy columns");
  const double factor = -material.penalty * (material.E1 - material.E_min());
  return (factor * rho.array().pow(material.penalty - 1.0) * unit_energy.array()).matrix();
}

}  // namespace nto
