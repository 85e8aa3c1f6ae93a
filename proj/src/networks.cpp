#include "nto/networks.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "nto/error.hpp"
#include "nto/random.hpp"
#include "nto/vector_math.hpp"

namespace nto {

namespace {

constexpr std::uint64_t kWeightStream = 0x5eed'0001;
constexpr std::uint64_t kFourierStream = 0x5eed'0002;

void sin_inplace(Eigen::MatrixXd& m) {
  vmath::sin(m.data(), m.data(), static_cast<std::size_t>(m.size()));
}

void sin_inplace(Eigen::MatrixXf& m) {
  vmath::sin(m.data(), m.data(), static_cast<std::size_t>(m.size()));
}

void fill_uniform(Rng& rng, Eigen::MatrixXd& m, double bound) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
  }
}

void fill_uniform(Rng& rng, Eigen::VectorXd& v, double bound) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-bound, bound);
}

std::vector<std::pair<int, int>> layer_shapes(const MlpArchitecture& arch) {
  std::vector<std::pair<int, int>> shapes;  // (out, in)
  shapes.emplace_back(arch.hidden_dim, arch.first_layer_inputs());
  for (int l = 1; l < arch.hidden_layers; ++l) shapes.emplace_back(arch.hidden_dim, arch.hidden_dim);
  shapes.emplace_back(arch.output_dim, arch.hidden_dim);
  return shapes;
}

NetworkParams allocate(const MlpArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  NetworkParams params;
  params.arch = arch;
  params.seed = seed;
  for (auto [out, in] : layer_shapes(arch)) {
    params.layers.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
  if (arch.activation == Activation::fourier) params.fourier_basis = draw_fourier_basis(arch, seed);
  return params;
}

bool residual_at(const MlpArchitecture& arch, std::size_t hidden_index) {
  return arch.residual && hidden_index >= 1;
}

}  // namespace

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::siren:
      return "siren";
    case Activation::relu:
      return "relu";
    case Activation::fourier:
      return "fourier";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& name) {
  if (name == "siren") return Activation::siren;
  if (name == "relu") return Activation::relu;
  if (name == "fourier") return Activation::fourier;
  throw ConfigError("unknown activation '" + name + "' (expected siren, relu or fourier)");
}

std::size_t MlpArchitecture::parameter_count() const {
  std::size_t count = 0;
  for (auto [out, in] : layer_shapes(*this)) count += static_cast<std::size_t>(out) * (in + 1);
  return count;
}

void MlpArchitecture::validate() const {
  if (input_dim < 1) throw ConfigError("network input_dim must be positive");
  if (hidden_dim < 1) throw ConfigError("network hidden_dim must be positive");
  if (hidden_layers < 1) throw ConfigError("network needs at least one hidden layer");
  if (output_dim < 1) throw ConfigError("network output_dim must be positive");
  if (activation == Activation::siren && !(omega0 > 0.0)) {
    throw ConfigError("SIREN omega0 must be positive");
  }
  if (activation == Activation::fourier && (fourier_features < 1 || !(fourier_scale > 0.0))) {
    throw ConfigError("Fourier features need a positive count and scale");
  }
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers) count += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return count;
}

std::vector<double> NetworkParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& layer : layers) {
    flat.insert(flat.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
    flat.insert(flat.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return flat;
}

void NetworkParams::unflatten(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw ContractViolation("unflatten: expected " + std::to_string(parameter_count()) + " values, got " +
                            std::to_string(values.size()));
  }
  std::size_t offset = 0;
  for (auto& layer : layers) {
    std::copy_n(values.data() + offset, layer.weight.size(), layer.weight.data());
    offset += static_cast<std::size_t>(layer.weight.size());
    std::copy_n(values.data() + offset, layer.bias.size(), layer.bias.data());
    offset += static_cast<std::size_t>(layer.bias.size());
  }
}

NetworkGrads zero_grads(const NetworkParams& params) {
  NetworkGrads grads;
  for (const auto& layer : params.layers) {
    grads.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                     Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return grads;
}

NetworkParams init_siren(const MlpArchitecture& arch, std::uint64_t seed) {
  if (arch.activation != Activation::siren) throw ConfigError("init_siren requires a SIREN architecture");
  NetworkParams params = allocate(arch, seed);
  Rng rng(derive_seed(seed, kWeightStream));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    const auto fan_in = static_cast<double>(layer.weight.cols());
    const double weight_bound = l == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / arch.omega0;
    fill_uniform(rng, layer.weight, weight_bound);
    fill_uniform(rng, layer.bias, 1.0 / fan_in);
  }
  return params;
}

NetworkParams init_network(const MlpArchitecture& arch, std::uint64_t seed) {
  if (arch.activation == Activation::siren) return init_siren(arch, seed);
  NetworkParams params = allocate(arch, seed);
  Rng rng(derive_seed(seed, kWeightStream));
  for (auto& layer : params.layers) {
    const auto fan_in = static_cast<double>(layer.weight.cols());
    fill_uniform(rng, layer.weight, std::sqrt(6.0 / fan_in));
  }
  return params;
}

NetworkParams init_density_head(NetworkParams params, double target_volume) {
  if (!(target_volume > 0.0 && target_volume < 1.0)) {
    throw ConfigError("target volume must lie in (0, 1)");
  }
  auto& head = params.layers.back();
  head.weight *= 1e-3;
  head.bias.setConstant(std::log(target_volume / (1.0 - target_volume)) / 5.0);
  return params;
}

Eigen::MatrixXd draw_fourier_basis(const MlpArchitecture& arch, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kFourierStream));
  Eigen::MatrixXd basis(arch.fourier_features, arch.input_dim);
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    for (Eigen::Index i = 0; i < basis.rows(); ++i) basis(i, j) = arch.fourier_scale * rng.normal();
  }
  return basis;
}

Eigen::MatrixXd fourier_embed(const Eigen::MatrixXd& points, const Eigen::MatrixXd& basis) {
  if (basis.cols() != points.rows()) throw ContractViolation("fourier_embed: basis width differs from point dim");
  const Eigen::MatrixXd phase = (2.0 * std::numbers::pi) * (basis * points);
  Eigen::MatrixXd out(2 * basis.rows(), points.cols());
  out.topRows(basis.rows()) = phase.array().cos().matrix();
  out.bottomRows(basis.rows()) = phase.array().sin().matrix();
  return out;
}

Eigen::MatrixXd forward(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
  const auto& arch = params.arch;
  if (inputs.rows() != arch.input_dim) {
    throw ConfigError("network expects " + std::to_string(arch.input_dim) + " input rows, got " +
                      std::to_string(inputs.rows()));
  }
  const std::size_t hidden = params.layers.size() - 1;
  Eigen::MatrixXd h;
  Eigen::MatrixXd z;
  for (std::size_t l = 0; l < hidden; ++l) {
    const auto& layer = params.layers[l];
    if (l == 0) {
      if (arch.activation == Activation::siren) {
        z.noalias() = layer.weight * (arch.omega0 * inputs);
      } else if (arch.activation == Activation::fourier) {
        z.noalias() = layer.weight * fourier_embed(inputs, params.fourier_basis);
      } else {
        z.noalias() = layer.weight * inputs;
      }
    } else {
      z.noalias() = layer.weight * h;
    }
    z.colwise() += layer.bias;
    if (arch.activation == Activation::siren) {
      sin_inplace(z);
    } else {
      z = z.cwiseMax(0.0);
    }
    if (residual_at(arch, l)) {
      h += z;
    } else {
      h.swap(z);
    }
  }
  Eigen::MatrixXd out = params.layers.back().weight * h;
  out.colwise() += params.layers.back().bias;
  if (!out.allFinite()) {
    std::ostringstream msg;
    msg << "network forward produced non-finite output (inputs finite: " << std::boolalpha << inputs.allFinite()
        << ", parameters finite: ";
    bool finite = true;
    for (const auto& layer : params.layers) finite = finite && layer.weight.allFinite() && layer.bias.allFinite();
    msg << finite << ")";
    throw NumericalError(msg.str());
  }
  return out;
}

FloatNetwork::FloatNetwork(const NetworkParams& params)
    : arch_(params.arch), fourier_basis_(params.fourier_basis.cast<float>()) {
  for (const auto& layer : params.layers) {
    weights_.push_back(layer.weight.cast<float>());
    biases_.push_back(layer.bias.cast<float>());
  }
}

Eigen::MatrixXf FloatNetwork::forward(const Eigen::MatrixXf& inputs) const {
  if (inputs.rows() != arch_.input_dim) throw ConfigError("network input width mismatch");
  // Column blocks keep the hidden activations cache resident.
  constexpr Eigen::Index kBlock = 256;
  const std::size_t hidden = weights_.size() - 1;
  Eigen::MatrixXf out(weights_.back().rows(), inputs.cols());
  Eigen::MatrixXf h;
  Eigen::MatrixXf z;
  for (Eigen::Index start = 0; start < inputs.cols(); start += kBlock) {
    const Eigen::Index count = std::min(kBlock, inputs.cols() - start);
    const auto x = inputs.middleCols(start, count);
    for (std::size_t l = 0; l < hidden; ++l) {
      if (l == 0) {
        if (arch_.activation == Activation::siren) {
          z.noalias() = weights_[0] * (static_cast<float>(arch_.omega0) * x);
        } else if (arch_.activation == Activation::fourier) {
          const Eigen::MatrixXf phase = (2.0f * std::numbers::pi_v<float>)*(fourier_basis_ * x);
          Eigen::MatrixXf embed(2 * phase.rows(), phase.cols());
          embed.topRows(phase.rows()) = phase.array().cos().matrix();
          embed.bottomRows(phase.rows()) = phase.array().sin().matrix();
          z.noalias() = weights_[0] * embed;
        } else {
          z.noalias() = weights_[0] * x;
        }
      } else {
        z.noalias() = weights_[l] * h;
      }
      z.colwise() += biases_[l];
      if (arch_.activation == Activation::siren) {
        sin_inplace(z);
      } else {
        z = z.cwiseMax(0.0f);
      }
      if (residual_at(arch_, l)) {
        h += z;
      } else {
        h.swap(z);
      }
    }
    out.middleCols(start, count).noalias() = weights_.back() * h;
  }
  out.colwise() += biases_.back();
  return out;
}

BoundNetwork bind(ad::Tape& tape, const NetworkParams& params) {
  BoundNetwork net;
  net.params = &params;
  for (const auto& layer : params.layers) {
    net.weights.push_back(tape.leaf(layer.weight));
    net.biases.push_back(tape.leaf(layer.bias));
  }
  return net;
}

namespace {

ad::DualBlock first_layer_input(ad::Tape& tape, const NetworkParams& params, const Eigen::MatrixXd& inputs,
                                std::size_t spatial_dims) {
  const auto& arch = params.arch;
  if (arch.activation == Activation::siren) {
    return ad::dual_scale(ad::dual_input(tape, inputs, spatial_dims), arch.omega0);
  }
  if (arch.activation == Activation::relu) return ad::dual_input(tape, inputs, spatial_dims);
  const Eigen::MatrixXd& basis = params.fourier_basis;
  const Eigen::Index features = basis.rows();
  const Eigen::MatrixXd phase = (2.0 * std::numbers::pi) * (basis * inputs);
  const Eigen::ArrayXXd c = phase.array().cos();
  const Eigen::ArrayXXd s = phase.array().sin();
  Eigen::MatrixXd embed(2 * features, inputs.cols());
  embed.topRows(features) = c.matrix();
  embed.bottomRows(features) = s.matrix();
  ad::DualBlock block;
  block.value = tape.constant(embed);
  for (std::size_t k = 0; k < spatial_dims; ++k) {
    const Eigen::ArrayXd freq = (2.0 * std::numbers::pi) * basis.col(static_cast<Eigen::Index>(k)).array();
    Eigen::MatrixXd t(2 * features, inputs.cols());
    t.topRows(features) = (-s).colwise() * freq;
    t.bottomRows(features) = c.colwise() * freq;
    block.tangents.push_back(tape.constant(t));
  }
  return block;
}

}  // namespace

ad::DualBlock eval_with_spatial_jacobian(ad::Tape& tape, const BoundNetwork& net, const Eigen::MatrixXd& inputs,
                                         std::size_t spatial_dims) {
  const NetworkParams& params = *net.params;
  const auto& arch = params.arch;
  if (inputs.rows() != arch.input_dim) {
    throw ConfigError("network expects " + std::to_string(arch.input_dim) + " input rows, got " +
                      std::to_string(inputs.rows()));
  }
  if (spatial_dims > static_cast<std::size_t>(arch.input_dim)) {
    throw ConfigError("spatial dimension exceeds network input dimension");
  }
  const std::size_t hidden = params.layers.size() - 1;
  ad::DualBlock h = first_layer_input(tape, params, inputs, spatial_dims);
  for (std::size_t l = 0; l < hidden; ++l) {
    ad::DualBlock z = ad::dual_affine(net.weights[l], h, net.biases[l]);
    z = arch.activation == Activation::siren ? ad::dual_sin(z) : ad::dual_relu(z);
    h = residual_at(arch, l) ? ad::dual_add(h, z) : std::move(z);
  }
  return ad::dual_affine(net.weights[hidden], h, net.biases[hidden]);
}

ad::Var forward(ad::Tape& tape, const BoundNetwork& net, const Eigen::MatrixXd& inputs) {
  return eval_with_spatial_jacobian(tape, net, inputs, 0).value;
}

NetworkGrads gradients(ad::Tape& tape, const BoundNetwork& net) {
  NetworkGrads grads;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    grads.push_back({tape.grad(net.weights[l]), tape.grad(net.biases[l])});
  }
  return grads;
}

}  // namespace nto
