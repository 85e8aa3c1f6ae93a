#pragma once

// Coordinate MLPs used for the displacement and density fields.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nto/autodiff.hpp"

namespace nto {

enum class Activation { siren, relu, fourier };

std::string to_string(Activation activation);
Activation activation_from_string(const std::string& name);

/// Shape of a coordinate MLP: `hidden_layers` hidden layers followed by a linear output layer.
/// With `residual`, hidden layers 2..n add their input to their output.
struct MlpArchitecture {
  int input_dim = 2;
  int hidden_dim = 60;
  int hidden_layers = 4;
  int output_dim = 1;
  Activation activation = Activation::siren;
  double omega0 = 60.0;
  int fourier_features = 128;
  double fourier_scale = 10.0;
  bool residual = true;

  /// Width of the vector fed to the first dense layer.
  [[nodiscard]] int first_layer_inputs() const {
    return activation == Activation::fourier ? 2 * fourier_features : input_dim;
  }
  [[nodiscard]] std::size_t parameter_count() const;
  void validate() const;

  bool operator==(const MlpArchitecture&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

struct NetworkParams {
  MlpArchitecture arch;
  std::vector<DenseLayer> layers;
  /// Fourier-feature frequencies (features x input_dim); empty for other activations. Not trained.
  Eigen::MatrixXd fourier_basis;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t parameter_count() const;
  /// Layer order, weight (column-major) then bias.
  [[nodiscard]] std::vector<double> flatten() const;
  void unflatten(std::span<const double> values);
};

/// Gradient buffers shaped like NetworkParams::layers.
using NetworkGrads = std::vector<DenseLayer>;

NetworkGrads zero_grads(const NetworkParams& params);

/// SIREN initialization: first layer U(+-1/fan_in), later weights U(+-sqrt(6/fan_in)/omega0),
/// biases U(+-1/fan_in) of their own layer.
NetworkParams init_siren(const MlpArchitecture& arch, std::uint64_t seed);
/// Initialization for any activation (He-uniform weights and zero biases for ReLU variants).
NetworkParams init_network(const MlpArchitecture& arch, std::uint64_t seed);
/// Shrinks output weights by 1e-3 and sets the output bias to logit(target_volume)/5,
/// so sigmoid(5 * output) starts near target_volume.
NetworkParams init_density_head(NetworkParams params, double target_volume);

Eigen::MatrixXd draw_fourier_basis(const MlpArchitecture& arch, std::uint64_t seed);
/// [cos(2 pi B x); sin(2 pi B x)] for each column x of points.
Eigen::MatrixXd fourier_embed(const Eigen::MatrixXd& points, const Eigen::MatrixXd& basis);

/// Plain evaluation: inputs is input_dim x n, result output_dim x n.
Eigen::MatrixXd forward(const NetworkParams& params, const Eigen::MatrixXd& inputs);

/// Single-precision copy of a network for latency-bound inference.
class FloatNetwork {
 public:
  explicit FloatNetwork(const NetworkParams& params);
  [[nodiscard]] Eigen::MatrixXf forward(const Eigen::MatrixXf& inputs) const;
  [[nodiscard]] const MlpArchitecture& arch() const { return arch_; }

 private:
  MlpArchitecture arch_;
  std::vector<Eigen::MatrixXf> weights_;
  std::vector<Eigen::VectorXf> biases_;
  Eigen::MatrixXf fourier_basis_;
};

/// Parameters registered as leaves on a tape.
struct BoundNetwork {
  const NetworkParams* params = nullptr;
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
};

BoundNetwork bind(ad::Tape& tape, const NetworkParams& params);
/// Recorded forward pass without spatial derivatives.
ad::Var forward(ad::Tape& tape, const BoundNetwork& net, const Eigen::MatrixXd& inputs);
/// Recorded forward pass that also propagates d output / d x_k for the first
/// `spatial_dims` input rows (extra rows, e.g. solution-space parameters, are not differentiated).
ad::DualBlock eval_with_spatial_jacobian(ad::Tape& tape, const BoundNetwork& net, const Eigen::MatrixXd& inputs,
                                         std::size_t spatial_dims);
/// Reads parameter adjoints after Tape::backward.
NetworkGrads gradients(ad::Tape& tape, const BoundNetwork& net);

}  // namespace nto
