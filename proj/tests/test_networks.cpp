#include <doctest.h>

#include <cmath>

#include "nto/adam.hpp"
#include "nto/density.hpp"
#include "nto/error.hpp"
#include "nto/networks.hpp"
#include "nto/random.hpp"

using namespace nto;

namespace {

MlpArchitecture small_arch(Activation act) {
  MlpArchitecture a;
  a.input_dim = 3;
  a.hidden_dim = 8;
  a.hidden_layers = 3;
  a.output_dim = 2;
  a.activation = act;
  a.omega0 = 30.0;
  a.fourier_features = 6;
  a.fourier_scale = 2.0;
  return a;
}

Eigen::MatrixXd random_points(int rows, int n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.uniform(-0.5, 0.5);
  return m;
}

}  // namespace

TEST_CASE("SIREN initialization bounds") {
  MlpArchitecture a = small_arch(Activation::siren);
  const NetworkParams p = init_siren(a, 7);
  REQUIRE(p.layers.size() == 4);
  CHECK(p.layers[0].weight.cwiseAbs().maxCoeff() <= 1.0 / 3.0);
  for (std::size_t l = 1; l < p.layers.size(); ++l) {
    const double fan_in = static_cast<double>(p.layers[l].weight.cols());
    CHECK(p.layers[l].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / fan_in) / a.omega0);
    CHECK(p.layers[l].bias.cwiseAbs().maxCoeff() <= 1.0 / fan_in);
  }
  CHECK(p.parameter_count() == a.parameter_count());
  CHECK(a.parameter_count() == (3 * 8 + 8) + 2 * (8 * 8 + 8) + (8 * 2 + 2));
}

TEST_CASE("initialization is a pure function of the seed") {
  for (Activation act : {Activation::siren, Activation::relu, Activation::fourier}) {
    const NetworkParams a = init_network(small_arch(act), 11);
    const NetworkParams b = init_network(small_arch(act), 11);
    const NetworkParams c = init_network(small_arch(act), 12);
    CHECK(a.flatten() == b.flatten());
    CHECK(a.fourier_basis == b.fourier_basis);
    CHECK(a.flatten() != c.flatten());
  }
}

TEST_CASE("flatten and unflatten round trip") {
  NetworkParams p = init_network(small_arch(Activation::siren), 3);
  std::vector<double> flat = p.flatten();
  CHECK(flat.size() == p.parameter_count());
  for (double& v : flat) v *= 2.0;
  p.unflatten(flat);
  CHECK(p.flatten() == flat);
  flat.pop_back();
  CHECK_THROWS(p.unflatten(flat));
}

TEST_CASE("recorded and plain forward passes agree") {
  for (Activation act : {Activation::siren, Activation::relu, Activation::fourier}) {
    const NetworkParams p = init_network(small_arch(act), 5);
    const Eigen::MatrixXd x = random_points(3, 17, 9);
    ad::Tape tape;
    const BoundNetwork net = bind(tape, p);
    const Eigen::MatrixXd recorded = forward(tape, net, x).value();
    const ad::DualBlock dual = eval_with_spatial_jacobian(tape, net, x, 2);
    const Eigen::MatrixXd plain = forward(p, x);
    CHECK((recorded - plain).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((dual.value.value() - plain).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::MatrixXf single = FloatNetwork(p).forward(x.cast<float>());
    CHECK((single.cast<double>() - plain).cwiseAbs().maxCoeff() < 1e-4 * (1.0 + plain.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("spatial Jacobian matches central differences") {
  for (Activation act : {Activation::siren, Activation::relu, Activation::fourier}) {
    const NetworkParams p = init_network(small_arch(act), 21);
    const Eigen::MatrixXd x = random_points(3, 13, 22);
    ad::Tape tape;
    const ad::DualBlock dual = eval_with_spatial_jacobian(tape, bind(tape, p), x, 2);
    REQUIRE(dual.dim() == 2);
    const double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
      Eigen::MatrixXd xp = x, xm = x;
      xp.row(k).array() += h;
      xm.row(k).array() -= h;
      const Eigen::MatrixXd fd = (forward(p, xp) - forward(p, xm)) / (2 * h);
      const double scale = 1.0 + fd.cwiseAbs().maxCoeff();
      CHECK((dual.tangents[k].value() - fd).cwiseAbs().maxCoeff() < 1e-5 * scale);
    }
  }
}

TEST_CASE("residual links only skip hidden layers after the first") {
  MlpArchitecture a = small_arch(Activation::relu);
  a.input_dim = 8;
  NetworkParams p = init_network(a, 4);
  for (auto& layer : p.layers) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  // Identity first layer, zero hidden layers, output sums the features.
  p.layers[0].weight.setIdentity();
  p.layers.back().weight.setOnes();
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(8, 1);
  // relu(x) passes through layers 1 and 2 via their skip links.
  CHECK(forward(p, x)(0, 0) == doctest::Approx(8.0));
  a.residual = false;
  p.arch = a;
  CHECK(forward(p, x)(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("density head starts at the target volume") {
  MlpArchitecture a = small_arch(Activation::siren);
  a.output_dim = 1;
  a.input_dim = 2;
  const NetworkParams p = init_density_head(init_network(a, 2), 0.3);
  const Eigen::MatrixXd x = random_points(2, 200, 3);
  const Eigen::VectorXd rho = density(p, x, DomainSpec{Box{Vec::Constant(2, -1), Vec::Constant(2, 1)}, {}});
  CHECK(rho.mean() == doctest::Approx(0.3).epsilon(1e-2));
  CHECK(rho.maxCoeff() - rho.minCoeff() < 1e-2);
}

TEST_CASE("invalid architectures are rejected") {
  MlpArchitecture a = small_arch(Activation::siren);
  a.hidden_dim = 0;
  CHECK_THROWS_AS(a.validate(), ConfigError);
  a = small_arch(Activation::siren);
  a.omega0 = 0.0;
  CHECK_THROWS_AS(a.validate(), ConfigError);
  CHECK_THROWS_AS(activation_from_string("tanh"), ConfigError);
}

TEST_CASE("Adam reproduces the closed-form first step and rejects NaN") {
  MlpArchitecture a = small_arch(Activation::relu);
  NetworkParams p = init_network(a, 1);
  const std::vector<double> before = p.flatten();
  NetworkGrads g = zero_grads(p);
  for (auto& layer : g) {
    layer.weight.setConstant(0.5);
    layer.bias.setConstant(-2.0);
  }
  AdamState state = make_adam(p);
  adam_step(p, g, state, 0.01);
  // After bias correction the first step is lr * sign(g) (up to epsilon).
  const std::vector<double> after = p.flatten();
  std::size_t i = 0;
  for (const auto& layer : g) {
    for (Eigen::Index k = 0; k < layer.weight.size(); ++k, ++i) CHECK(after[i] - before[i] == doctest::Approx(-0.01));
    for (Eigen::Index k = 0; k < layer.bias.size(); ++k, ++i) CHECK(after[i] - before[i] == doctest::Approx(0.01));
  }
  g[0].weight(0, 0) = std::nan("");
  CHECK_THROWS_AS(adam_step(p, g, state, 0.01), NumericalError);
}
