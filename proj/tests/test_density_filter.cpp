#include <doctest.h>

#include <cmath>

#include "nto/density.hpp"
#include "nto/filter.hpp"
#include "nto/random.hpp"

using namespace nto;

namespace {

Box unit_box() { return Box{Vec::Zero(2), Vec::Ones(2)}; }

Eigen::VectorXd uniform_vector(Eigen::Index n, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

// All-pairs evaluation of the filter formula.
Eigen::VectorXd brute_force(const SampleBatch& b, const Eigen::VectorXd& rho, const Eigen::VectorXd& s, double r,
                            double eps) {
  Eigen::VectorXd out(b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    double num = 0.0, den = 0.0;
    for (Eigen::Index k = 0; k < b.size(); ++k) {
      const double h = r - (b.positions.col(j) - b.positions.col(k)).norm();
      if (h <= 0.0) continue;
      num += h * rho(k) * s(k);
      den += h;
    }
    out(j) = num / (std::max(eps, rho(j)) * den);
  }
  return out;
}

NetworkParams constant_density_net(double phi) {
  MlpArchitecture a;
  a.hidden_dim = 4;
  a.hidden_layers = 1;
  NetworkParams p = init_network(a, 1);
  p.layers.back().weight.setZero();
  p.layers.back().bias.setConstant(phi);
  return p;
}

}  // namespace

TEST_CASE("density is a sharpened sigmoid with hole overrides") {
  const DomainSpec plain{unit_box(), {}};
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(2, 1, 0.5);
  CHECK(density(constant_density_net(0.0), x, plain)(0) == doctest::Approx(0.5));
  CHECK(density(constant_density_net(1.0), x, plain)(0) == doctest::Approx(0.99331).epsilon(1e-5));
  DomainSpec holed = plain;
  holed.holes.push_back({Vec::Constant(2, 0.5), 0.1, 0.0});
  CHECK(density(constant_density_net(1.0), x, holed)(0) == 0.0);
  Eigen::VectorXd pinned;
  const Mask m = hole_mask(holed, Eigen::MatrixXd::Constant(2, 1, 0.9), &pinned);
  CHECK_FALSE(m(0));
}

TEST_CASE("SIMP modulus and sensitivity") {
  const Material mat;
  CHECK(simp_modulus(1.0, mat) == doctest::Approx(1.0));
  CHECK(simp_modulus(0.0, mat) == doctest::Approx(1e-4));
  CHECK(simp_modulus(0.5, mat) == doctest::Approx(0.1250875));
  CHECK(sensitivity(1.0, 2.0, mat) == doctest::Approx(-5.9994));
  CHECK(sensitivity(0.4, 0.0, mat) == 0.0);
  // s = -dE/drho * e_hat.
  for (double rho : {0.1, 0.5, 0.9}) {
    const double h = 1e-6;
    const double fd = (simp_modulus(rho + h, mat) - simp_modulus(rho - h, mat)) / (2 * h);
    CHECK(sensitivity(rho, 1.7, mat) == doctest::Approx(-fd * 1.7).epsilon(1e-8));
  }
}

TEST_CASE("bucketed filter equals the all-pairs oracle") {
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<int> grid{20, 20};
    const SampleBatch b = stratified_batch(unit_box(), grid, 1000 + trial);
    const Eigen::VectorXd rho = uniform_vector(b.size(), trial, 0.0, 1.0);
    const Eigen::VectorXd s = uniform_vector(b.size(), 50 + trial, -3.0, 0.0);
    const double r = default_filter_radius(b);
    CHECK(r == doctest::Approx(2.5 * std::sqrt(2.0) / 20));
    const Eigen::VectorXd got = filter_sensitivities(rho, s, b, FilterSpec{});
    CHECK((got - brute_force(b, rho, s, r, 1e-3)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("filter fixed points and invariants") {
  const std::vector<int> grid{12, 9};
  const SampleBatch b = stratified_batch(unit_box(), grid, 3);
  const Eigen::Index n = b.size();
  const Eigen::VectorXd s = uniform_vector(n, 4, -2.0, 0.0);
  const Eigen::VectorXd rho = uniform_vector(n, 5, 0.0, 1.0);

  FilterSpec tiny{1e-9, 1e-3};
  const Eigen::VectorXd self = filter_sensitivities(Eigen::VectorXd::Constant(n, 0.4), s, b, tiny);
  CHECK((self - s).cwiseAbs().maxCoeff() < 1e-14);

  const Eigen::VectorXd flat =
      filter_sensitivities(Eigen::VectorXd::Constant(n, 0.3), Eigen::VectorXd::Constant(n, -1.5), b, FilterSpec{});
  CHECK((flat.array() + 1.5).abs().maxCoeff() < 1e-14);

  const Eigen::VectorXd base = filter_sensitivities(rho, s, b, FilterSpec{});
  CHECK((base.array() <= 0.0).all());
  CHECK((filter_sensitivities(rho, 3.0 * s, b, FilterSpec{}) - 3.0 * base).cwiseAbs().maxCoeff() < 1e-12);

  const double r = default_filter_radius(b);
  Eigen::VectorXd bumped = s;
  bumped(40) -= 1.0;
  const Eigen::VectorXd moved = filter_sensitivities(rho, bumped, b, FilterSpec{});
  for (Eigen::Index j = 0; j < n; ++j) {
    if ((b.positions.col(j) - b.positions.col(40)).norm() >= r) CHECK(moved(j) == base(j));
  }
}

TEST_CASE("neighborhoods include exactly the samples within the radius") {
  const std::vector<int> grid{3, 3};
  const SampleBatch b = stratified_batch(unit_box(), grid, 77);
  const double r = 1.5 / 3.0;
  const Neighborhoods nb = build_neighborhoods(b, r);
  REQUIRE(nb.size() == 9);
  for (Eigen::Index j = 0; j < 9; ++j) {
    std::vector<std::int64_t> expect;
    for (Eigen::Index k = 0; k < 9; ++k) {
      if ((b.positions.col(j) - b.positions.col(k)).norm() < r) expect.push_back(k);
    }
    std::vector<std::int64_t> got(nb.index.begin() + nb.offsets[j], nb.index.begin() + nb.offsets[j + 1]);
    std::sort(got.begin(), got.end());
    CHECK(got == expect);
  }
}
