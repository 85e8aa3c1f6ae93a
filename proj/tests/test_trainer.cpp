#include <doctest.h>

#include <cmath>

#include "nto/canonical.hpp"
#include "nto/density.hpp"
#include "nto/elasticity.hpp"
#include "nto/error.hpp"
#include "nto/fem.hpp"
#include "nto/trainer.hpp"

using namespace nto;

namespace {

ProblemSpec small_beam() {
  ProblemSpec p = canonical_problem("ShortBeam");
  p.grid = {24, 8};
  return p;
}

TrainConfig small_config() {
  TrainConfig c;
  c.hidden_dim = 16;
  c.hidden_layers = 2;
  c.n_opt = 4;
  c.n_sim = 5;
  c.warm_start = 30;
  c.n_b = 4;
  c.learning_rate = 1e-3;
  c.omega0 = 15.0;
  return c;
}

}  // namespace

TEST_CASE("architectures follow the problem") {
  TrainConfig c;
  const MlpArchitecture u2 = displacement_architecture(canonical_problem("ShortBeam"), c, 0);
  CHECK(u2.input_dim == 2);
  CHECK(u2.output_dim == 2);
  CHECK(u2.hidden_dim == 60);
  const MlpArchitecture u3 = displacement_architecture(canonical_problem("Beam3D"), c, 1);
  CHECK(u3.input_dim == 4);
  CHECK(u3.output_dim == 3);
  CHECK(u3.hidden_dim == 180);
  CHECK(density_architecture(canonical_problem("ShortBeam"), c, 1, 128).hidden_dim == 128);
}

TEST_CASE("configuration validation") {
  TrainConfig c = small_config();
  c.learning_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.n_b = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(ablation_from_string("dropout"), ConfigError);
  CHECK(ablation_from_string("naive") == Ablation::naive_gradient);
}

TEST_CASE("equilibrium solves are deterministic and decrease the energy") {
  const ProblemSpec p = small_beam();
  const TrainConfig c = small_config();
  TrainingState a = init_state(p, c);
  TrainingState b = init_state(p, c);
  const auto ta = solve_equilibrium(a, p, c, 40);
  const auto tb = solve_equilibrium(b, p, c, 40);
  CHECK(ta == tb);
  CHECK(ta.back() < ta.front());
  CHECK(ta.back() < 0.0);
}

TEST_CASE("without loads the field relaxes toward zero") {
  ProblemSpec p = small_beam();
  p.point_loads.clear();
  TrainConfig c = small_config();
  TrainingState s = init_state(p, c);
  const auto trace = solve_equilibrium(s, p, c, 150);
  CHECK(trace.back() >= 0.0);
  CHECK(trace.back() < 0.05 * trace.front());
}

TEST_CASE("collected batches are fresh and carry non-positive sensitivities") {
  const ProblemSpec p = small_beam();
  const TrainConfig c = small_config();
  TrainingState s = init_state(p, c);
  solve_equilibrium(s, p, c, 10);
  const auto batches = collect_density_batches(s, p, c, 3);
  REQUIRE(batches.size() == 3);
  for (const auto& b : batches) {
    CHECK(b.size() == 24 * 8);
    CHECK(b.rho.size() == b.size());
    CHECK((b.sensitivity.array() <= 0.0).all());
  }
  CHECK(batches[0].positions != batches[1].positions);
}

TEST_CASE("density fit reaches a constant target") {
  const ProblemSpec p = small_beam();
  TrainConfig c = small_config();
  TrainingState s = init_state(p, c);
  std::vector<SampleBatch> batches;
  for (int i = 0; i < 500; ++i) {
    SampleBatch b = stratified_batch(p.domain.box, p.grid, 900 + static_cast<std::uint64_t>(i));
    b.target = Eigen::VectorXd::Constant(b.size(), 0.7);
    b.constrained = Mask::Constant(b.size(), false);
    batches.push_back(std::move(b));
  }
  mmse_fit(s, batches, c);
  const Eigen::VectorXd rho = rasterize(s.density, p.domain, p.grid);
  CHECK((rho.array() - 0.7).abs().mean() < 0.02);
}

TEST_CASE("fitting current densities leaves the loss unchanged") {
  const ProblemSpec p = small_beam();
  TrainConfig c = small_config();
  TrainingState s = init_state(p, c);
  std::vector<SampleBatch> batches{stratified_batch(p.domain.box, p.grid, 3)};
  batches[0].rho = density(s.density, batches[0].positions, p.domain);
  batches[0].target = batches[0].rho;
  batches[0].constrained = Mask::Constant(batches[0].size(), false);
  const FitStats st = mmse_fit(s, batches, c);
  CHECK(st.first_loss < 1e-24);
}

TEST_CASE("short optimization keeps the volume and beats the uniform design") {
  const ProblemSpec p = small_beam();
  TrainConfig c = small_config();
  c.n_opt = 6;
  c.warm_start = 200;
  const TrainResult r = optimize(p, c);
  REQUIRE(r.history.size() == 6);
  for (const auto& h : r.history) {
    CHECK(h.oc_feasible);
    CHECK(std::abs(h.target_volume - 0.5) <= c.oc.volume_tolerance);
  }
  const Eigen::VectorXd rho = rasterize(r.density, p.domain, p.grid);
  CHECK(rho.mean() == doctest::Approx(0.5).epsilon(0.05));
  const fem::FemModel model = fem::build_model(p, p.grid);
  const double uniform = fem::compliance(model, Eigen::VectorXd::Constant(rho.size(), rho.mean()));
  CHECK(fem::compliance(model, rho) < uniform);
  const TrainResult again = optimize(p, c);
  CHECK(again.history.back().compliance == r.history.back().compliance);
}

TEST_CASE("direct-gradient baseline reports its step direction") {
  const ProblemSpec p = small_beam();
  TrainConfig c = small_config();
  c.ablation = Ablation::naive_gradient;
  const TrainResult r = naive_baseline(p, c);
  REQUIRE(r.history.size() == 4);
  REQUIRE(r.history.front().direction_cosine.has_value());
  CHECK(std::isfinite(*r.history.front().direction_cosine));
  CHECK(*r.history.front().direction_cosine < 1.0);
  for (const auto& h : r.history) CHECK(std::isfinite(h.compliance));
}

TEST_CASE("solution space instances and a short run") {
  SolutionSpace s;
  const ProblemSpec p = small_beam();
  CHECK(s.scaled(0.3) == -s.input_span);
  CHECK(s.scaled(0.7) == doctest::Approx(s.input_span));
  CHECK(s.scaled(0.5) == doctest::Approx(0.0));
  CHECK(s.clamp(0.9) == 0.7);
  CHECK(s.instance(p, 0.42).volume_fraction == 0.42);

  SolutionSpace moving;
  moving.kind = SolutionSpace::Kind::load_location;
  moving.lo = 0.0;
  moving.hi = 1.0;
  moving.segment_start = Vec::Zero(2);
  moving.segment_end = Vec::Zero(2);
  moving.segment_start << 1.5, 0.0;
  moving.segment_end << 1.5, 0.5;
  CHECK(moving.instance(p, 0.5).point_loads[0].location(1) == doctest::Approx(0.25));

  TrainConfig c = small_config();
  c.n_opt = 2;
  s.samples_per_iteration = 3;
  s.batches_per_sample = 1;
  s.density_hidden = 16;
  const TrainResult r = train_solution_space(p, s, c);
  CHECK(r.history.size() == 2);
  CHECK(r.density.arch.input_dim == 3);
  CHECK(r.displacement.arch.input_dim == 3);
}
