#include <doctest.h>

#include "nto/sampling.hpp"

using namespace nto;

namespace {
Box box2(double x0, double y0, double x1, double y1) {
  Box b{Vec(2), Vec(2)};
  b.lo << x0, y0;
  b.hi << x1, y1;
  return b;
}
}  // namespace

TEST_CASE("one jittered sample per cell") {
  const Box domain = box2(0, 0, 3, 1);
  const std::vector<int> grid{150, 50};
  const SampleBatch b = stratified_batch(domain, grid, 42);
  REQUIRE(b.size() == 7500);
  CHECK(b.weight == doctest::Approx(3.0 / 7500));
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const auto cell = b.cell_of(i);
    CHECK(cell[0] == static_cast<int>(i % 150));
    CHECK(cell[1] == static_cast<int>(i / 150));
    CHECK(b.positions(0, i) >= 0.02 * cell[0]);
    CHECK(b.positions(0, i) <= 0.02 * (cell[0] + 1));
    CHECK(b.positions(1, i) >= 0.02 * cell[1]);
    CHECK(b.positions(1, i) <= 0.02 * (cell[1] + 1));
  }
}

TEST_CASE("degenerate grid and reproducibility") {
  const Box unit = box2(0, 0, 1, 1);
  const std::vector<int> one{1, 1};
  const SampleBatch b = stratified_batch(unit, one, 3);
  CHECK(b.size() == 1);
  CHECK(b.weight == 1.0);
  CHECK(unit.contains(b.positions.col(0)));
  const std::vector<int> grid{7, 5};
  CHECK(stratified_batch(unit, grid, 9).positions == stratified_batch(unit, grid, 9).positions);
  CHECK(stratified_batch(unit, grid, 9).positions != stratified_batch(unit, grid, 10).positions);
}

TEST_CASE("stratified estimate of a linear integrand") {
  const std::vector<int> grid{1000, 1000};
  const SampleBatch b = stratified_batch(box2(0, 0, 1, 1), grid, 5);
  CHECK(b.positions.row(0).mean() == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("parameter samples fall one per sub-interval") {
  const Eigen::VectorXd q = sample_parameters(0.3, 0.7, 25, 8);
  REQUIRE(q.size() == 25);
  for (int i = 0; i < 25; ++i) {
    CHECK(q(i) >= 0.3 + 0.016 * i - 1e-12);
    CHECK(q(i) <= 0.3 + 0.016 * (i + 1) + 1e-12);
  }
  const Eigen::VectorXd single = sample_parameters(0.3, 0.7, 1, 8);
  CHECK(single(0) >= 0.3);
  CHECK(single(0) <= 0.7);
  CHECK(sample_parameters(0.3, 0.7, 25, 8) == q);
}

TEST_CASE("region samples keep degenerate axes fixed") {
  const Box segment = box2(0, 0.5, 1.5, 0.5);
  const Eigen::MatrixXd p = stratified_region(segment, 64, 1);
  REQUIRE(p.cols() == 64);
  CHECK((p.row(1).array() == 0.5).all());
  for (int i = 0; i < 64; ++i) {
    CHECK(p(0, i) >= 1.5 * i / 64.0 - 1e-12);
    CHECK(p(0, i) <= 1.5 * (i + 1) / 64.0 + 1e-12);
  }
}

TEST_CASE("cell centers and aspect-matched grids") {
  const std::vector<int> grid{3, 2};
  const Eigen::MatrixXd c = cell_centers(box2(0, 0, 3, 2), grid);
  REQUIRE(c.cols() == 6);
  CHECK(c(0, 1) == doctest::Approx(1.5));
  CHECK(c(1, 1) == doctest::Approx(0.5));
  CHECK(c(0, 3) == doctest::Approx(0.5));
  CHECK(c(1, 3) == doctest::Approx(1.5));
  const auto g = aspect_matched_grid(box2(0, 0, 3, 1), 7500);
  CHECK(g == std::vector<int>{150, 50});
}
