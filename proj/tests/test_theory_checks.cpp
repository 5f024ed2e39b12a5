#include <doctest.h>

#include <cmath>

#include "gmmland/theory_checks.hpp"

using namespace gmmland;

namespace {
EngineConfig quad_cfg(int order = 0) {
  EngineConfig c;
  c.mode = ExpectationMode::tensor_quadrature;
  c.quadrature_order = order;
  return c;
}
}  // namespace

TEST_CASE("gaussian tail sandwich holds on the default grid") {
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(0.1 * i);
  const BoundCheckResult res = verify_gaussian_tails(grid);
  CHECK(res.grid_size == 101);
  CHECK(res.violations == 0);
  CHECK(std::isfinite(res.worst_margin));
}

TEST_CASE("gaussian tail values at t = 0 and t = 5") {
  // At t = 0 both lower bounds coincide with phi(0) and the tail is 1/2.
  const BoundCheckResult at0 = verify_gaussian_tails({0.0});
  CHECK(at0.violations == 0);
  // At t = 5 the e^{-t^2/2} cap is ~3.73e-6 against a true tail of ~2.87e-7.
  CHECK(std::exp(-12.5) == doctest::Approx(3.726653172078671e-6).epsilon(1e-12));
  CHECK(0.5 * std::erfc(5.0 / M_SQRT2) ==
        doctest::Approx(2.866515718791946e-7).epsilon(1e-9));
  const BoundCheckResult at5 = verify_gaussian_tails({5.0});
  CHECK(at5.violations == 0);
}

TEST_CASE("tail grid rejects negative entries") {
  CHECK_THROWS_AS(verify_gaussian_tails({1.0, -0.5}), std::invalid_argument);
}

TEST_CASE("logistic variance lower bound on the 625-point grid") {
  std::vector<std::pair<double, double>> grid;
  for (int ia = 0; ia <= 24; ++ia) {
    for (int iw = 0; iw <= 24; ++iw) {
      grid.emplace_back(-3.0 + 0.25 * ia, -3.0 + 0.25 * iw);
    }
  }
  const BoundCheckResult res = verify_variance_lower_bound(grid);
  CHECK(res.grid_size == 625);
  CHECK(res.violations == 0);
}

TEST_CASE("variance bound edge cases") {
  // w = 0 degenerates to a constant: equality of zero variance and zero bound
  const BoundCheckResult flat = verify_variance_lower_bound({{1.3, 0.0}});
  CHECK(flat.violations == 0);
  CHECK(std::fabs(flat.worst_margin) < 1e-15);
  // a = 0, w = 1: the bound is e^{-4}/48
  CHECK(std::exp(-4.0) / 48.0 ==
        doctest::Approx(3.8157581018196204e-4).epsilon(1e-12));
  const BoundCheckResult unit = verify_variance_lower_bound({{0.0, 1.0}});
  CHECK(unit.violations == 0);
  CHECK(unit.worst_margin > 0.0);
}

TEST_CASE("exponentially dominated centers have exponentially small weight") {
  const ExpectationEngine engine(quad_cfg());
  {
    ExponentialAssociationConfig cfg;
    cfg.true_center = VectorXd::Zero(1);
    cfg.fitted.resize(1, 2);
    cfg.fitted << 0.0, 30.0;
    cfg.separation = 36.0;
    const BoundCheckResult res =
        verify_exponential_association({cfg}, engine);
    CHECK(res.violations == 0);
    // margin in the log domain: -D^2/33 - log E >= 0 by a wide gap
    CHECK(res.worst_margin > 10.0);
  }
  {
    // a third far-away center does not break the bound
    ExponentialAssociationConfig cfg;
    cfg.true_center = VectorXd::Zero(1);
    cfg.fitted.resize(1, 3);
    cfg.fitted << 0.0, 30.0, 45.0;
    cfg.separation = 36.0;
    CHECK(verify_exponential_association({cfg}, engine).violations == 0);
  }
}

TEST_CASE("exponential association guards its preconditions") {
  const ExpectationEngine engine(quad_cfg());
  ExponentialAssociationConfig cfg;
  cfg.true_center = VectorXd::Zero(1);
  cfg.fitted.resize(1, 2);
  cfg.fitted << 0.0, 30.0;
  cfg.separation = 34.9;
  CHECK_THROWS_AS(verify_exponential_association({cfg}, engine),
                  std::invalid_argument);

  cfg.separation = 36.0;
  cfg.fitted << 0.0, 20.0;  // gap below (5/6) D
  CHECK_THROWS_AS(verify_exponential_association({cfg}, engine),
                  std::invalid_argument);
}

TEST_CASE("an injected wrong constant is caught") {
  const ExpectationEngine engine(quad_cfg());
  ExponentialAssociationConfig cfg;
  cfg.true_center = VectorXd::Zero(1);
  cfg.fitted.resize(1, 2);
  cfg.fitted << 0.0, 30.0;
  cfg.separation = 36.0;
  const BoundCheckResult res =
      verify_exponential_association({cfg}, engine, 3.0);
  CHECK(res.violations > 0);
}

TEST_CASE("soft-set inclusions hold over random probes") {
  const BoundCheckResult res = verify_geometry_inclusions(10000, 7);
  CHECK(res.grid_size == 10000);
  CHECK(res.violations == 0);
  CHECK(res.worst_margin >= 0.0);
}

TEST_CASE("geometry probes are deterministic in the seed") {
  const BoundCheckResult a = verify_geometry_inclusions(2000, 11);
  const BoundCheckResult b = verify_geometry_inclusions(2000, 11);
  CHECK(a.worst_margin == b.worst_margin);
  CHECK(a.violations == b.violations);
}

TEST_CASE("empirical constants for the free-constant inequalities") {
  // Diagnostic entries: smallest admissible constant observed on the grid,
  // logged for regression tracking, never a pass/fail gate.
  const BoundCheckResult interval = estimate_gaussian_interval_constant();
  CHECK(interval.violations == 0);
  CHECK(interval.worst_margin >= 1.0);  // the U = L + w rows force C >= 1
  CHECK(interval.worst_margin < 100.0);

  const BoundCheckResult cell = estimate_cell_mass_constant(2000, 7);
  CHECK(cell.violations == 0);
  CHECK(cell.grid_size > 100);
  CHECK(cell.worst_margin > 0.0);
  CHECK(std::isfinite(cell.worst_margin));

  // deterministic in the seed
  const BoundCheckResult again = estimate_cell_mass_constant(2000, 7);
  CHECK(again.worst_margin == cell.worst_margin);
}

TEST_CASE("the default battery is clean") {
  const ExpectationEngine engine(quad_cfg());
  const TheoryBatteryResult battery = run_theory_battery(engine);
  REQUIRE(battery.results.size() == 6);
  for (const auto& r : battery.results) {
    INFO(r.name);
    CHECK(r.violations == 0);
  }
  CHECK(battery.total_violations() == 0);
}
