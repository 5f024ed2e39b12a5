#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gmmland/expectation.hpp"

namespace gmmland {

struct BoundCheckResult {
  std::string name;
  int grid_size = 0;
  int violations = 0;
  // min over the grid of (bound - quantity); >= 0 means the bound holds
  // everywhere. Logged for regression tracking.
  double worst_margin = 0.0;
};

// Sandwich bounds on the standard normal upper tail:
//   phi(t)/(t+1) <= sqrt(2/pi) e^{-t^2/2} / (t + sqrt(t^2+4))
//                <= P(Z >= t) <= e^{-t^2/2},   t >= 0.
// P(Z >= t) comes from erfc. A 4-ulp relative slack absorbs rounding at the
// t = 0 equality point.
BoundCheckResult verify_gaussian_tails(const std::vector<double>& grid);

// Var(1/(1+e^{-(X-a)w})) >= |w|^5/48 * exp(-4(|w|+2|a|)^2) for X ~ N(0,1).
// Variance computed with an order-80 Gauss-Hermite rule.
BoundCheckResult verify_variance_lower_bound(
    const std::vector<std::pair<double, double>>& grid);

struct ExponentialAssociationConfig {
  VectorXd true_center;
  MatrixXd fitted;  // column 0 = dominating center i, column 1 = dominated j;
                    // extra columns are allowed, the bound is uniform in them
  double separation = 35.0;  // D
};

// If ||beta_j - theta_s|| >= ||beta_i - theta_s|| + (5/6) D with D >= 35 and
// sigma = 1, then E_s[Psi_j] <= exp(-D^2/denominator) with denominator 33.
// Expectations run in the log domain; `denominator` is overridable as a
// negative control.
BoundCheckResult verify_exponential_association(
    const std::vector<ExponentialAssociationConfig>& configs,
    const ExpectationEngine& engine, double denominator = 33.0);

// Soft Voronoi set / boundary inclusions against direct association
// evaluation, on random configurations (d <= 2, k <= 4) and points, for
// c in {1, 2, 4}.
BoundCheckResult verify_geometry_inclusions(int samples, std::uint64_t seed);

// Two auxiliary inequalities hold only up to an unspecified universal
// constant; these report the smallest constant observed on a grid in
// `worst_margin` (violations stays 0 -- diagnostic, never pass/fail).
//
// Smallest C with  int_L^U phi <= C max(1, 1/w) int_L^min(U, L+w) phi
// over 0 <= L <= U <= inf, w > 0.
BoundCheckResult estimate_gaussian_interval_constant();
// Smallest C with  P_s(V_j) <= sum_l C max(1, d_jl/alpha) P_s(V~_j ∩ slab_jl)
// at alpha = log 2, over random 1-d configurations with theta_s outside the
// interior of cell j. All masses are exact interval CDF differences.
BoundCheckResult estimate_cell_mass_constant(int configs, std::uint64_t seed);

struct TheoryBatteryResult {
  std::vector<BoundCheckResult> results;
  int total_violations() const {
    int v = 0;
    for (const auto& r : results) v += r.violations;
    return v;
  }
};

// All verifiers on their default grids.
TheoryBatteryResult run_theory_battery(const ExpectationEngine& engine);

}  // namespace gmmland
