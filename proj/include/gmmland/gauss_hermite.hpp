#pragma once

#include <vector>

namespace gmmland {

// One-dimensional Gauss-Hermite rule (weight exp(-t^2)), repackaged as a
// probability rule for N(0,1): E[g(Z)] ~= sum_i prob[i] * g(sqrt(2)*node[i]).
// Probability weights are normalized to sum to exactly 1; log_prob carries
// full relative precision down to the extreme nodes, which plain weights lose
// to underflow-level cancellation.
struct HermiteRule {
  std::vector<double> nodes;     // ascending, antisymmetric
  std::vector<double> prob;      // normalized weights
  std::vector<double> log_prob;  // log of prob
};

// Cached per order; thread-safe. Orders up to 512 are supported.
const HermiteRule& hermite_rule(int order);

}  // namespace gmmland
