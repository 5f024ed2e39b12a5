#pragma once

#include <string>
#include <vector>

#include "gmmland/geometry.hpp"
#include "gmmland/landscape.hpp"

namespace gmmland {

struct AssociationStats {
  MatrixXd mean_assoc;             // k_star x k, E_s[Psi_i]
  std::vector<MatrixXd> pair_assoc;  // per s: k x k, E_s[Psi_i Psi_j]
  VoronoiMass vmass;
  MatrixXd center_distances;       // k_star x k, ||beta_i - theta_s||
};

AssociationStats association_stats(const FittedCenters& beta,
                                   const TrueMixture& model,
                                   const ExpectationEngine& engine);

struct ClassifierThresholds {
  double tau_fit = 0.6;
  double tau_empty = -1.0;  // <= 0 means the default 0.25 / k
  double tau_dup = 1.0;     // sigma units
  double resolved_tau_empty(int k) const {
    return tau_empty > 0.0 ? tau_empty : 0.25 / static_cast<double>(k);
  }
};

enum class GroupKind { one_fit_many, many_fit_one };

struct StructureGroup {
  std::vector<int> fitted;       // S_a
  std::vector<int> true_members; // S_a*
  GroupKind kind = GroupKind::one_fit_many;
  // one_fit_many: distance of the fitted center to the mean of its true
  // centers; many_fit_one: largest member distance to the true center.
  double error = 0.0;
};

struct StructureReport {
  std::vector<int> s0;            // near-empty fitted centers
  std::vector<StructureGroup> groups;
  std::vector<int> unclassified;  // fitted centers not matching any rule
  ClassifierThresholds thresholds_used;

  // Canonical label such as "1-2,2-1" (|S_a|-|S_a*| per group, sorted),
  // with +eN / +uN suffixes for near-empty and unclassified counts.
  std::string label() const;
  bool exact_fit(int k, int k_star) const;  // k singleton-singleton pairs
};

// Decompose a (claimed) converged point into the structure taxonomy:
// near-empty centers, one-fit-many singletons and many-fit-one clusters.
// Points that fit no rule are surfaced in `unclassified`, never forced.
StructureReport classify(const AssociationStats& stats,
                         const FittedCenters& beta, const TrueMixture& model,
                         const ClassifierThresholds& thresholds = {});

// Edges (fitted i, true s) of the disjoint complete-bipartite decomposition.
std::vector<std::pair<int, int>> bipartite_graph(const StructureReport& report);

struct SecondOrderReport {
  // Slack of sigma^2 >= ||b_i-b_j||^2 E[Psi_i Psi_j], as 1 - value/sigma^2;
  // >= 0 means the inequality holds. Worst over pairs.
  double pair_separation_worst_slack = 1.0;
  // Slack of sigma^2 >= E[Psi_i Psi_j <b_i - X, u_{s->i}>^2], worst over
  // (i, j, s) with beta_i != theta_s.
  double directional_worst_slack = 1.0;
  int violations = 0;  // slacks below -1e-9
  std::vector<std::pair<int, int>> skipped;  // (i, s) with beta_i == theta_s
};

// Necessary second-order inequalities at a local minimum, evaluated
// numerically. Diagnostic: violations are reported, not thrown.
SecondOrderReport check_second_order_consequences(
    const FittedCenters& beta, const TrueMixture& model,
    const ExpectationEngine& engine);

}  // namespace gmmland
