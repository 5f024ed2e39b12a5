#include "gmmland/classifier.hpp"

#include <algorithm>
#include <cmath>

namespace gmmland {

AssociationStats association_stats(const FittedCenters& beta,
                                   const TrueMixture& model,
                                   const ExpectationEngine& engine) {
  const int k = beta.count();
  const int ks = model.count();
  AssociationStats st;
  st.mean_assoc.resize(ks, k);
  st.pair_assoc.resize(ks);
  st.center_distances.resize(ks, k);
  for (int s = 0; s < ks; ++s) {
    const detail::ComponentStats cs =
        detail::component_stats(beta.centers(), model, engine, s);
    st.mean_assoc.row(s) = cs.assoc.transpose();
    st.pair_assoc[s] = cs.pair;
    for (int j = 0; j < k; ++j) {
      st.center_distances(s, j) = (beta.center(j) - model.center(s)).norm();
    }
  }
  st.vmass = voronoi_mass(model, VoronoiQuery(beta, 0.0), engine);
  return st;
}

namespace {

struct Proposal {
  std::vector<int> fitted;
  std::vector<int> true_members;
};

}  // namespace

StructureReport classify(const AssociationStats& stats,
                         const FittedCenters& beta, const TrueMixture& model,
                         const ClassifierThresholds& thresholds) {
  const int k = beta.count();
  const int ks = model.count();
  if (stats.mean_assoc.rows() != ks || stats.mean_assoc.cols() != k ||
      stats.vmass.probs.rows() != ks || stats.vmass.probs.cols() != k) {
    throw std::invalid_argument("classify: stats shape does not match beta/model");
  }
  const double tau_fit = thresholds.tau_fit;
  const double tau_empty = thresholds.resolved_tau_empty(k);
  const double dup_radius = thresholds.tau_dup * model.sigma();

  // Assign each true center either to a duplicate cluster (>= 2 fitted
  // centers hugging it) or to the single fitted center holding most of its
  // association mass and Voronoi mass.
  std::vector<Proposal> clusters;
  std::vector<std::vector<int>> singleton_trues(k);
  std::vector<bool> conflicted(k, false);
  for (int s = 0; s < ks; ++s) {
    std::vector<int> near;
    for (int i = 0; i < k; ++i) {
      if (stats.center_distances(s, i) <= dup_radius) near.push_back(i);
    }
    if (near.size() >= 2) {
      double assoc_sum = 0.0, mass_sum = 0.0;
      for (int i : near) {
        assoc_sum += stats.mean_assoc(s, i);
        mass_sum += stats.vmass.probs(s, i);
      }
      if (assoc_sum >= tau_fit && mass_sum >= tau_fit) {
        clusters.push_back({near, {s}});
      }
      continue;
    }
    std::vector<int> hits;
    for (int i = 0; i < k; ++i) {
      if (stats.mean_assoc(s, i) >= tau_fit &&
          stats.vmass.probs(s, i) >= tau_fit) {
        hits.push_back(i);
      }
    }
    if (hits.size() == 1) {
      singleton_trues[hits[0]].push_back(s);
    } else if (hits.size() > 1) {
      // Possible only with tau_fit <= 0.5; sharing a true center violates
      // the singleton structure.
      for (int i : hits) conflicted[i] = true;
    }
  }

  std::vector<Proposal> proposals = clusters;
  for (int i = 0; i < k; ++i) {
    if (!singleton_trues[i].empty()) {
      proposals.push_back({{i}, singleton_trues[i]});
    }
  }

  // A fitted center claimed by two proposals breaks disjointness: dissolve
  // every proposal it touches.
  std::vector<int> claims(k, 0);
  for (const auto& p : proposals) {
    for (int i : p.fitted) claims[i] += 1;
  }
  StructureReport rep;
  rep.thresholds_used = thresholds;
  rep.thresholds_used.tau_empty = tau_empty;
  std::vector<bool> grouped(k, false);
  for (const auto& p : proposals) {
    const bool clean = std::none_of(p.fitted.begin(), p.fitted.end(),
                                    [&](int i) { return claims[i] > 1 || conflicted[i]; });
    if (!clean) {
      for (int i : p.fitted) conflicted[i] = true;
      continue;
    }
    StructureGroup g;
    g.fitted = p.fitted;
    g.true_members = p.true_members;
    std::sort(g.fitted.begin(), g.fitted.end());
    std::sort(g.true_members.begin(), g.true_members.end());
    g.kind = g.fitted.size() >= 2 ? GroupKind::many_fit_one
                                  : GroupKind::one_fit_many;
    if (g.kind == GroupKind::many_fit_one) {
      double worst = 0.0;
      for (int i : g.fitted) {
        worst = std::max(worst, stats.center_distances(g.true_members[0], i));
      }
      g.error = worst;
    } else {
      VectorXd target = VectorXd::Zero(model.dim());
      for (int s : g.true_members) target += model.center(s);
      target /= static_cast<double>(g.true_members.size());
      g.error = (beta.center(g.fitted[0]) - target).norm();
    }
    for (int i : g.fitted) grouped[i] = true;
    rep.groups.push_back(std::move(g));
  }
  std::sort(rep.groups.begin(), rep.groups.end(),
            [](const StructureGroup& a, const StructureGroup& b) {
              return a.fitted.front() < b.fitted.front();
            });

  for (int i = 0; i < k; ++i) {
    if (grouped[i]) continue;
    if (conflicted[i]) {
      rep.unclassified.push_back(i);
      continue;
    }
    double mean_assoc_star = 0.0, mass_star = 0.0;
    for (int s = 0; s < ks; ++s) {
      mean_assoc_star += stats.mean_assoc(s, i);
      mass_star += stats.vmass.probs(s, i);
    }
    mean_assoc_star /= static_cast<double>(ks);
    mass_star /= static_cast<double>(ks);
    if (mean_assoc_star <= tau_empty && mass_star <= tau_empty) {
      rep.s0.push_back(i);
    } else {
      rep.unclassified.push_back(i);
    }
  }
  return rep;
}

std::string StructureReport::label() const {
  std::vector<std::pair<int, int>> sig;
  sig.reserve(groups.size());
  for (const auto& g : groups) {
    sig.emplace_back(static_cast<int>(g.fitted.size()),
                     static_cast<int>(g.true_members.size()));
  }
  std::sort(sig.begin(), sig.end());
  std::string out;
  for (std::size_t t = 0; t < sig.size(); ++t) {
    if (t) out += ",";
    out += std::to_string(sig[t].first) + "-" + std::to_string(sig[t].second);
  }
  if (out.empty()) out = "none";
  if (!s0.empty()) out += "+e" + std::to_string(s0.size());
  if (!unclassified.empty()) out += "+u" + std::to_string(unclassified.size());
  return out;
}

bool StructureReport::exact_fit(int k, int k_star) const {
  if (k != k_star) return false;
  if (!s0.empty() || !unclassified.empty()) return false;
  if (static_cast<int>(groups.size()) != k) return false;
  for (const auto& g : groups) {
    if (g.fitted.size() != 1 || g.true_members.size() != 1) return false;
  }
  return true;
}

std::vector<std::pair<int, int>> bipartite_graph(const StructureReport& report) {
  std::vector<std::pair<int, int>> edges;
  for (const auto& g : report.groups) {
    for (int i : g.fitted) {
      for (int s : g.true_members) edges.emplace_back(i, s);
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

SecondOrderReport check_second_order_consequences(
    const FittedCenters& beta, const TrueMixture& model,
    const ExpectationEngine& engine) {
  const int k = beta.count();
  const int ks = model.count();
  const int d = beta.dim();
  const double sigma = model.sigma();
  const double s2 = sigma * sigma;

  SecondOrderReport rep;
  if (k < 2) return rep;  // both families of inequalities are vacuous

  // Unit directions from each true center toward each fitted center.
  MatrixXd dirs(d, k * ks);
  std::vector<bool> valid(k * ks, false);
  for (int i = 0; i < k; ++i) {
    for (int s = 0; s < ks; ++s) {
      const VectorXd v = beta.center(i) - model.center(s);
      const double nv = v.norm();
      if (nv < 1e-12) {
        rep.skipped.emplace_back(i, s);
        dirs.col(i * ks + s).setZero();
      } else {
        dirs.col(i * ks + s) = v / nv;
        valid[i * ks + s] = true;
      }
    }
  }

  VectorXd psi(k);
  const int npair = k * (k - 1) / 2;
  const int m = npair + k * k * ks;
  Integrand g = [&](const VectorXd& x, double* out) {
    associations_into(x, beta.centers(), sigma, psi.data());
    int t = 0;
    for (int i = 0; i < k; ++i) {
      for (int j = i + 1; j < k; ++j) out[t++] = psi[i] * psi[j];
    }
    for (int i = 0; i < k; ++i) {
      for (int s = 0; s < ks; ++s) {
        double proj = 0.0;
        if (valid[i * ks + s]) {
          proj = dirs.col(i * ks + s).dot(beta.center(i) - x);
        }
        const double p2 = proj * proj;
        for (int j = 0; j < k; ++j) {
          out[t++] = (j == i || !valid[i * ks + s]) ? 0.0 : psi[i] * psi[j] * p2;
        }
      }
    }
  };
  ExpectationResult r = engine.expect_mixture(model, m, g);

  int t = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const double val =
          (beta.center(i) - beta.center(j)).squaredNorm() * r.value[t++];
      rep.pair_separation_worst_slack =
          std::min(rep.pair_separation_worst_slack, 1.0 - val / s2);
    }
  }
  for (int i = 0; i < k; ++i) {
    for (int s = 0; s < ks; ++s) {
      for (int j = 0; j < k; ++j) {
        const double val = r.value[t++];
        if (j == i || !valid[i * ks + s]) continue;
        rep.directional_worst_slack =
            std::min(rep.directional_worst_slack, 1.0 - val / s2);
      }
    }
  }
  rep.violations = 0;
  if (rep.pair_separation_worst_slack < -1e-9) rep.violations++;
  if (rep.directional_worst_slack < -1e-9) rep.violations++;
  return rep;
}

}  // namespace gmmland
