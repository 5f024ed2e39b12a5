#include "gmmland/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace gmmland {

double gaussian_cdf(double z) { return 0.5 * std::erfc(-z / M_SQRT2); }

std::vector<int> hard_membership(const VectorXd& x, const VoronoiQuery& query) {
  const MatrixXd& b = query.beta.centers();
  const int k = static_cast<int>(b.cols());
  std::vector<double> d2(k);
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < k; ++j) {
    d2[j] = (x - b.col(j)).squaredNorm();
    best = std::min(best, d2[j]);
  }
  std::vector<int> out;
  for (int j = 0; j < k; ++j) {
    if (d2[j] == best) out.push_back(j);
  }
  return out;
}

SoftMembership soft_membership(const VectorXd& x, const VoronoiQuery& query,
                               double sigma) {
  const MatrixXd& b = query.beta.centers();
  const int k = static_cast<int>(b.cols());
  const double thr = query.alpha * sigma * sigma;
  SoftMembership out;
  out.in_cell.assign(k, true);
  out.in_boundary.assign(k, std::vector<bool>(k, true));
  // Pairwise comparisons in log-density-ratio scale: at sigma = 1,
  // delta = log f_i(x) - log f_l(x), so membership at level alpha means
  // f_i >= e^{-alpha} f_l against every competitor. This is the scale the
  // soft-set inclusions are proved in; the raw midpoint inner product is
  // half of delta.
  for (int i = 0; i < k; ++i) {
    for (int l = 0; l < k; ++l) {
      if (l == i) continue;
      const double delta = 0.5 * ((x - b.col(l)).squaredNorm() -
                                  (x - b.col(i)).squaredNorm());
      if (delta < -thr) out.in_cell[i] = false;
      out.in_boundary[i][l] = std::fabs(delta) <= thr;
    }
  }
  return out;
}

namespace {

// Exactly-coincident columns grouped; group id = lowest member index.
std::vector<int> duplicate_group_of(const MatrixXd& b) {
  const int k = static_cast<int>(b.cols());
  std::vector<int> group(k);
  for (int j = 0; j < k; ++j) {
    group[j] = j;
    for (int i = 0; i < j; ++i) {
      if (b.col(i) == b.col(j)) {
        group[j] = group[i];
        break;
      }
    }
  }
  return group;
}

VoronoiMass interval_exact_mass(const TrueMixture& model,
                                const FittedCenters& beta) {
  const MatrixXd& b = beta.centers();
  const int k = beta.count();
  const int ks = model.count();
  const std::vector<int> group = duplicate_group_of(b);

  // Distinct center values, ascending; cells are midpoint intervals.
  std::map<double, std::vector<int>> by_value;
  for (int j = 0; j < k; ++j) by_value[b(0, j)].push_back(j);
  std::vector<double> vals;
  std::vector<std::vector<int>> members;
  for (auto& [v, js] : by_value) {
    vals.push_back(v);
    members.push_back(js);
  }
  const int n = static_cast<int>(vals.size());

  VoronoiMass out;
  out.method = MassMethod::interval_exact;
  out.probs = MatrixXd::Zero(ks, k);
  for (int s = 0; s < ks; ++s) {
    const double mu = model.centers()(0, s);
    const double sig = model.sigma();
    for (int c = 0; c < n; ++c) {
      const double lo = (c == 0) ? -std::numeric_limits<double>::infinity()
                                 : 0.5 * (vals[c - 1] + vals[c]);
      const double hi = (c == n - 1) ? std::numeric_limits<double>::infinity()
                                     : 0.5 * (vals[c] + vals[c + 1]);
      const double mass =
          gaussian_cdf((hi - mu) / sig) - gaussian_cdf((lo - mu) / sig);
      const double share = mass / static_cast<double>(members[c].size());
      for (int j : members[c]) out.probs(s, j) = share;
    }
  }
  for (int j = 0; j < k; ++j) {
    if (group[j] != j) {
      auto& gs = out.duplicate_groups;
      auto it = std::find_if(gs.begin(), gs.end(), [&](const auto& g) {
        return g.front() == group[j];
      });
      if (it == gs.end()) {
        gs.push_back({group[j], j});
      } else {
        it->push_back(j);
      }
    }
  }
  return out;
}

VoronoiMass monte_carlo_mass(const TrueMixture& model,
                             const FittedCenters& beta,
                             const ExpectationEngine& engine) {
  const MatrixXd& b = beta.centers();
  const int k = beta.count();
  const int ks = model.count();
  const int d = model.dim();
  const std::vector<int> group = duplicate_group_of(b);

  VoronoiMass out;
  out.method = MassMethod::monte_carlo;
  out.probs = MatrixXd::Zero(ks, k);
  const std::int64_t n = engine.config().mc_samples;

  for (int s = 0; s < ks; ++s) {
    // Distinct salt keeps these draws decoupled from expectation streams.
    NormalStream stream(engine.config().seed ^ 0x7602ee5a1de26f13ULL,
                        static_cast<std::uint64_t>(s));
    std::vector<std::int64_t> counts(k, 0);
    VectorXd x(d);
    for (std::int64_t i = 0; i < n; ++i) {
      for (int a = 0; a < d; ++a) {
        x[a] = model.centers()(a, s) + model.sigma() * stream.next();
      }
      int best = 0;
      double bd = (x - b.col(0)).squaredNorm();
      for (int j = 1; j < k; ++j) {
        const double dj = (x - b.col(j)).squaredNorm();
        if (dj < bd) {
          bd = dj;
          best = j;
        }
      }
      counts[group[best]] += 1;
    }
    std::vector<int> group_size(k, 0);
    for (int j = 0; j < k; ++j) group_size[group[j]] += 1;
    for (int j = 0; j < k; ++j) {
      out.probs(s, j) = static_cast<double>(counts[group[j]]) /
                        (static_cast<double>(n) * group_size[group[j]]);
    }
  }
  for (int j = 0; j < k; ++j) {
    if (group[j] != j) {
      auto& gs = out.duplicate_groups;
      auto it = std::find_if(gs.begin(), gs.end(), [&](const auto& g) {
        return g.front() == group[j];
      });
      if (it == gs.end()) {
        gs.push_back({group[j], j});
      } else {
        it->push_back(j);
      }
    }
  }
  return out;
}

}  // namespace

VoronoiMass voronoi_mass(const TrueMixture& model, const VoronoiQuery& query,
                         const ExpectationEngine& engine) {
  if (query.beta.dim() != model.dim()) {
    throw std::invalid_argument("voronoi_mass: dimension mismatch");
  }
  if (model.dim() == 1) return interval_exact_mass(model, query.beta);
  return monte_carlo_mass(model, query.beta, engine);
}

}  // namespace gmmland
