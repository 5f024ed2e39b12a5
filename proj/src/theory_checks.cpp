#include "gmmland/theory_checks.hpp"

#include <cmath>
#include <random>

#include "gmmland/gauss_hermite.hpp"
#include "gmmland/geometry.hpp"

namespace gmmland {

namespace {

// Relative slack for comparisons that are exact equalities in real
// arithmetic (e.g. both tail lower bounds coincide at t = 0).
double rounding_slack(double a, double b) {
  return 4e-16 * std::max({std::fabs(a), std::fabs(b), 1e-300});
}

void check_pair(double quantity, double bound, BoundCheckResult& res) {
  const double margin = bound - quantity;
  if (margin < -rounding_slack(quantity, bound)) res.violations += 1;
  res.worst_margin = std::min(res.worst_margin, margin);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

BoundCheckResult verify_gaussian_tails(const std::vector<double>& grid) {
  BoundCheckResult res{"gaussian_tails", 0, 0, kInf};
  for (double t : grid) {
    if (t < 0.0) {
      throw std::invalid_argument("verify_gaussian_tails: grid values must be >= 0");
    }
    res.grid_size += 1;
    const double e = std::exp(-0.5 * t * t);
    const double phi = e / std::sqrt(2.0 * M_PI);
    const double lb1 = phi / (t + 1.0);
    const double lb2 = std::sqrt(2.0 / M_PI) * e / (t + std::sqrt(t * t + 4.0));
    const double tail = 0.5 * std::erfc(t / M_SQRT2);
    check_pair(lb1, lb2, res);
    check_pair(lb2, tail, res);
    check_pair(tail, e, res);
  }
  return res;
}

BoundCheckResult verify_variance_lower_bound(
    const std::vector<std::pair<double, double>>& grid) {
  BoundCheckResult res{"variance_lower_bound", 0, 0, kInf};
  const HermiteRule& rule = hermite_rule(80);
  for (auto [a, w] : grid) {
    res.grid_size += 1;
    double ey = 0.0, ey2 = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double x = M_SQRT2 * rule.nodes[i];
      const double y = 1.0 / (1.0 + std::exp(-(x - a) * w));
      ey += rule.prob[i] * y;
      ey2 += rule.prob[i] * y * y;
    }
    const double var = std::max(0.0, ey2 - ey * ey);
    const double aw = std::fabs(w);
    const double bound = std::pow(aw, 5) / 48.0 *
                         std::exp(-4.0 * std::pow(aw + 2.0 * std::fabs(a), 2));
    check_pair(bound, var, res);
  }
  return res;
}

BoundCheckResult verify_exponential_association(
    const std::vector<ExponentialAssociationConfig>& configs,
    const ExpectationEngine& engine, double denominator) {
  BoundCheckResult res{"exponential_association", 0, 0, kInf};
  for (const auto& cfg : configs) {
    if (cfg.fitted.cols() < 2 || cfg.fitted.rows() != cfg.true_center.size()) {
      throw std::invalid_argument("exponential_association: need >= 2 fitted centers");
    }
    const double di = (cfg.fitted.col(0) - cfg.true_center).norm();
    const double dj = (cfg.fitted.col(1) - cfg.true_center).norm();
    if (cfg.separation < 35.0) {
      throw std::invalid_argument("exponential_association: requires D >= 35");
    }
    if (dj < di + (5.0 / 6.0) * cfg.separation) {
      throw std::invalid_argument(
          "exponential_association: requires ||b_j - t|| >= ||b_i - t|| + (5/6) D");
    }
    res.grid_size += 1;

    TrueMixture point_model(cfg.true_center, 1.0);
    const MatrixXd beta = cfg.fitted;
    const int k = static_cast<int>(beta.cols());
    LogIntegrand log_psi_j = [&](const VectorXd& x) {
      double mx = -std::numeric_limits<double>::infinity();
      VectorXd lg(k);
      for (int l = 0; l < k; ++l) {
        lg[l] = -0.5 * (x - beta.col(l)).squaredNorm();
        mx = std::max(mx, lg[l]);
      }
      double z = 0.0;
      for (int l = 0; l < k; ++l) z += std::exp(lg[l] - mx);
      return lg[1] - mx - std::log(z);
    };
    const double log_e = engine.log_expect_component(point_model, 0, log_psi_j);
    const double log_bound = -cfg.separation * cfg.separation / denominator;
    // Margins in the log domain; the quantities themselves underflow doubles.
    const double margin = log_bound - log_e;
    if (margin < 0.0) res.violations += 1;
    res.worst_margin = std::min(res.worst_margin, margin);
  }
  return res;
}

BoundCheckResult verify_geometry_inclusions(int samples, std::uint64_t seed) {
  BoundCheckResult res{"geometry_inclusions", 0, 0, kInf};
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> dim_dist(1, 2);
  std::uniform_int_distribution<int> k_dist(1, 4);
  std::uniform_real_distribution<double> center_dist(-3.0, 3.0);
  std::uniform_real_distribution<double> point_dist(-5.0, 5.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double c_values[] = {1.0, 2.0, 4.0};
  const double slack = 1e-12;

  // Numeric implications record how much headroom the conclusion had;
  // boolean set-membership implications only count violations.
  auto imply = [&res, slack](bool premise, double quantity, double threshold) {
    if (!premise) return;
    const double margin = quantity - threshold;
    if (margin < -slack * threshold) res.violations += 1;
    res.worst_margin = std::min(res.worst_margin, margin);
  };

  for (int n = 0; n < samples; ++n) {
    res.grid_size += 1;
    const int d = dim_dist(gen);
    const int k = k_dist(gen);
    MatrixXd centers(d, k);
    for (int j = 0; j < k; ++j) {
      for (int a = 0; a < d; ++a) centers(a, j) = center_dist(gen);
    }
    // Occasional exact duplicates exercise the degenerate-slab convention.
    if (k >= 2 && unit(gen) < 0.05) centers.col(1) = centers.col(0);
    FittedCenters beta(centers);
    VectorXd x(d);
    for (int a = 0; a < d; ++a) x[a] = point_dist(gen);
    VectorXd psi(k);
    associations_into(x, centers, 1.0, psi.data());
    const double dk = static_cast<double>(k);

    for (double c : c_values) {
      const SoftMembership at_c =
          soft_membership(x, VoronoiQuery(beta, std::log(c)), 1.0);
      const SoftMembership at_ck =
          soft_membership(x, VoronoiQuery(beta, std::log(c * dk)), 1.0);
      const SoftMembership at_2 =
          soft_membership(x, VoronoiQuery(beta, std::log(2.0)), 1.0);
      const SoftMembership at_2log2k =
          soft_membership(x, VoronoiQuery(beta, 2.0 * std::log(2.0 * dk)), 1.0);
      for (int i = 0; i < k; ++i) {
        // enlarged-cell membership at log c forces psi_i >= 1/(ck)
        imply(at_c.in_cell[i], psi[i], 1.0 / (c * dk));
        // psi_i >= 1/(ck) forces membership in the log(ck) enlargement
        if (psi[i] >= 1.0 / (c * dk) && !at_ck.in_cell[i]) res.violations += 1;
        for (int j = 0; j < k; ++j) {
          if (j == i) continue;
          const double prod = psi[i] * psi[j];
          if (c == 2.0) {
            imply(at_2.in_cell[i] && at_2.in_cell[j], prod,
                  1.0 / (4.0 * dk * dk));
            if (prod >= 1.0 / (4.0 * dk * dk) &&
                !(at_2log2k.in_cell[i] && at_2log2k.in_cell[j])) {
              res.violations += 1;
            }
          }
          imply(at_c.in_boundary[i][j] && at_c.in_cell[j], prod,
                1.0 / (c * c * c * dk * dk));
        }
      }
    }
  }
  return res;
}

namespace {

double normal_tail_mass(double a, double b) {
  // P(a <= Z <= b) for a <= b, stable in both tails.
  if (a >= b) return 0.0;
  return 0.5 * (std::erfc(a / M_SQRT2) - std::erfc(b / M_SQRT2));
}

}  // namespace

BoundCheckResult estimate_gaussian_interval_constant() {
  BoundCheckResult res{"gaussian_interval_constant", 0, 0, 0.0};
  const double inf = std::numeric_limits<double>::infinity();
  for (double L = 0.0; L <= 4.01; L += 0.25) {
    for (double w : {0.1, 0.25, 0.5, 1.0, 2.0, 4.0}) {
      for (double U : {L + 0.5 * w, L + w, L + 2.0 * w, L + 8.0, inf}) {
        res.grid_size += 1;
        const double full = normal_tail_mass(L, U);
        const double head = normal_tail_mass(L, std::min(U, L + w));
        const double denom = std::max(1.0, 1.0 / w) * head;
        if (denom > 0.0) {
          res.worst_margin = std::max(res.worst_margin, full / denom);
        }
      }
    }
  }
  return res;
}

BoundCheckResult estimate_cell_mass_constant(int configs, std::uint64_t seed) {
  BoundCheckResult res{"cell_mass_constant", 0, 0, 0.0};
  const double alpha = std::log(2.0);
  const double inf = std::numeric_limits<double>::infinity();
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> k_dist(2, 4);
  std::uniform_real_distribution<double> pos(-3.0, 3.0);

  for (int n = 0; n < configs; ++n) {
    const int k = k_dist(gen);
    std::vector<double> beta(k);
    for (double& b : beta) b = pos(gen);
    const double theta = pos(gen);

    for (int j = 0; j < k; ++j) {
      // hard cell of j as an interval
      double cell_lo = -inf, cell_hi = inf;
      // soft cell at level alpha (log-density-ratio units)
      double soft_lo = -inf, soft_hi = inf;
      bool empty = false;
      for (int l = 0; l < k; ++l) {
        if (l == j) continue;
        const double gap = beta[j] - beta[l];
        if (gap == 0.0) continue;  // duplicate: no constraint
        const double mid = 0.5 * (beta[j] + beta[l]);
        if (gap > 0.0) {
          cell_lo = std::max(cell_lo, mid);
          soft_lo = std::max(soft_lo, mid - alpha / gap);
        } else {
          cell_hi = std::min(cell_hi, mid);
          soft_hi = std::min(soft_hi, mid + alpha / (-gap));
        }
      }
      if (cell_lo > cell_hi) empty = true;
      // require theta strictly outside the interior of the cell
      if (!empty && theta > cell_lo && theta < cell_hi) continue;
      const double numer =
          empty ? 0.0 : normal_tail_mass(cell_lo - theta, cell_hi - theta);
      if (numer < 1e-14) continue;

      double denom = 0.0;
      for (int l = 0; l < k; ++l) {
        if (l == j) continue;
        const double gap = std::fabs(beta[j] - beta[l]);
        double slab_lo = -inf, slab_hi = inf;
        if (gap > 0.0) {
          const double mid = 0.5 * (beta[j] + beta[l]);
          slab_lo = mid - alpha / gap;
          slab_hi = mid + alpha / gap;
        }
        const double lo = std::max(soft_lo, slab_lo);
        const double hi = std::min(soft_hi, slab_hi);
        const double mass =
            lo < hi ? normal_tail_mass(lo - theta, hi - theta) : 0.0;
        denom += std::max(1.0, gap / alpha) * mass;
      }
      if (denom <= 0.0) continue;
      res.grid_size += 1;
      res.worst_margin = std::max(res.worst_margin, numer / denom);
    }
  }
  return res;
}

TheoryBatteryResult run_theory_battery(const ExpectationEngine& engine) {
  TheoryBatteryResult out;

  std::vector<double> t_grid;
  for (int i = 0; i <= 100; ++i) t_grid.push_back(0.1 * i);
  out.results.push_back(verify_gaussian_tails(t_grid));

  std::vector<std::pair<double, double>> aw_grid;
  for (int ia = 0; ia <= 24; ++ia) {
    for (int iw = 0; iw <= 24; ++iw) {
      aw_grid.emplace_back(-3.0 + 0.25 * ia, -3.0 + 0.25 * iw);
    }
  }
  out.results.push_back(verify_variance_lower_bound(aw_grid));

  std::vector<ExponentialAssociationConfig> configs;
  for (int i = 0; i < 10; ++i) {
    const double D = 35.0 + 25.0 * i / 9.0;
    ExponentialAssociationConfig cfg;
    cfg.true_center = VectorXd::Zero(1);
    const int extra = i % 3;  // uniformity in other centers
    cfg.fitted.resize(1, 2 + extra);
    cfg.fitted(0, 0) = 0.1 * i;
    cfg.fitted(0, 1) = cfg.fitted(0, 0) + (5.0 / 6.0) * D + 0.5;
    for (int e = 0; e < extra; ++e) cfg.fitted(0, 2 + e) = 60.0 + 7.0 * e;
    cfg.separation = D;
    configs.push_back(cfg);
  }
  out.results.push_back(verify_exponential_association(configs, engine));

  out.results.push_back(verify_geometry_inclusions(100000, 7));
  out.results.push_back(estimate_gaussian_interval_constant());
  out.results.push_back(estimate_cell_mass_constant(2000, 7));
  return out;
}

}  // namespace gmmland
