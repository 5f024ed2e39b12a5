#pragma once

#include <vector>

#include "gmmland/expectation.hpp"
#include "gmmland/types.hpp"

namespace gmmland {

// Enlargement parameter alpha is in log-density-ratio units at unit
// variance: a point is in the alpha-enlarged cell of center i when
// log f_i >= log f_l - alpha for every competitor l. Thresholds scale by
// sigma^2 so alpha = log c keeps its meaning for every sigma.
struct VoronoiQuery {
  FittedCenters beta;
  double alpha = 0.0;

  VoronoiQuery(FittedCenters b, double a) : beta(std::move(b)), alpha(a) {
    if (a < 0.0) throw std::invalid_argument("VoronoiQuery: alpha must be >= 0");
  }
};

// Indices of all nearest centers (ties and duplicate columns give several).
std::vector<int> hard_membership(const VectorXd& x, const VoronoiQuery& query);

struct SoftMembership {
  std::vector<bool> in_cell;            // enlarged cell per center
  std::vector<std::vector<bool>> in_boundary;  // k x k soft slab, symmetric
};

SoftMembership soft_membership(const VectorXd& x, const VoronoiQuery& query,
                               double sigma);

enum class MassMethod { interval_exact, monte_carlo };

struct VoronoiMass {
  MatrixXd probs;  // k_star x k, rows sum to 1 (distinct centers)
  MassMethod method = MassMethod::interval_exact;
  // Groups of exactly-coincident centers with >= 2 members; the shared cell
  // mass is split equally among members and flagged here.
  std::vector<std::vector<int>> duplicate_groups;
};

// Mass of each hard cell under each true component. d = 1 is exact via the
// Gaussian CDF at the midpoint cell boundaries; d >= 2 uses the engine's
// seeded Monte Carlo sample count with ties broken to the lowest index.
VoronoiMass voronoi_mass(const TrueMixture& model, const VoronoiQuery& query,
                         const ExpectationEngine& engine);

double gaussian_cdf(double z);

}  // namespace gmmland
