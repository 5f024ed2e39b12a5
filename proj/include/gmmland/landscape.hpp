#pragma once

#include <optional>
#include <vector>

#include "gmmland/expectation.hpp"
#include "gmmland/types.hpp"

namespace gmmland {

struct LandscapeValue {
  double loss = 0.0;
  // loss(beta) - loss(theta*), present when k == k_star; nonnegative up to
  // engine accuracy by KL nonnegativity. Both sides share one engine so
  // quadrature bias cancels.
  std::optional<double> kl_gap;
};

struct StationarityReport {
  double grad_inf_norm = 0.0;
  double em_residual = 0.0;        // ||em_step(beta) - beta||_inf
  double stein_residual = 0.0;     // equivalent stationary condition residual
  double raw_stein_residual = 0.0; // integration-by-parts identity residual;
                                   // vanishes for every beta, stationary or not
  double hessian_min_eigenvalue = 0.0;
  double hessian_spectral_norm = 0.0;
  bool local_minimum = false;  // min eig >= -1e-7 * (1 + ||H||_2)
};

enum class DescentMethod { em, gradient_descent };
enum class Termination { gradient_tol, step_tol, max_iters, runaway };

struct DescentOptions {
  DescentMethod method = DescentMethod::em;
  double grad_tol = 1e-9;
  double step_tol = 1e-12;
  int max_iters = 50000;
};

struct DescentTrace {
  // Start and terminal points always present; long runs keep every
  // `iterate_stride`-th point in between. Losses cover every iteration.
  std::vector<MatrixXd> iterates;
  std::vector<double> losses;
  int iterate_stride = 1;
  Termination termination = Termination::max_iters;
  const MatrixXd& final_point() const { return iterates.back(); }
};

struct DegenerateComponentError : std::runtime_error {
  explicit DegenerateComponentError(int j)
      : std::runtime_error("degenerate component " + std::to_string(j) +
                           ": mixture association mass below 1e-300"),
        component(j) {}
  int component;
};

struct EngineAccuracyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Population negative log-likelihood -E_*[log f].
LandscapeValue loss(const FittedCenters& beta, const TrueMixture& model,
                    const ExpectationEngine& engine);

// d x k matrix; column j is E_*[Psi_j (beta_j - X)] / sigma^2. The 1/sigma^2
// factor makes this the exact derivative of `loss` for every sigma (the two
// agree at sigma = 1).
MatrixXd gradient(const FittedCenters& beta, const TrueMixture& model,
                  const ExpectationEngine& engine);

// (dk) x (dk), entry order (component j, coordinate a) -> j*d + a.
// Symmetrized by averaging with its transpose.
MatrixXd hessian(const FittedCenters& beta, const TrueMixture& model,
                 const ExpectationEngine& engine);

// beta_j <- E_*[Psi_j X] / E_*[Psi_j].
FittedCenters em_step(const FittedCenters& beta, const TrueMixture& model,
                      const ExpectationEngine& engine);

DescentTrace descend(const FittedCenters& beta0, const TrueMixture& model,
                     const ExpectationEngine& engine,
                     const DescentOptions& opts = {});

StationarityReport stationarity_report(const FittedCenters& beta,
                                       const TrueMixture& model,
                                       const ExpectationEngine& engine);

// || sum_j beta_j E_*[Psi_j] - mean(theta*) ||; zero at stationary points.
double check_mean_consistency(const FittedCenters& beta,
                              const TrueMixture& model,
                              const ExpectationEngine& engine);

// Largest norm over j of the component of beta_j orthogonal to
// span{theta*_s}; zero at stationary points. Rank tolerance 1e-10.
double check_span(const FittedCenters& beta, const TrueMixture& model);

namespace detail {
// Mixture-level E_*[Psi_j], E_*[Psi_j X] and loss in one pass; shared by EM,
// gradient and descent.
struct MixtureStats {
  VectorXd assoc;    // k
  MatrixXd assoc_x;  // d x k
  double loss = 0.0;
};
MixtureStats mixture_stats(const MatrixXd& beta, const TrueMixture& model,
                           const ExpectationEngine& engine);

// Per true-component E_s[Psi_i], E_s[Psi_i Psi_j], E_s[Psi_i X].
struct ComponentStats {
  VectorXd assoc;    // k
  MatrixXd pair;     // k x k, symmetric
  MatrixXd assoc_x;  // d x k
};
ComponentStats component_stats(const MatrixXd& beta, const TrueMixture& model,
                               const ExpectationEngine& engine, int s);
}  // namespace detail

}  // namespace gmmland
