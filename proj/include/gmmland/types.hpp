#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace gmmland {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Ground-truth mixture: equally weighted spherical Gaussians with shared
// standard deviation. Columns of `centers` are the component means.
class TrueMixture {
 public:
  TrueMixture(MatrixXd centers, double sigma);

  int dim() const { return static_cast<int>(centers_.rows()); }
  int count() const { return static_cast<int>(centers_.cols()); }
  const MatrixXd& centers() const { return centers_; }
  VectorXd center(int s) const { return centers_.col(s); }
  double sigma() const { return sigma_; }
  // Minimum / maximum pairwise center separation; both 0 when count()==1.
  double delta_min() const { return delta_min_; }
  double delta_max() const { return delta_max_; }
  double snr() const { return delta_min_ / sigma_; }

 private:
  MatrixXd centers_;
  double sigma_;
  double delta_min_ = 0.0;
  double delta_max_ = 0.0;
};

// Candidate solution: k fitted centers, one per column. Duplicate columns are
// legal and preserved; grouping is the classifier's job.
class FittedCenters {
 public:
  explicit FittedCenters(MatrixXd centers);

  int dim() const { return static_cast<int>(centers_.rows()); }
  int count() const { return static_cast<int>(centers_.cols()); }
  const MatrixXd& centers() const { return centers_; }
  VectorXd center(int j) const { return centers_.col(j); }

 private:
  MatrixXd centers_;
};

struct PointEvaluation {
  VectorXd log_component_densities;  // log f_j(x)
  VectorXd associations;             // soft-argmax weights, sum to 1
  double log_mixture_density;        // log((1/k) sum_j f_j(x))
};

// log N(x | center, sigma^2 I).
double component_log_density(const VectorXd& x, const VectorXd& center,
                             double sigma);

// Densities and association coefficients at x. All work happens in the log
// domain with a max shift, so extreme separations (|x-beta|/sigma ~ 1e4) do
// not overflow or underflow the ratios.
PointEvaluation evaluate_point(const VectorXd& x, const FittedCenters& beta,
                               double sigma);

// Association weights only, written into psi[0..k-1]. Allocation-free hot path
// shared by the expectation integrands.
void associations_into(const VectorXd& x, const MatrixXd& beta, double sigma,
                       double* psi);

}  // namespace gmmland
