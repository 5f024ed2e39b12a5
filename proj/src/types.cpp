#include "gmmland/types.hpp"

#include <cmath>
#include <limits>

namespace gmmland {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;

void require_finite(const MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
  }
}
}  // namespace

TrueMixture::TrueMixture(MatrixXd centers, double sigma)
    : centers_(std::move(centers)), sigma_(sigma) {
  if (centers_.rows() < 1 || centers_.cols() < 1) {
    throw std::invalid_argument("TrueMixture: need d >= 1 and k_star >= 1");
  }
  if (!(sigma_ > 0.0)) {
    throw std::invalid_argument("TrueMixture: sigma must be positive");
  }
  require_finite(centers_, "TrueMixture centers");
  const int k = count();
  if (k >= 2) {
    delta_min_ = std::numeric_limits<double>::infinity();
    for (int s = 0; s < k; ++s) {
      for (int t = s + 1; t < k; ++t) {
        const double d = (centers_.col(s) - centers_.col(t)).norm();
        delta_min_ = std::min(delta_min_, d);
        delta_max_ = std::max(delta_max_, d);
      }
    }
  }
}

FittedCenters::FittedCenters(MatrixXd centers) : centers_(std::move(centers)) {
  if (centers_.rows() < 1 || centers_.cols() < 1) {
    throw std::invalid_argument("FittedCenters: need d >= 1 and k >= 1");
  }
  require_finite(centers_, "FittedCenters centers");
}

double component_log_density(const VectorXd& x, const VectorXd& center,
                             double sigma) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("component_log_density: sigma must be positive");
  }
  if (x.size() != center.size()) {
    throw std::invalid_argument("component_log_density: dimension mismatch");
  }
  const double d = static_cast<double>(x.size());
  return -d * (0.5 * kLogTwoPi + std::log(sigma)) -
         (x - center).squaredNorm() / (2.0 * sigma * sigma);
}

void associations_into(const VectorXd& x, const MatrixXd& beta, double sigma,
                       double* psi) {
  const int k = static_cast<int>(beta.cols());
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  double mx = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < k; ++j) {
    psi[j] = -(x - beta.col(j)).squaredNorm() * inv2s2;
    mx = std::max(mx, psi[j]);
  }
  double z = 0.0;
  for (int j = 0; j < k; ++j) {
    psi[j] = std::exp(psi[j] - mx);
    z += psi[j];
  }
  for (int j = 0; j < k; ++j) psi[j] /= z;
}

PointEvaluation evaluate_point(const VectorXd& x, const FittedCenters& beta,
                               double sigma) {
  if (!x.allFinite()) {
    throw std::invalid_argument("evaluate_point: non-finite point");
  }
  if (x.size() != beta.dim()) {
    throw std::invalid_argument("evaluate_point: dimension mismatch");
  }
  const int k = beta.count();
  PointEvaluation out;
  out.log_component_densities.resize(k);
  out.associations.resize(k);
  for (int j = 0; j < k; ++j) {
    out.log_component_densities[j] =
        component_log_density(x, beta.center(j), sigma);
  }
  const double mx = out.log_component_densities.maxCoeff();
  double z = 0.0;
  for (int j = 0; j < k; ++j) {
    out.associations[j] = std::exp(out.log_component_densities[j] - mx);
    z += out.associations[j];
  }
  out.associations /= z;
  out.log_mixture_density = mx + std::log(z) - std::log(static_cast<double>(k));
  return out;
}

}  // namespace gmmland
