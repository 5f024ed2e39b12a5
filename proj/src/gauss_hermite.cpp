#include "gmmland/gauss_hermite.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace gmmland {

namespace {

constexpr int kMaxOrder = 2048;

// log |h_{n-1}(x)| for the orthonormal Hermite polynomials of weight
// exp(-x^2). The raw recurrence spans hundreds of orders of magnitude at the
// extreme nodes, so the running pair is renormalized into a log offset.
double log_abs_hermite(int n_minus_1, double x) {
  double offset = 0.0;
  double p_prev = std::pow(M_PI, -0.25);
  if (n_minus_1 == 0) return std::log(std::fabs(p_prev));
  double p = std::sqrt(2.0) * x * p_prev;
  for (int m = 1; m < n_minus_1; ++m) {
    const double p_next = x * std::sqrt(2.0 / (m + 1)) * p -
                          std::sqrt(static_cast<double>(m) / (m + 1)) * p_prev;
    p_prev = p;
    p = p_next;
    const double mag = std::max(std::fabs(p), std::fabs(p_prev));
    if (mag > 1e250) {
      p *= 1e-250;
      p_prev *= 1e-250;
      offset += 250.0 * std::log(10.0);
    }
  }
  return std::log(std::fabs(p)) + offset;
}

HermiteRule build_rule(int order) {
  if (order < 1 || order > kMaxOrder) {
    throw std::invalid_argument("hermite_rule: order must be in [1, 2048]");
  }
  HermiteRule rule;
  if (order == 1) {
    rule.nodes = {0.0};
    rule.prob = {1.0};
    rule.log_prob = {0.0};
    return rule;
  }

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(order - 1);
  for (int i = 1; i < order; ++i) sub[i - 1] = std::sqrt(0.5 * i);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  Eigen::VectorXd x = es.eigenvalues();  // ascending

  // The rule is antisymmetric in exact arithmetic; enforce it so odd
  // integrands cancel to rounding level.
  rule.nodes.resize(order);
  for (int i = 0; i < order; ++i) {
    rule.nodes[i] = 0.5 * (x[i] - x[order - 1 - i]);
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;

  // w_i = 1 / (n * h_{n-1}(x_i)^2), evaluated in the log domain so the
  // extreme-node weights keep full relative precision.
  std::vector<double> log_w(order);
  for (int i = 0; i < order; ++i) {
    const double t = rule.nodes[i];
    log_w[i] = -std::log(static_cast<double>(order)) -
               2.0 * log_abs_hermite(order - 1, t);
  }
  double mx = log_w[0];
  for (double lw : log_w) mx = std::max(mx, lw);
  double z = 0.0;
  for (double lw : log_w) z += std::exp(lw - mx);
  const double log_sum = mx + std::log(z);

  rule.prob.resize(order);
  rule.log_prob.resize(order);
  double psum = 0.0;
  for (int i = 0; i < order; ++i) {
    rule.log_prob[i] = log_w[i] - log_sum;
    rule.prob[i] = std::exp(rule.log_prob[i]);
    psum += rule.prob[i];
  }
  for (int i = 0; i < order; ++i) rule.prob[i] /= psum;
  // Pin the compensated total to exactly one by absorbing the residual into a
  // central weight, so constants integrate to 1.0 bit-exactly.
  {
    double s = 0.0, c = 0.0;
    for (double p : rule.prob) {
      const double t = s + p;
      c += (std::fabs(s) >= std::fabs(p)) ? (s - t) + p : (p - t) + s;
      s = t;
    }
    const int mid = order / 2;
    rule.prob[mid] -= (s + c) - 1.0;
    rule.log_prob[mid] = std::log(rule.prob[mid]);
  }
  return rule;
}

}  // namespace

const HermiteRule& hermite_rule(int order) {
  static std::mutex mu;
  static std::map<int, HermiteRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) {
    it = cache.emplace(order, build_rule(order)).first;
  }
  return it->second;
}

}  // namespace gmmland
