#include "gmmland/expectation.hpp"

#include <cmath>
#include <vector>

#include "gmmland/gauss_hermite.hpp"

namespace gmmland {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Compensated (Neumaier) accumulator; deterministic and cheap.
struct Kahan {
  double sum = 0.0;
  double c = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::fabs(sum) >= std::fabs(v)) {
      c += (sum - t) + v;
    } else {
      c += (v - t) + sum;
    }
    sum = t;
  }
  double get() const { return sum + c; }
};

}  // namespace

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t stream)
    : gen_(splitmix64(seed ^ splitmix64(stream + 1))) {}

double NormalStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0,1], u2 in [0,1)
  const double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

ExpectationEngine::ExpectationEngine(EngineConfig cfg) : cfg_(cfg) {
  if (cfg_.quadrature_order < 0 || cfg_.quadrature_order > 2048) {
    throw UnsupportedConfigError("quadrature order must be in [0, 2048]");
  }
  if (cfg_.mc_samples < 1) {
    throw UnsupportedConfigError("mc_samples must be positive");
  }
}

int ExpectationEngine::effective_order(int dim) const {
  if (cfg_.quadrature_order > 0) return cfg_.quadrature_order;
  switch (dim) {
    case 1: return 60;
    case 2: return 40;
    default: return 24;
  }
}

ExpectationResult ExpectationEngine::quad_component(const TrueMixture& model,
                                                    int s, int m,
                                                    const Integrand& g) const {
  const int d = model.dim();
  if (d > 3) {
    throw UnsupportedConfigError(
        "tensor_quadrature supports d <= 3; use monte_carlo");
  }
  const int order = effective_order(d);
  double nodes_total = 1.0;
  for (int a = 0; a < d; ++a) nodes_total *= order;
  if (nodes_total > 1e6) {
    throw UnsupportedConfigError("tensor_quadrature: order^d exceeds 1e6 nodes");
  }
  const HermiteRule& rule = hermite_rule(order);
  const VectorXd mu = model.center(s);
  const double scale = model.sigma() * kSqrt2;

  std::vector<Kahan> acc(m);
  std::vector<double> out(m);
  VectorXd x(d);
  std::vector<int> idx(d, 0);
  while (true) {
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      x[a] = mu[a] + scale * rule.nodes[idx[a]];
      w *= rule.prob[idx[a]];
    }
    g(x, out.data());
    for (int t = 0; t < m; ++t) acc[t].add(w * out[t]);
    int a = 0;
    for (; a < d; ++a) {
      if (++idx[a] < order) break;
      idx[a] = 0;
    }
    if (a == d) break;
  }

  ExpectationResult res;
  res.value.resize(m);
  res.mc_std_error = VectorXd::Zero(m);
  for (int t = 0; t < m; ++t) res.value[t] = acc[t].get();
  return res;
}

ExpectationResult ExpectationEngine::mc_component(const TrueMixture& model,
                                                  int s, int m,
                                                  const Integrand& g) const {
  const int d = model.dim();
  const VectorXd mu = model.center(s);
  const double sigma = model.sigma();
  NormalStream stream(cfg_.seed, static_cast<std::uint64_t>(s));

  std::vector<Kahan> acc(m), acc2(m);
  std::vector<double> out(m);
  VectorXd x(d);
  const std::int64_t n = cfg_.mc_samples;
  for (std::int64_t i = 0; i < n; ++i) {
    for (int a = 0; a < d; ++a) x[a] = mu[a] + sigma * stream.next();
    g(x, out.data());
    for (int t = 0; t < m; ++t) {
      acc[t].add(out[t]);
      acc2[t].add(out[t] * out[t]);
    }
  }

  ExpectationResult res;
  res.value.resize(m);
  res.mc_std_error.resize(m);
  const double dn = static_cast<double>(n);
  for (int t = 0; t < m; ++t) {
    const double mean = acc[t].get() / dn;
    double var = 0.0;
    if (n > 1) var = std::max(0.0, (acc2[t].get() - dn * mean * mean) / (dn - 1.0));
    res.value[t] = mean;
    res.mc_std_error[t] = std::sqrt(var / dn);
  }
  return res;
}

ExpectationResult ExpectationEngine::expect_component(const TrueMixture& model,
                                                      int s, int m,
                                                      const Integrand& g) const {
  if (s < 0 || s >= model.count()) {
    throw std::invalid_argument("expect_component: component index out of range");
  }
  if (cfg_.mode == ExpectationMode::tensor_quadrature) {
    return quad_component(model, s, m, g);
  }
  return mc_component(model, s, m, g);
}

ExpectationResult ExpectationEngine::expect_mixture(const TrueMixture& model,
                                                    int m,
                                                    const Integrand& g) const {
  const int ks = model.count();
  ExpectationResult total;
  total.value = VectorXd::Zero(m);
  VectorXd err2 = VectorXd::Zero(m);
  for (int s = 0; s < ks; ++s) {
    ExpectationResult part = expect_component(model, s, m, g);
    total.value += part.value;
    err2 += part.mc_std_error.cwiseProduct(part.mc_std_error);
  }
  total.value /= static_cast<double>(ks);
  total.mc_std_error = err2.cwiseSqrt() / static_cast<double>(ks);
  return total;
}

double ExpectationEngine::log_expect_component(const TrueMixture& model, int s,
                                               const LogIntegrand& log_g) const {
  if (cfg_.mode != ExpectationMode::tensor_quadrature) {
    throw UnsupportedConfigError("log_expect_component requires quadrature");
  }
  const int d = model.dim();
  if (d > 3) {
    throw UnsupportedConfigError("tensor_quadrature supports d <= 3");
  }
  const int order = effective_order(d);
  const HermiteRule& rule = hermite_rule(order);
  const VectorXd mu = model.center(s);
  const double scale = model.sigma() * kSqrt2;

  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(std::pow(order, d)));
  VectorXd x(d);
  std::vector<int> idx(d, 0);
  while (true) {
    double lw = 0.0;
    for (int a = 0; a < d; ++a) {
      x[a] = mu[a] + scale * rule.nodes[idx[a]];
      lw += rule.log_prob[idx[a]];
    }
    terms.push_back(lw + log_g(x));
    int a = 0;
    for (; a < d; ++a) {
      if (++idx[a] < order) break;
      idx[a] = 0;
    }
    if (a == d) break;
  }
  double mx = terms[0];
  for (double t : terms) mx = std::max(mx, t);
  if (!std::isfinite(mx)) return mx;  // all -inf
  Kahan z;
  for (double t : terms) z.add(std::exp(t - mx));
  return mx + std::log(z.get());
}

}  // namespace gmmland
