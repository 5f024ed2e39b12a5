#include <doctest.h>

#include <cmath>

#include "gmmland/expectation.hpp"
#include "gmmland/gauss_hermite.hpp"

using namespace gmmland;

namespace {

EngineConfig quad_cfg(int order = 0) {
  EngineConfig c;
  c.mode = ExpectationMode::tensor_quadrature;
  c.quadrature_order = order;
  return c;
}

EngineConfig mc_cfg(std::int64_t samples, std::uint64_t seed) {
  EngineConfig c;
  c.mode = ExpectationMode::monte_carlo;
  c.mc_samples = samples;
  c.seed = seed;
  return c;
}

// Closed-form E[(mu + sigma Z)^p] from central normal moments.
double gaussian_power_moment(double mu, double sigma, int p) {
  auto binom = [](int n, int r) {
    double v = 1.0;
    for (int i = 0; i < r; ++i) v = v * (n - i) / (i + 1);
    return v;
  };
  double total = 0.0;
  for (int i = 0; i <= p; i += 2) {
    double dfact = 1.0;
    for (int t = i - 1; t >= 1; t -= 2) dfact *= t;
    total += binom(p, i) * std::pow(mu, p - i) * std::pow(sigma, i) * dfact;
  }
  return total;
}

}  // namespace

TEST_CASE("hermite rule: probability weights are normalized") {
  for (int order : {1, 2, 5, 24, 60, 80}) {
    const HermiteRule& r = hermite_rule(order);
    double sum = 0.0;
    for (double p : r.prob) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("hermite rule stays healthy at very high orders") {
  // Residual-grade diagnostics at wide separations need orders in the
  // thousands; weights must keep full relative precision in the log domain.
  const HermiteRule& r = hermite_rule(2000);
  REQUIRE(r.nodes.size() == 2000);
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    CHECK(r.nodes[i] == -r.nodes[r.nodes.size() - 1 - i]);
    CHECK(std::isfinite(r.log_prob[i]));
  }
  // second moment of N(0,1) through the rule
  double m2 = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    m2 += r.prob[i] * 2.0 * r.nodes[i] * r.nodes[i];
  }
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-13));
  // extreme log-weights are far below double range yet finite
  CHECK(r.log_prob.front() < -1000.0);
  CHECK_THROWS_AS(hermite_rule(2049), std::invalid_argument);
}

TEST_CASE("constant integrand integrates to one") {
  MatrixXd c(2, 1);
  c << 0.7, -0.3;
  const TrueMixture model(c, 2.0);
  const ExpectationEngine engine(quad_cfg());
  const auto r = engine.expect_component(model, 0, 1,
                                         [](const VectorXd&, double* out) {
                                           out[0] = 1.0;
                                         });
  CHECK(std::fabs(r.value[0] - 1.0) < 1e-14);
  CHECK(r.mc_std_error[0] == 0.0);
}

TEST_CASE("identity integrand recovers the component mean") {
  MatrixXd c(2, 1);
  c << 2.0, -1.0;
  const TrueMixture model(c, 3.0);
  const ExpectationEngine engine(quad_cfg());
  const auto r = engine.expect_component(model, 0, 2,
                                         [](const VectorXd& x, double* out) {
                                           out[0] = x[0];
                                           out[1] = x[1];
                                         });
  CHECK(r.value[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.value[1] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("squared radius has mean d sigma^2") {
  MatrixXd c(2, 1);
  c << 0.4, 1.1;
  const TrueMixture model(c, 1.0);
  const ExpectationEngine engine(quad_cfg());
  const VectorXd mu = model.center(0);
  const auto r = engine.expect_component(
      model, 0, 1, [&](const VectorXd& x, double* out) {
        out[0] = (x - mu).squaredNorm();
      });
  CHECK(r.value[0] == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("mixture expectation: symmetry, single component, second moment") {
  {
    MatrixXd c(1, 2);
    c << -1.0, 1.0;
    const TrueMixture model(c, 1.0);
    const ExpectationEngine engine(quad_cfg());
    const auto r = engine.expect_mixture(model, 1,
                                         [](const VectorXd& x, double* out) {
                                           out[0] = x[0];
                                         });
    CHECK(std::fabs(r.value[0]) < 1e-12);
  }
  {
    MatrixXd c(1, 1);
    c << 0.8;
    const TrueMixture model(c, 1.4);
    const ExpectationEngine engine(quad_cfg());
    Integrand g = [](const VectorXd& x, double* out) { out[0] = x[0] * x[0]; };
    const auto mix = engine.expect_mixture(model, 1, g);
    const auto comp = engine.expect_component(model, 0, 1, g);
    CHECK(mix.value[0] == comp.value[0]);
  }
  {
    MatrixXd c(1, 3);
    c << -2.0, 0.0, 2.0;
    const TrueMixture model(c, 1.0);
    const ExpectationEngine engine(quad_cfg());
    const auto r = engine.expect_mixture(model, 1,
                                         [](const VectorXd& x, double* out) {
                                           out[0] = x[0] * x[0];
                                         });
    CHECK(r.value[0] == doctest::Approx(1.0 + 8.0 / 3.0).epsilon(1e-10));
  }
}

TEST_CASE("expectation is linear") {
  MatrixXd c(1, 2);
  c << 0.3, 1.9;
  const TrueMixture model(c, 0.9);
  const ExpectationEngine engine(quad_cfg());
  Integrand g = [](const VectorXd& x, double* out) { out[0] = std::sin(x[0]); };
  Integrand h = [](const VectorXd& x, double* out) {
    out[0] = x[0] * x[0] * x[0];
  };
  Integrand combo = [](const VectorXd& x, double* out) {
    out[0] = 2.5 * std::sin(x[0]) - 0.75 * x[0] * x[0] * x[0];
  };
  const double eg = engine.expect_mixture(model, 1, g).value[0];
  const double eh = engine.expect_mixture(model, 1, h).value[0];
  const double ec = engine.expect_mixture(model, 1, combo).value[0];
  CHECK(ec == doctest::Approx(2.5 * eg - 0.75 * eh).epsilon(1e-12));
}

TEST_CASE("order-n rule is exact for polynomials of degree 2n-1") {
  MatrixXd c(1, 1);
  c << 0.6;
  const TrueMixture model(c, 1.7);
  const ExpectationEngine engine(quad_cfg(5));
  Integrand g = [](const VectorXd& x, double* out) {
    const double v = x[0];
    out[0] = std::pow(v, 9) - 3.0 * std::pow(v, 6) + 2.0 * std::pow(v, 3) - v + 5.0;
  };
  const double expected = gaussian_power_moment(0.6, 1.7, 9) -
                          3.0 * gaussian_power_moment(0.6, 1.7, 6) +
                          2.0 * gaussian_power_moment(0.6, 1.7, 3) -
                          gaussian_power_moment(0.6, 1.7, 1) + 5.0;
  CHECK(engine.expect_mixture(model, 1, g).value[0] ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("monte carlo agrees with quadrature within four standard errors") {
  MatrixXd c(1, 1);
  c << 0.7;
  const TrueMixture model(c, 1.3);
  Integrand g = [](const VectorXd& x, double* out) {
    out[0] = x[0] * x[0] + std::cos(x[0]);
  };
  const ExpectationEngine quad(quad_cfg());
  const double truth = quad.expect_component(model, 0, 1, g).value[0];
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ExpectationEngine mc(mc_cfg(40000, seed));
    const auto r = mc.expect_component(model, 0, 1, g);
    if (std::fabs(r.value[0] - truth) <= 4.0 * r.mc_std_error[0]) hits += 1;
  }
  CHECK(hits >= 99);
}

TEST_CASE("monte carlo is bit-identical for a fixed seed") {
  MatrixXd c(2, 2);
  c << 0.0, 1.0, 0.0, -1.0;
  const TrueMixture model(c, 1.0);
  Integrand g = [](const VectorXd& x, double* out) {
    out[0] = std::exp(-x.squaredNorm());
  };
  const ExpectationEngine a(mc_cfg(5000, 42));
  const ExpectationEngine b(mc_cfg(5000, 42));
  const auto ra = a.expect_mixture(model, 1, g);
  const auto rb = b.expect_mixture(model, 1, g);
  CHECK(ra.value[0] == rb.value[0]);
  CHECK(ra.mc_std_error[0] == rb.mc_std_error[0]);
}

TEST_CASE("mixture MC error combines component errors in quadrature") {
  MatrixXd c(1, 2);
  c << -1.0, 1.0;
  const TrueMixture model(c, 1.0);
  Integrand g = [](const VectorXd& x, double* out) { out[0] = x[0] * x[0]; };
  const ExpectationEngine mc(mc_cfg(10000, 3));
  const auto mix = mc.expect_mixture(model, 1, g);
  const auto c0 = mc.expect_component(model, 0, 1, g);
  const auto c1 = mc.expect_component(model, 1, 1, g);
  const double expected = std::sqrt(c0.mc_std_error[0] * c0.mc_std_error[0] +
                                    c1.mc_std_error[0] * c1.mc_std_error[0]) /
                          2.0;
  CHECK(mix.mc_std_error[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("quadrature refuses unsupported configurations") {
  const ExpectationEngine engine(quad_cfg());
  {
    const TrueMixture model(MatrixXd::Zero(4, 1), 1.0);
    CHECK_THROWS_AS(engine.expect_component(model, 0, 1,
                                            [](const VectorXd&, double* out) {
                                              out[0] = 1.0;
                                            }),
                    UnsupportedConfigError);
  }
  {
    const ExpectationEngine big(quad_cfg(101));
    const TrueMixture model(MatrixXd::Zero(3, 1), 1.0);
    CHECK_THROWS_AS(big.expect_component(model, 0, 1,
                                         [](const VectorXd&, double* out) {
                                           out[0] = 1.0;
                                         }),
                    UnsupportedConfigError);
  }
  CHECK_THROWS_AS(ExpectationEngine(quad_cfg(-1)), UnsupportedConfigError);
}

TEST_CASE("component index is validated") {
  const TrueMixture model(MatrixXd::Zero(1, 2), 1.0);
  const ExpectationEngine engine(quad_cfg());
  CHECK_THROWS_AS(engine.expect_component(model, 2, 1,
                                          [](const VectorXd&, double* out) {
                                            out[0] = 1.0;
                                          }),
                  std::invalid_argument);
}

TEST_CASE("log-domain expectation matches the moment generating function") {
  MatrixXd c(1, 1);
  c << 0.5;
  const TrueMixture model(c, 1.0);
  const ExpectationEngine engine(quad_cfg());
  const double a = 3.0;
  const double lg = engine.log_expect_component(
      model, 0, [a](const VectorXd& x) { return a * x[0]; });
  CHECK(lg == doctest::Approx(a * 0.5 + 0.5 * a * a).epsilon(1e-10));

  const double lone = engine.log_expect_component(
      model, 0, [](const VectorXd&) { return 0.0; });
  CHECK(std::fabs(lone) < 1e-13);
}
