#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include "gmmland/types.hpp"

namespace gmmland {

enum class ExpectationMode { tensor_quadrature, monte_carlo };

struct EngineConfig {
  ExpectationMode mode = ExpectationMode::tensor_quadrature;
  int quadrature_order = 0;  // per axis; 0 picks the default for the dimension
  std::int64_t mc_samples = 2'000'000;
  std::uint64_t seed = 0;
};

struct ExpectationResult {
  VectorXd value;
  VectorXd mc_std_error;  // zero for quadrature
};

// Requested with d > 3 in tensor_quadrature mode, or order out of range.
struct UnsupportedConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Vector integrand: evaluate at x, write m values into out.
using Integrand = std::function<void(const VectorXd& x, double* out)>;
// Scalar integrand returning log g(x); g > 0.
using LogIntegrand = std::function<double(const VectorXd& x)>;

// Deterministic evaluator of E_s[g(X)], X ~ N(theta_s, sigma^2 I), and of the
// mixture average E_* = (1/k_star) sum_s E_s. Pure given its configuration:
// identical (mode, order/samples, seed, g, model) give bit-identical results
// regardless of caller threading. Evaluation order inside one call is fixed.
class ExpectationEngine {
 public:
  explicit ExpectationEngine(EngineConfig cfg);

  const EngineConfig& config() const { return cfg_; }
  int effective_order(int dim) const;

  ExpectationResult expect_component(const TrueMixture& model, int s, int m,
                                     const Integrand& g) const;
  ExpectationResult expect_mixture(const TrueMixture& model, int m,
                                   const Integrand& g) const;

  // log E_s[g(X)] evaluated without leaving the log domain; targets around
  // exp(-1000) stay meaningful. Quadrature only.
  double log_expect_component(const TrueMixture& model, int s,
                              const LogIntegrand& log_g) const;

 private:
  ExpectationResult quad_component(const TrueMixture& model, int s, int m,
                                   const Integrand& g) const;
  ExpectationResult mc_component(const TrueMixture& model, int s, int m,
                                 const Integrand& g) const;

  EngineConfig cfg_;
};

// Stream of N(0,1) draws tied to (seed, stream). Independent of evaluation
// order across streams; stable across platforms (mt19937_64 output is
// specified by the standard, the Box-Muller map is explicit arithmetic).
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream);
  double next();

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gmmland
