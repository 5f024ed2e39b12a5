#include "gmmland/landscape.hpp"

#include <cmath>
#include <limits>

namespace gmmland {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

// log f_j into logf, associations into psi, returns log mixture density.
double point_core(const VectorXd& x, const MatrixXd& beta, double sigma,
                  VectorXd& logf, VectorXd& psi) {
  const int k = static_cast<int>(beta.cols());
  const double d = static_cast<double>(beta.rows());
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double norm_const = -d * (0.5 * kLogTwoPi + std::log(sigma));
  for (int j = 0; j < k; ++j) {
    logf[j] = norm_const - (x - beta.col(j)).squaredNorm() * inv2s2;
  }
  const double mx = logf.maxCoeff();
  double z = 0.0;
  for (int j = 0; j < k; ++j) {
    psi[j] = std::exp(logf[j] - mx);
    z += psi[j];
  }
  psi /= z;
  return mx + std::log(z) - std::log(static_cast<double>(k));
}

void require_dims(const FittedCenters& beta, const TrueMixture& model) {
  if (beta.dim() != model.dim()) {
    throw std::invalid_argument("fitted/true dimension mismatch");
  }
}

double runaway_threshold(const TrueMixture& model) {
  return 1e6 * std::max(model.delta_max(), model.sigma());
}

bool is_runaway(const MatrixXd& beta, const TrueMixture& model) {
  const double thr = runaway_threshold(model);
  for (int j = 0; j < beta.cols(); ++j) {
    if (beta.col(j).norm() > thr) return true;
  }
  return false;
}

}  // namespace

namespace detail {

MixtureStats mixture_stats(const MatrixXd& beta, const TrueMixture& model,
                           const ExpectationEngine& engine) {
  const int k = static_cast<int>(beta.cols());
  const int d = static_cast<int>(beta.rows());
  const double sigma = model.sigma();
  VectorXd logf(k), psi(k);
  const int m = k + k * d + 1;
  Integrand g = [&](const VectorXd& x, double* out) {
    const double logmix = point_core(x, beta, sigma, logf, psi);
    for (int j = 0; j < k; ++j) out[j] = psi[j];
    for (int j = 0; j < k; ++j) {
      for (int a = 0; a < d; ++a) out[k + j * d + a] = psi[j] * x[a];
    }
    out[k + k * d] = -logmix;
  };
  ExpectationResult r = engine.expect_mixture(model, m, g);
  MixtureStats st;
  st.assoc = r.value.head(k);
  st.assoc_x.resize(d, k);
  for (int j = 0; j < k; ++j) {
    st.assoc_x.col(j) = r.value.segment(k + j * d, d);
  }
  st.loss = r.value[k + k * d];
  return st;
}

ComponentStats component_stats(const MatrixXd& beta, const TrueMixture& model,
                               const ExpectationEngine& engine, int s) {
  const int k = static_cast<int>(beta.cols());
  const int d = static_cast<int>(beta.rows());
  const double sigma = model.sigma();
  VectorXd logf(k), psi(k);
  const int npair = k * (k + 1) / 2;
  const int m = k + npair + k * d;
  Integrand g = [&](const VectorXd& x, double* out) {
    point_core(x, beta, sigma, logf, psi);
    for (int j = 0; j < k; ++j) out[j] = psi[j];
    int t = k;
    for (int i = 0; i < k; ++i) {
      for (int j = i; j < k; ++j) out[t++] = psi[i] * psi[j];
    }
    for (int j = 0; j < k; ++j) {
      for (int a = 0; a < d; ++a) out[t++] = psi[j] * x[a];
    }
  };
  ExpectationResult r = engine.expect_component(model, s, m, g);
  ComponentStats st;
  st.assoc = r.value.head(k);
  st.pair.resize(k, k);
  int t = k;
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) {
      st.pair(i, j) = r.value[t];
      st.pair(j, i) = r.value[t];
      ++t;
    }
  }
  st.assoc_x.resize(d, k);
  for (int j = 0; j < k; ++j) {
    st.assoc_x.col(j) = r.value.segment(t, d);
    t += d;
  }
  return st;
}

}  // namespace detail

LandscapeValue loss(const FittedCenters& beta, const TrueMixture& model,
                    const ExpectationEngine& engine) {
  require_dims(beta, model);
  const double sigma = model.sigma();
  const int k = beta.count();
  VectorXd logf(k), psi(k);
  Integrand neg_log_f = [&](const VectorXd& x, double* out) {
    out[0] = -point_core(x, beta.centers(), sigma, logf, psi);
  };
  LandscapeValue v;
  v.loss = engine.expect_mixture(model, 1, neg_log_f).value[0];
  if (k == model.count()) {
    const int ks = k;
    VectorXd logf2(ks), psi2(ks);
    Integrand ref = [&](const VectorXd& x, double* out) {
      out[0] = -point_core(x, model.centers(), sigma, logf2, psi2);
    };
    const double loss_truth = engine.expect_mixture(model, 1, ref).value[0];
    v.kl_gap = v.loss - loss_truth;
  }
  return v;
}

MatrixXd gradient(const FittedCenters& beta, const TrueMixture& model,
                  const ExpectationEngine& engine) {
  require_dims(beta, model);
  const detail::MixtureStats st =
      detail::mixture_stats(beta.centers(), model, engine);
  const double inv_s2 = 1.0 / (model.sigma() * model.sigma());
  MatrixXd g(beta.dim(), beta.count());
  for (int j = 0; j < beta.count(); ++j) {
    g.col(j) = inv_s2 * (beta.center(j) * st.assoc[j] - st.assoc_x.col(j));
  }
  return g;
}

MatrixXd hessian(const FittedCenters& beta, const TrueMixture& model,
                 const ExpectationEngine& engine) {
  require_dims(beta, model);
  const int k = beta.count();
  const int d = beta.dim();
  const double sigma = model.sigma();
  const double inv_s2 = 1.0 / (sigma * sigma);
  const double inv_s4 = inv_s2 * inv_s2;
  VectorXd logf(k), psi(k);
  const int npair = k * (k + 1) / 2;
  // Per pair (i <= j): Psi_i Psi_j (beta_i-x)(beta_j-x)^T. The diagonal block
  // is E[(Psi_j-1)Psi_j rr^T] + E[Psi_j] I, so also accumulate (Psi_j^2-Psi_j)
  // rr^T directly and Psi_j for the identity term.
  const int m = npair * d * d + k;
  Integrand g = [&](const VectorXd& x, double* out) {
    point_core(x, beta.centers(), sigma, logf, psi);
    int t = 0;
    for (int i = 0; i < k; ++i) {
      for (int j = i; j < k; ++j) {
        const double w = (i == j) ? psi[i] * (psi[i] - 1.0) : psi[i] * psi[j];
        for (int a = 0; a < d; ++a) {
          const double ri = beta.centers()(a, i) - x[a];
          for (int b = 0; b < d; ++b) {
            out[t++] = w * ri * (beta.centers()(b, j) - x[b]);
          }
        }
      }
    }
    for (int j = 0; j < k; ++j) out[t++] = psi[j];
  };
  ExpectationResult r = engine.expect_mixture(model, m, g);

  MatrixXd H = MatrixXd::Zero(d * k, d * k);
  int t = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) {
      MatrixXd blk(d, d);
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) blk(a, b) = r.value[t++];
      }
      if (i == j) {
        H.block(i * d, i * d, d, d) = inv_s4 * blk;
      } else {
        H.block(i * d, j * d, d, d) = inv_s4 * blk;
        H.block(j * d, i * d, d, d) = inv_s4 * blk.transpose();
      }
    }
  }
  for (int j = 0; j < k; ++j) {
    const double ej = r.value[npair * d * d + j];
    H.block(j * d, j * d, d, d) += inv_s2 * ej * MatrixXd::Identity(d, d);
  }
  return 0.5 * (H + H.transpose());
}

FittedCenters em_step(const FittedCenters& beta, const TrueMixture& model,
                      const ExpectationEngine& engine) {
  require_dims(beta, model);
  const detail::MixtureStats st =
      detail::mixture_stats(beta.centers(), model, engine);
  MatrixXd next(beta.dim(), beta.count());
  for (int j = 0; j < beta.count(); ++j) {
    if (st.assoc[j] < 1e-300) throw DegenerateComponentError(j);
    next.col(j) = st.assoc_x.col(j) / st.assoc[j];
  }
  return FittedCenters(next);
}

DescentTrace descend(const FittedCenters& beta0, const TrueMixture& model,
                     const ExpectationEngine& engine,
                     const DescentOptions& opts) {
  require_dims(beta0, model);
  if (opts.max_iters < 1) {
    throw std::invalid_argument("descend: max_iters must be >= 1");
  }
  const int k = beta0.count();
  const int d = beta0.dim();
  const double inv_s2 = 1.0 / (model.sigma() * model.sigma());

  MatrixXd beta = beta0.centers();
  DescentTrace trace;
  trace.iterate_stride = std::max(1, opts.max_iters / 1024);
  bool pending_step_tol = false;

  // Loss-only evaluator for the gradient-descent line search.
  VectorXd logf(k), psi(k);
  auto loss_at = [&](const MatrixXd& b) {
    Integrand g = [&](const VectorXd& x, double* out) {
      out[0] = -point_core(x, b, model.sigma(), logf, psi);
    };
    return engine.expect_mixture(model, 1, g).value[0];
  };

  double prev_loss = std::numeric_limits<double>::infinity();
  for (int iter = 0;; ++iter) {
    const detail::MixtureStats st = detail::mixture_stats(beta, model, engine);
    trace.losses.push_back(st.loss);
    const bool on_stride = (iter % trace.iterate_stride == 0);
    if (on_stride) trace.iterates.push_back(beta);

    if (opts.method == DescentMethod::em && st.loss > prev_loss + 1e-6) {
      throw EngineAccuracyError(
          "EM step increased the loss by more than 1e-6; the expectation "
          "engine is under-resolved, raise the quadrature order or sample "
          "count");
    }
    prev_loss = st.loss;

    bool terminal = false;
    if (pending_step_tol) {
      trace.termination = Termination::step_tol;
      terminal = true;
    } else {
      MatrixXd grad(d, k);
      for (int j = 0; j < k; ++j) {
        grad.col(j) = inv_s2 * (beta.col(j) * st.assoc[j] - st.assoc_x.col(j));
      }
      if (grad.cwiseAbs().maxCoeff() < opts.grad_tol) {
        trace.termination = Termination::gradient_tol;
        terminal = true;
      } else if (is_runaway(beta, model)) {
        trace.termination = Termination::runaway;
        terminal = true;
      } else if (iter >= opts.max_iters) {
        trace.termination = Termination::max_iters;
        terminal = true;
      } else {
        MatrixXd next(d, k);
        if (opts.method == DescentMethod::em) {
          for (int j = 0; j < k; ++j) {
            if (st.assoc[j] < 1e-300) throw DegenerateComponentError(j);
            next.col(j) = st.assoc_x.col(j) / st.assoc[j];
          }
        } else {
          // Backtracking halving from unit step, Armijo constant 1e-4.
          const double g2 = grad.squaredNorm();
          double t = 1.0;
          while (true) {
            next = beta - t * grad;
            if (loss_at(next) <= st.loss - 1e-4 * t * g2) break;
            t *= 0.5;
            if (t < 1e-20) {
              next = beta;
              break;
            }
          }
        }
        const double step = (next - beta).cwiseAbs().maxCoeff();
        beta = next;
        if (step < opts.step_tol) pending_step_tol = true;
      }
    }
    if (terminal) {
      if (!on_stride) trace.iterates.push_back(beta);
      break;
    }
  }
  return trace;
}

StationarityReport stationarity_report(const FittedCenters& beta,
                                       const TrueMixture& model,
                                       const ExpectationEngine& engine) {
  require_dims(beta, model);
  const int k = beta.count();
  const int ks = model.count();
  const double inv_s2 = 1.0 / (model.sigma() * model.sigma());

  StationarityReport rep;
  const detail::MixtureStats mix =
      detail::mixture_stats(beta.centers(), model, engine);
  double grad_inf = 0.0;
  double em_res = 0.0;
  for (int j = 0; j < k; ++j) {
    const VectorXd gj =
        inv_s2 * (beta.center(j) * mix.assoc[j] - mix.assoc_x.col(j));
    grad_inf = std::max(grad_inf, gj.cwiseAbs().maxCoeff());
    if (mix.assoc[j] < 1e-300) throw DegenerateComponentError(j);
    const VectorXd emj = mix.assoc_x.col(j) / mix.assoc[j] - beta.center(j);
    em_res = std::max(em_res, emj.cwiseAbs().maxCoeff());
  }
  rep.grad_inf_norm = grad_inf;
  rep.em_residual = em_res;

  std::vector<detail::ComponentStats> per(ks);
  for (int s = 0; s < ks; ++s) {
    per[s] = detail::component_stats(beta.centers(), model, engine, s);
  }
  double stein = 0.0;
  for (int i = 0; i < k; ++i) {
    VectorXd lhs = VectorXd::Zero(beta.dim());
    VectorXd rhs = VectorXd::Zero(beta.dim());
    for (int s = 0; s < ks; ++s) {
      for (int j = 0; j < k; ++j) lhs += beta.center(j) * per[s].pair(i, j);
      rhs += model.center(s) * per[s].assoc[i];
    }
    stein = std::max(stein, (lhs - rhs).norm());
  }
  rep.stein_residual = stein;

  double raw = 0.0;
  for (int s = 0; s < ks; ++s) {
    for (int i = 0; i < k; ++i) {
      VectorXd r = per[s].assoc_x.col(i) - model.center(s) * per[s].assoc[i] -
                   beta.center(i) * per[s].assoc[i];
      for (int j = 0; j < k; ++j) r += beta.center(j) * per[s].pair(i, j);
      raw = std::max(raw, r.norm());
    }
  }
  rep.raw_stein_residual = raw;

  const MatrixXd H = hessian(beta, model, engine);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(H, Eigen::EigenvaluesOnly);
  const VectorXd ev = es.eigenvalues();
  rep.hessian_min_eigenvalue = ev.minCoeff();
  rep.hessian_spectral_norm = ev.cwiseAbs().maxCoeff();
  rep.local_minimum = rep.hessian_min_eigenvalue >=
                      -1e-7 * (1.0 + rep.hessian_spectral_norm);
  return rep;
}

double check_mean_consistency(const FittedCenters& beta,
                              const TrueMixture& model,
                              const ExpectationEngine& engine) {
  require_dims(beta, model);
  const detail::MixtureStats st =
      detail::mixture_stats(beta.centers(), model, engine);
  VectorXd weighted = VectorXd::Zero(beta.dim());
  for (int j = 0; j < beta.count(); ++j) {
    weighted += beta.center(j) * st.assoc[j];
  }
  const VectorXd target = model.centers().rowwise().mean();
  return (weighted - target).norm();
}

double check_span(const FittedCenters& beta, const TrueMixture& model) {
  require_dims(beta, model);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(model.centers());
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  if (rank == 0) {
    // All true centers at the origin: the span is {0}.
    double worst = 0.0;
    for (int j = 0; j < beta.count(); ++j) {
      worst = std::max(worst, beta.center(j).norm());
    }
    return worst;
  }
  MatrixXd Q = qr.householderQ() * MatrixXd::Identity(model.dim(), rank);
  double worst = 0.0;
  for (int j = 0; j < beta.count(); ++j) {
    const VectorXd b = beta.center(j);
    worst = std::max(worst, (b - Q * (Q.transpose() * b)).norm());
  }
  return worst;
}

}  // namespace gmmland
