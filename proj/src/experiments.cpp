#include "gmmland/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <thread>

namespace gmmland {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const json& field(const json& j, const std::string& key, const std::string& at) {
  if (!j.is_object()) fail(at, "expected object");
  auto it = j.find(key);
  if (it == j.end()) fail(at + "." + key, "missing field");
  return *it;
}

double num_field(const json& j, const std::string& key, const std::string& at) {
  const json& v = field(j, key, at);
  if (!v.is_number()) fail(at + "." + key, "expected number");
  return v.get<double>();
}

double num_or(const json& j, const std::string& key, double dflt,
              const std::string& at) {
  if (!j.is_object() || !j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_number()) fail(at + "." + key, "expected number");
  return v.get<double>();
}

std::int64_t int_or(const json& j, const std::string& key, std::int64_t dflt,
                    const std::string& at) {
  if (!j.is_object() || !j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_number_integer()) fail(at + "." + key, "expected integer");
  return v.get<std::int64_t>();
}

std::string str_or(const json& j, const std::string& key,
                   const std::string& dflt, const std::string& at) {
  if (!j.is_object() || !j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_string()) fail(at + "." + key, "expected string");
  return v.get<std::string>();
}

MatrixXd centers_from_array(const json& arr, int d, int k,
                            const std::string& at) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != d * k) {
    fail(at, "expected a column-major array of " + std::to_string(d * k) +
                 " numbers");
  }
  MatrixXd m(d, k);
  for (int idx = 0; idx < d * k; ++idx) {
    const json& v = arr.at(idx);
    if (!v.is_number()) fail(at, "expected numeric entries");
    m(idx % d, idx / d) = v.get<double>();
  }
  return m;
}

// Deterministic uniforms independent of the standard library's
// distribution implementations.
struct UniformStream {
  std::mt19937_64 gen;
  explicit UniformStream(std::uint64_t seed) : gen(seed) {}
  double unit() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
  double range(double lo, double hi) { return lo + (hi - lo) * unit(); }
};

TrueMixture generate_model(const json& g, const std::string& at) {
  const std::string type = field(g, "type", at).get<std::string>();
  const int d = static_cast<int>(int_or(g, "d", 1, at));
  const int k_star = static_cast<int>(int_or(g, "k_star", 3, at));
  const double sigma = num_or(g, "sigma", 1.0, at);
  const double delta = num_field(g, "delta", at);
  if (delta <= 0.0) fail(at + ".delta", "must be > 0");
  if (d < 1 || k_star < 1) fail(at, "d and k_star must be >= 1");

  if (type == "line") {
    MatrixXd c = MatrixXd::Zero(d, k_star);
    for (int s = 0; s < k_star; ++s) {
      c(0, s) = delta * (s - (k_star - 1) / 2.0);
    }
    return TrueMixture(c, sigma);
  }
  if (type == "simplex") {
    if (d < k_star) fail(at, "simplex generator needs d >= k_star");
    MatrixXd c = MatrixXd::Zero(d, k_star);
    for (int s = 0; s < k_star; ++s) c(s, s) = 1.0;
    const VectorXd centroid = c.rowwise().mean();
    c.colwise() -= centroid;
    c *= delta / std::sqrt(2.0);
    return TrueMixture(c, sigma);
  }
  if (type == "random") {
    const std::uint64_t seed = static_cast<std::uint64_t>(int_or(g, "seed", 1, at));
    UniformStream u(seed);
    const double half = delta * std::max(1.0, k_star / 2.0);
    for (int attempt = 0; attempt < 10000; ++attempt) {
      MatrixXd c(d, k_star);
      for (int s = 0; s < k_star; ++s) {
        for (int a = 0; a < d; ++a) c(a, s) = u.range(-half, half);
      }
      double dmin = std::numeric_limits<double>::infinity();
      for (int s = 0; s < k_star; ++s) {
        for (int t = s + 1; t < k_star; ++t) {
          dmin = std::min(dmin, (c.col(s) - c.col(t)).norm());
        }
      }
      if (k_star == 1 || dmin >= delta) return TrueMixture(c, sigma);
    }
    fail(at, "random generator could not reach the requested separation");
  }
  fail(at + ".type", "expected line, simplex or random");
}

json load_json_file(const std::string& path, const std::string& at) {
  std::ifstream in(path);
  if (!in) fail(at, "cannot open file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    fail(at, "invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

nlohmann::json model_to_json(const TrueMixture& model) {
  json j;
  j["d"] = model.dim();
  j["k_star"] = model.count();
  j["sigma"] = model.sigma();
  j["centers"] = std::vector<double>(
      model.centers().data(), model.centers().data() + model.centers().size());
  return j;
}

TrueMixture model_from_json(const json& j, const std::string& at) {
  const int d = static_cast<int>(num_field(j, "d", at));
  const int k_star = static_cast<int>(num_field(j, "k_star", at));
  const double sigma = num_field(j, "sigma", at);
  if (d < 1 || k_star < 1) fail(at, "d and k_star must be >= 1");
  if (sigma <= 0.0) fail(at + ".sigma", "must be > 0");
  return TrueMixture(
      centers_from_array(field(j, "centers", at), d, k_star, at + ".centers"),
      sigma);
}

nlohmann::json fitted_to_json(const MatrixXd& centers) {
  json j;
  j["k"] = static_cast<int>(centers.cols());
  j["centers"] =
      std::vector<double>(centers.data(), centers.data() + centers.size());
  return j;
}

MatrixXd fitted_from_json(const json& j, int expect_d, const std::string& at) {
  const int k = static_cast<int>(num_field(j, "k", at));
  if (k < 1) fail(at + ".k", "must be >= 1");
  return centers_from_array(field(j, "centers", at), expect_d, k,
                            at + ".centers");
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  if (!j.is_object()) fail("config", "expected a JSON object");

  // model
  {
    const json& m = field(j, "model", "config");
    if (m.contains("path")) {
      cfg.model = model_from_json(
          load_json_file(m.at("path").get<std::string>(), "config.model.path"),
          "config.model");
    } else if (m.contains("generator")) {
      cfg.model = generate_model(m.at("generator"), "config.model.generator");
    } else {
      cfg.model = model_from_json(m, "config.model");
    }
  }

  // fitted size
  if (j.contains("fit")) {
    cfg.fit_k = static_cast<int>(
        int_or(j.at("fit"), "k", cfg.model.count(), "config.fit"));
  } else {
    cfg.fit_k = cfg.model.count();
  }
  if (cfg.fit_k < 1) fail("config.fit.k", "must be >= 1");

  // engine
  if (j.contains("engine")) {
    const json& e = j.at("engine");
    const std::string mode =
        str_or(e, "mode", "tensor_quadrature", "config.engine");
    if (mode == "tensor_quadrature") {
      cfg.engine.mode = ExpectationMode::tensor_quadrature;
    } else if (mode == "monte_carlo") {
      cfg.engine.mode = ExpectationMode::monte_carlo;
    } else {
      fail("config.engine.mode", "expected tensor_quadrature or monte_carlo");
    }
    cfg.engine.quadrature_order =
        static_cast<int>(int_or(e, "order", 0, "config.engine"));
    cfg.engine.mc_samples = int_or(e, "samples", 2'000'000, "config.engine");
    cfg.engine.seed = static_cast<std::uint64_t>(
        int_or(e, "seed", 0, "config.engine"));
  }

  // descent
  if (j.contains("descent")) {
    const json& d = j.at("descent");
    const std::string method = str_or(d, "method", "em", "config.descent");
    if (method == "em") {
      cfg.descent.options.method = DescentMethod::em;
    } else if (method == "gradient_descent") {
      cfg.descent.options.method = DescentMethod::gradient_descent;
    } else {
      fail("config.descent.method", "expected em or gradient_descent");
    }
    cfg.descent.options.grad_tol = num_or(d, "grad_tol", 1e-9, "config.descent");
    cfg.descent.options.step_tol = num_or(d, "step_tol", 1e-12, "config.descent");
    cfg.descent.options.max_iters =
        static_cast<int>(int_or(d, "max_iters", 50000, "config.descent"));
    cfg.descent.restarts =
        static_cast<int>(int_or(d, "restarts", 1, "config.descent"));
    if (cfg.descent.restarts < 1) fail("config.descent.restarts", "must be >= 1");
    if (d.contains("init")) {
      const json& i = d.at("init");
      const std::string type =
          str_or(i, "type", "random_box", "config.descent.init");
      if (type == "random_box") {
        cfg.descent.init.type = InitSpec::Type::random_box;
      } else if (type == "perturb_truth") {
        cfg.descent.init.type = InitSpec::Type::perturb_truth;
        cfg.descent.init.scale =
            num_or(i, "scale", 0.01, "config.descent.init");
      } else if (type == "explicit") {
        cfg.descent.init.type = InitSpec::Type::explicit_centers;
        cfg.descent.init.centers =
            centers_from_array(field(i, "centers", "config.descent.init"),
                               cfg.model.dim(), cfg.fit_k,
                               "config.descent.init.centers");
      } else {
        fail("config.descent.init.type",
             "expected random_box, perturb_truth or explicit");
      }
    }
  }

  // classifier thresholds
  if (j.contains("classifier")) {
    const json& c = j.at("classifier");
    cfg.thresholds.tau_fit = num_or(c, "tau_fit", 0.6, "config.classifier");
    cfg.thresholds.tau_empty = num_or(c, "tau_empty", -1.0, "config.classifier");
    cfg.thresholds.tau_dup = num_or(c, "tau_dup", 1.0, "config.classifier");
  }

  // sweep
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    cfg.sweep.k = static_cast<int>(int_or(s, "k", 3, "config.sweep"));
    if (cfg.sweep.k != 2 && cfg.sweep.k != 3) {
      fail("config.sweep.k", "sweep supports k = 2 or 3");
    }
    cfg.sweep.sigma = num_or(s, "sigma", 1.0, "config.sweep");
    if (cfg.sweep.sigma <= 0.0) fail("config.sweep.sigma", "must be > 0");
    if (s.contains("deltas")) {
      const json& ds = s.at("deltas");
      if (!ds.is_array() || ds.empty()) {
        fail("config.sweep.deltas", "expected a non-empty array");
      }
      cfg.sweep.deltas.clear();
      for (const auto& v : ds) {
        if (!v.is_number() || v.get<double>() <= 0.0) {
          fail("config.sweep.deltas", "expected positive numbers");
        }
        cfg.sweep.deltas.push_back(v.get<double>());
      }
    }
  }

  // theory battery
  {
    for (int i = 0; i <= 100; ++i) cfg.theory.tail_grid.push_back(0.1 * i);
    if (j.contains("theory")) {
      const json& t = j.at("theory");
      if (t.contains("tail_grid")) {
        const json& g = t.at("tail_grid");
        if (!g.is_array() || g.empty()) {
          fail("config.theory.tail_grid", "expected a non-empty array");
        }
        cfg.theory.tail_grid.clear();
        for (const auto& v : g) {
          if (!v.is_number()) fail("config.theory.tail_grid", "expected numbers");
          cfg.theory.tail_grid.push_back(v.get<double>());
        }
      }
      cfg.theory.geometry_samples = static_cast<int>(
          int_or(t, "geometry_samples", 100000, "config.theory"));
      if (cfg.theory.geometry_samples < 1) {
        fail("config.theory.geometry_samples", "must be >= 1");
      }
      cfg.theory.geometry_seed = static_cast<std::uint64_t>(
          int_or(t, "geometry_seed", 7, "config.theory"));
      cfg.theory.exp_assoc_denominator =
          num_or(t, "exp_assoc_denominator", 33.0, "config.theory");
    }
  }

  // explicit candidate
  if (j.contains("beta")) {
    const json& b = j.at("beta");
    if (b.contains("path")) {
      cfg.beta = fitted_from_json(
          load_json_file(b.at("path").get<std::string>(), "config.beta.path"),
          cfg.model.dim(), "config.beta");
    } else {
      cfg.beta = fitted_from_json(b, cfg.model.dim(), "config.beta");
    }
    cfg.fit_k = static_cast<int>(cfg.beta->cols());
  }

  if (j.contains("output")) {
    cfg.out_dir = str_or(j.at("output"), "dir", ".", "config.output");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config(load_json_file(path, "config"));
}

namespace {

MatrixXd draw_init(const ExperimentConfig& cfg, std::uint64_t seed) {
  const int d = cfg.model.dim();
  const int k = cfg.fit_k;
  UniformStream u(seed ^ 0x5851f42d4c957f2dULL);
  switch (cfg.descent.init.type) {
    case InitSpec::Type::explicit_centers:
      return *cfg.descent.init.centers;
    case InitSpec::Type::perturb_truth: {
      const double scale = cfg.descent.init.scale *
                           std::max(cfg.model.delta_min(), cfg.model.sigma());
      MatrixXd b(d, k);
      for (int j = 0; j < k; ++j) {
        b.col(j) = cfg.model.center(j % cfg.model.count());
        for (int a = 0; a < d; ++a) b(a, j) += u.range(-1.0, 1.0) * scale;
      }
      return b;
    }
    case InitSpec::Type::random_box:
    default: {
      const double half = std::max(cfg.model.delta_max(), cfg.model.sigma());
      MatrixXd b(d, k);
      for (int a = 0; a < d; ++a) {
        const double lo = cfg.model.centers().row(a).minCoeff() - half;
        const double hi = cfg.model.centers().row(a).maxCoeff() + half;
        for (int j = 0; j < k; ++j) b(a, j) = u.range(lo, hi);
      }
      return b;
    }
  }
}

RunRecord run_one(const ExperimentConfig& cfg, int restart) {
  RunRecord rec;
  rec.restart = restart;
  rec.seed = cfg.engine.seed + static_cast<std::uint64_t>(restart);
  EngineConfig ecfg = cfg.engine;
  ecfg.seed = rec.seed;
  const ExpectationEngine engine(ecfg);
  rec.init = draw_init(cfg, rec.seed);
  try {
    const DescentTrace trace = descend(FittedCenters(rec.init), cfg.model,
                                       engine, cfg.descent.options);
    rec.termination = trace.termination;
    rec.beta = trace.final_point();
    const FittedCenters beta(rec.beta);
    const LandscapeValue lv = loss(beta, cfg.model, engine);
    rec.loss = lv.loss;
    rec.kl_gap = lv.kl_gap;
    rec.stationarity = stationarity_report(beta, cfg.model, engine);
    rec.association = association_stats(beta, cfg.model, engine);
    rec.structure = classify(*rec.association, beta, cfg.model, cfg.thresholds);
    rec.mean_consistency = check_mean_consistency(beta, cfg.model, engine);
    rec.span_residual = check_span(beta, cfg.model);
  } catch (const std::exception& e) {
    rec.error = e.what();
    if (rec.beta.size() == 0) rec.beta = rec.init;
  }
  return rec;
}

}  // namespace

RunRecord evaluate_candidate(const ExperimentConfig& cfg, const MatrixXd& beta) {
  const ExpectationEngine engine(cfg.engine);
  RunRecord rec;
  rec.seed = cfg.engine.seed;
  rec.init = beta;
  rec.beta = beta;
  rec.termination = Termination::gradient_tol;
  const FittedCenters fc(beta);
  const LandscapeValue lv = loss(fc, cfg.model, engine);
  rec.loss = lv.loss;
  rec.kl_gap = lv.kl_gap;
  rec.stationarity = stationarity_report(fc, cfg.model, engine);
  rec.association = association_stats(fc, cfg.model, engine);
  rec.structure = classify(*rec.association, fc, cfg.model, cfg.thresholds);
  rec.mean_consistency = check_mean_consistency(fc, cfg.model, engine);
  rec.span_residual = check_span(fc, cfg.model);
  return rec;
}

RunReport run_descend(const ExperimentConfig& cfg, int workers) {
  const int restarts = cfg.descent.restarts;
  RunReport rep;
  rep.records.resize(restarts);
  const int n_threads = std::max(1, std::min(workers, restarts));
  std::atomic<int> next{0};
  auto work = [&]() {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= restarts) break;
      rep.records[r] = run_one(cfg, r);
    }
  };
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return rep;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg) {
  std::vector<SweepRow> rows;
  const int k = cfg.sweep.k;
  for (double delta : cfg.sweep.deltas) {
    MatrixXd tc(1, 3);
    tc << -delta, 0.0, delta;
    const TrueMixture model(tc, cfg.sweep.sigma);
    MatrixXd ideal(1, k);
    if (k == 3) {
      ideal << -delta / 2.0, delta, delta;
    } else {
      ideal << -delta / 2.0, delta;
    }
    const ExpectationEngine engine(cfg.engine);
    SweepRow row;
    row.delta = delta;
    try {
      const DescentTrace trace = descend(FittedCenters(ideal), model, engine,
                                         cfg.descent.options);
      const MatrixXd& terminal = trace.final_point();
      row.beta = terminal;
      row.err = (terminal - ideal).cwiseAbs().maxCoeff();
      row.termination = to_string(trace.termination);
      const FittedCenters fc(terminal);
      const AssociationStats stats = association_stats(fc, model, engine);
      row.structure = classify(stats, fc, model, cfg.thresholds).label();
      if (trace.termination == Termination::max_iters ||
          trace.termination == Termination::runaway) {
        row.flag = "no_converge";
      } else if (row.err == 0.0) {
        row.flag = "underflow";
      }
    } catch (const std::exception& e) {
      row.termination = "error";
      row.flag = "no_converge";
      row.structure = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

TheoryBatteryResult run_theory(const ExperimentConfig& cfg) {
  const ExpectationEngine engine(cfg.engine);
  TheoryBatteryResult out;
  out.results.push_back(verify_gaussian_tails(cfg.theory.tail_grid));

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
    ExponentialAssociationConfig c;
    c.true_center = VectorXd::Zero(1);
    const int extra = i % 3;
    c.fitted.resize(1, 2 + extra);
    c.fitted(0, 0) = 0.1 * i;
    c.fitted(0, 1) = c.fitted(0, 0) + (5.0 / 6.0) * D + 0.5;
    for (int e = 0; e < extra; ++e) c.fitted(0, 2 + e) = 60.0 + 7.0 * e;
    c.separation = D;
    configs.push_back(c);
  }
  out.results.push_back(verify_exponential_association(
      configs, engine, cfg.theory.exp_assoc_denominator));

  out.results.push_back(verify_geometry_inclusions(cfg.theory.geometry_samples,
                                                   cfg.theory.geometry_seed));
  out.results.push_back(estimate_gaussian_interval_constant());
  out.results.push_back(
      estimate_cell_mass_constant(2000, cfg.theory.geometry_seed));
  return out;
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::gradient_tol: return "gradient_tol";
    case Termination::step_tol: return "step_tol";
    case Termination::max_iters: return "max_iters";
    case Termination::runaway: return "runaway";
  }
  return "unknown";
}

namespace {

json matrix_json(const MatrixXd& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

json structure_json(const StructureReport& s) {
  json j;
  j["label"] = s.label();
  j["s0"] = s.s0;
  j["unclassified"] = s.unclassified;
  json groups = json::array();
  for (const auto& g : s.groups) {
    json gj;
    gj["fitted"] = g.fitted;
    gj["true"] = g.true_members;
    gj["kind"] = g.kind == GroupKind::many_fit_one ? "many_fit_one"
                                                   : "one_fit_many";
    gj["error"] = g.error;
    groups.push_back(gj);
  }
  j["groups"] = groups;
  j["thresholds"] = {{"tau_fit", s.thresholds_used.tau_fit},
                     {"tau_empty", s.thresholds_used.tau_empty},
                     {"tau_dup", s.thresholds_used.tau_dup}};
  return j;
}

json stationarity_json(const StationarityReport& s) {
  return json{{"grad_inf_norm", s.grad_inf_norm},
              {"em_residual", s.em_residual},
              {"stein_residual", s.stein_residual},
              {"raw_stein_residual", s.raw_stein_residual},
              {"hessian_min_eigenvalue", s.hessian_min_eigenvalue},
              {"hessian_spectral_norm", s.hessian_spectral_norm},
              {"local_minimum", s.local_minimum}};
}

}  // namespace

json record_json(const RunRecord& r) {
  json j;
  j["restart"] = r.restart;
  j["seed"] = r.seed;
  j["init"] = matrix_json(r.init);
  j["beta"] = matrix_json(r.beta);
  j["termination"] = to_string(r.termination);
  j["error"] = r.error;
  j["loss"] = r.loss ? json(*r.loss) : json(nullptr);
  j["kl_gap"] = r.kl_gap ? json(*r.kl_gap) : json(nullptr);
  j["stationarity"] =
      r.stationarity ? stationarity_json(*r.stationarity) : json(nullptr);
  if (r.association) {
    json a;
    a["mean_assoc"] = matrix_json(r.association->mean_assoc);
    json pairs = json::array();
    for (const auto& p : r.association->pair_assoc) {
      pairs.push_back(matrix_json(p));
    }
    a["pair_assoc"] = pairs;
    a["voronoi_mass"] = matrix_json(r.association->vmass.probs);
    j["association"] = a;
  } else {
    j["association"] = nullptr;
  }
  j["structure"] = r.structure ? structure_json(*r.structure) : json(nullptr);
  j["mean_consistency"] =
      r.mean_consistency ? json(*r.mean_consistency) : json(nullptr);
  j["span_residual"] =
      r.span_residual ? json(*r.span_residual) : json(nullptr);
  return j;
}

json report_json(const ExperimentConfig& cfg, const std::string& command,
                 const RunReport& rep) {
  json j;
  j["schema"] = 1;
  j["command"] = command;
  json model = model_to_json(cfg.model);
  model["delta_min"] = cfg.model.delta_min();
  model["delta_max"] = cfg.model.delta_max();
  j["model"] = model;
  j["fit"] = {{"k", cfg.fit_k}};
  j["engine"] = {
      {"mode", cfg.engine.mode == ExpectationMode::tensor_quadrature
                   ? "tensor_quadrature"
                   : "monte_carlo"},
      {"order", cfg.engine.quadrature_order},
      {"samples", cfg.engine.mc_samples},
      {"seed", cfg.engine.seed}};

  json runs = json::array();
  for (const auto& r : rep.records) runs.push_back(record_json(r));
  j["runs"] = runs;

  // Aggregate: label histogram over all restarts, spurious fraction and
  // per-structure error quantiles over converged ones.
  std::map<std::string, int> histogram;
  double best_loss = std::numeric_limits<double>::infinity();
  int converged = 0;
  for (const auto& r : rep.records) {
    const std::string label =
        r.error.empty() && r.structure ? r.structure->label() : "error";
    histogram[label] += 1;
    if (r.converged() && r.loss) {
      converged += 1;
      best_loss = std::min(best_loss, *r.loss);
    }
  }
  int spurious = 0;
  std::map<std::string, std::vector<double>> errors_by_label;
  for (const auto& r : rep.records) {
    if (!r.converged() || !r.loss || !r.structure) continue;
    if (*r.loss > best_loss + 1e-6 * std::max(1.0, std::fabs(best_loss))) {
      spurious += 1;
    }
    auto& bucket = errors_by_label[r.structure->label()];
    for (const auto& g : r.structure->groups) bucket.push_back(g.error);
  }
  json agg;
  agg["histogram"] = histogram;
  agg["restarts"] = static_cast<int>(rep.records.size());
  agg["converged"] = converged;
  agg["fraction_spurious"] =
      converged > 0 ? static_cast<double>(spurious) / converged : 0.0;
  json quantiles;
  for (auto& [label, vals] : errors_by_label) {
    std::sort(vals.begin(), vals.end());
    quantiles[label] = {{"min", vals.front()},
                        {"median", vals[vals.size() / 2]},
                        {"max", vals.back()}};
  }
  agg["error_quantiles"] = quantiles;
  j["aggregate"] = agg;
  return j;
}

json sweep_json(const std::vector<SweepRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"delta", r.delta},
                   {"err", r.err},
                   {"structure", r.structure},
                   {"termination", r.termination},
                   {"flag", r.flag}});
  }
  return arr;
}

json theory_json(const TheoryBatteryResult& battery) {
  json arr = json::array();
  for (const auto& r : battery.results) {
    arr.push_back({{"name", r.name},
                   {"grid_size", r.grid_size},
                   {"violations", r.violations},
                   {"worst_margin", r.worst_margin}});
  }
  return arr;
}

std::string runs_csv(const RunReport& rep) {
  std::string out =
      "restart,seed,termination,loss,kl_gap,grad_inf_norm,em_residual,"
      "stein_residual,raw_stein_residual,hessian_min_eigenvalue,local_minimum,"
      "mean_consistency,span_residual,structure,error,beta\n";
  for (const auto& r : rep.records) {
    out += std::to_string(r.restart) + "," + std::to_string(r.seed) + "," +
           to_string(r.termination) + ",";
    out += (r.loss ? fmt_double(*r.loss) : "") + std::string(",");
    out += (r.kl_gap ? fmt_double(*r.kl_gap) : "") + std::string(",");
    if (r.stationarity) {
      out += fmt_double(r.stationarity->grad_inf_norm) + std::string(",") +
             fmt_double(r.stationarity->em_residual) + "," +
             fmt_double(r.stationarity->stein_residual) + "," +
             fmt_double(r.stationarity->raw_stein_residual) + "," +
             fmt_double(r.stationarity->hessian_min_eigenvalue) + "," +
             (r.stationarity->local_minimum ? "1" : "0") + ",";
    } else {
      out += ",,,,,,";
    }
    out += (r.mean_consistency ? fmt_double(*r.mean_consistency) : "") +
           std::string(",");
    out += (r.span_residual ? fmt_double(*r.span_residual) : "") +
           std::string(",");
    out += csv_field(r.structure ? r.structure->label() : "") + ",";
    out += csv_field(r.error) + ",";
    std::string beta;
    for (int idx = 0; idx < r.beta.size(); ++idx) {
      if (idx) beta += ";";
      beta += fmt_double(r.beta.data()[idx]);
    }
    out += beta + "\n";
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "delta,err,log_err,structure,termination,flag\n";
  for (const auto& r : rows) {
    out += fmt_double(r.delta) + std::string(",") + fmt_double(r.err) + ",";
    out += (r.err > 0.0 ? fmt_double(std::log(r.err)) : "") + std::string(",");
    out += csv_field(r.structure) + "," + r.termination + "," + r.flag + "\n";
  }
  return out;
}

std::string graph_dot(const RunReport& rep) {
  // One representative run per distinct structure label, label-sorted.
  std::map<std::string, const RunRecord*> reps;
  for (const auto& r : rep.records) {
    if (!r.structure) continue;
    reps.emplace(r.structure->label(), &r);
  }
  std::string out = "graph bipartite_structures {\n  rankdir=LR;\n";
  int n = 0;
  for (const auto& [label, rec] : reps) {
    out += "  subgraph cluster_" + std::to_string(n) + " {\n";
    out += "    label=\"" + label + " (restart " +
           std::to_string(rec->restart) + ")\";\n";
    const std::string p = "s" + std::to_string(n) + "_";
    for (const auto& g : rec->structure->groups) {
      for (int i : g.fitted) {
        for (int s : g.true_members) {
          out += "    " + p + "b" + std::to_string(i) + " -- " + p + "t" +
                 std::to_string(s) + ";\n";
        }
      }
    }
    for (int i : rec->structure->s0) {
      out += "    " + p + "b" + std::to_string(i) + " [shape=point];\n";
    }
    out += "  }\n";
    ++n;
  }
  out += "}\n";
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

}  // namespace gmmland
