#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "gmmland/classifier.hpp"
#include "gmmland/theory_checks.hpp"

namespace gmmland {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InitSpec {
  enum class Type { random_box, perturb_truth, explicit_centers };
  Type type = Type::random_box;
  double scale = 0.01;              // perturb_truth: fraction of delta_min
  std::optional<MatrixXd> centers;  // explicit_centers
};

struct DescentConfig {
  DescentOptions options;
  int restarts = 1;
  InitSpec init;
};

struct SweepConfig {
  std::vector<double> deltas{4.0, 6.0, 8.0, 10.0};
  int k = 3;       // 2 (underfit) or 3
  double sigma = 1.0;
};

struct TheoryConfig {
  std::vector<double> tail_grid;  // default 0, 0.1, ..., 10
  int geometry_samples = 100000;
  std::uint64_t geometry_seed = 7;
  double exp_assoc_denominator = 33.0;  // negative-control hook
};

struct ExperimentConfig {
  TrueMixture model{MatrixXd::Zero(1, 1), 1.0};
  int fit_k = 1;
  EngineConfig engine;
  DescentConfig descent;
  ClassifierThresholds thresholds;
  SweepConfig sweep;
  TheoryConfig theory;
  std::optional<MatrixXd> beta;  // explicit candidate for `eval`
  std::string out_dir = ".";
};

// Parses and resolves a config (generators applied, referenced files loaded).
// Malformed fields raise ConfigError naming the offending path.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Model / candidate files per the CLI file schema.
nlohmann::json model_to_json(const TrueMixture& model);
TrueMixture model_from_json(const nlohmann::json& j, const std::string& at);
nlohmann::json fitted_to_json(const MatrixXd& centers);
MatrixXd fitted_from_json(const nlohmann::json& j, int expect_d,
                          const std::string& at);

struct RunRecord {
  int restart = 0;
  std::uint64_t seed = 0;
  MatrixXd init;
  MatrixXd beta;
  std::optional<double> loss;
  std::optional<double> kl_gap;
  std::optional<StationarityReport> stationarity;
  std::optional<AssociationStats> association;
  std::optional<StructureReport> structure;
  std::optional<double> mean_consistency;
  std::optional<double> span_residual;
  Termination termination = Termination::max_iters;
  std::string error;  // empty on success

  bool converged() const {
    return error.empty() && (termination == Termination::gradient_tol ||
                             termination == Termination::step_tol);
  }
};

struct RunReport {
  std::vector<RunRecord> records;
};

struct SweepRow {
  double delta = 0.0;
  double err = 0.0;
  std::string structure;
  std::string termination;
  std::string flag;  // "", "underflow" or "no_converge"
  MatrixXd beta;     // terminal point (not serialized)
};

// Full diagnostics (loss, stationarity, structure, consistency residuals) at
// one explicit point.
RunRecord evaluate_candidate(const ExperimentConfig& cfg, const MatrixXd& beta);

// Multi-start descent; restart r uses seed engine.seed + r. Results are
// deterministic in the restart index regardless of `workers`.
RunReport run_descend(const ExperimentConfig& cfg, int workers);

// Separation sweep along theta* = (-delta, 0, delta), starting from the
// one-fit-two ideal point; records max-coordinate distance to it.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg);

TheoryBatteryResult run_theory(const ExperimentConfig& cfg);

// Serialization. Reports are deterministic: keys sorted, doubles shortest
// round-trip, no timestamps or host info.
nlohmann::json report_json(const ExperimentConfig& cfg,
                           const std::string& command, const RunReport& rep);
nlohmann::json record_json(const RunRecord& r);
nlohmann::json sweep_json(const std::vector<SweepRow>& rows);
nlohmann::json theory_json(const TheoryBatteryResult& battery);

std::string runs_csv(const RunReport& rep);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string graph_dot(const RunReport& rep);

void write_text_file(const std::string& path, const std::string& content);

const char* to_string(Termination t);

}  // namespace gmmland
