#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include "gmmland/experiments.hpp"

namespace {

using namespace gmmland;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  int workers = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)")
      ->required();
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--workers", args.workers, "restart-level worker cap");
  cmd->add_option("--seed", args.seed, "override the engine seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
}

ExperimentConfig resolve(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args.config_path);
  if (args.seed_set) cfg.engine.seed = args.seed;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  std::filesystem::create_directories(cfg.out_dir);
  return cfg;
}

std::string path_in(const ExperimentConfig& cfg, const char* name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

int cmd_eval(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve(args);
  if (!cfg.beta) {
    throw ConfigError("config.beta: eval requires an explicit candidate");
  }
  RunReport rep;
  rep.records.push_back(evaluate_candidate(cfg, *cfg.beta));
  const RunRecord& r = rep.records[0];
  std::printf("loss                    %.12g\n", *r.loss);
  if (r.kl_gap) std::printf("kl_gap                  %.12g\n", *r.kl_gap);
  std::printf("grad_inf_norm           %.6g\n", r.stationarity->grad_inf_norm);
  std::printf("em_residual             %.6g\n", r.stationarity->em_residual);
  std::printf("stein_residual          %.6g\n", r.stationarity->stein_residual);
  std::printf("raw_stein_residual      %.6g\n",
              r.stationarity->raw_stein_residual);
  std::printf("hessian_min_eigenvalue  %.6g\n",
              r.stationarity->hessian_min_eigenvalue);
  std::printf("mean_consistency        %.6g\n", *r.mean_consistency);
  std::printf("span_residual           %.6g\n", *r.span_residual);
  std::printf("structure               %s\n", r.structure->label().c_str());
  write_text_file(path_in(cfg, "report.json"),
                  report_json(cfg, "eval", rep).dump(2) + "\n");
  write_text_file(path_in(cfg, "runs.csv"), runs_csv(rep));
  write_text_file(path_in(cfg, "graph.dot"), graph_dot(rep));
  return 0;
}

int cmd_descend(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve(args);
  const int workers = args.workers > 0
                          ? args.workers
                          : static_cast<int>(std::thread::hardware_concurrency());
  const RunReport rep = run_descend(cfg, std::max(1, workers));
  const nlohmann::json j = report_json(cfg, "descend", rep);
  for (const auto& [label, count] :
       j.at("aggregate").at("histogram").items()) {
    std::printf("%6d  %s\n", count.get<int>(), label.c_str());
  }
  std::printf("converged %d/%zu, fraction_spurious %.4g\n",
              j.at("aggregate").at("converged").get<int>(),
              rep.records.size(),
              j.at("aggregate").at("fraction_spurious").get<double>());
  write_text_file(path_in(cfg, "report.json"), j.dump(2) + "\n");
  write_text_file(path_in(cfg, "runs.csv"), runs_csv(rep));
  write_text_file(path_in(cfg, "graph.dot"), graph_dot(rep));
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve(args);
  const std::vector<SweepRow> rows = run_sweep(cfg);
  for (const auto& r : rows) {
    std::printf("delta %-8g err %-14.6g %-18s %s %s\n", r.delta, r.err,
                r.structure.c_str(), r.termination.c_str(), r.flag.c_str());
  }
  nlohmann::json j;
  j["schema"] = 1;
  j["command"] = "sweep-snr";
  j["sweep"] = sweep_json(rows);
  j["k"] = cfg.sweep.k;
  j["sigma"] = cfg.sweep.sigma;
  write_text_file(path_in(cfg, "report.json"), j.dump(2) + "\n");
  write_text_file(path_in(cfg, "sweep.csv"), sweep_csv(rows));
  return 0;
}

int cmd_verify(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve(args);
  const TheoryBatteryResult battery = run_theory(cfg);
  for (const auto& r : battery.results) {
    std::printf("%-26s grid %-7d violations %-5d worst_margin %.6g\n",
                r.name.c_str(), r.grid_size, r.violations, r.worst_margin);
  }
  nlohmann::json j;
  j["schema"] = 1;
  j["command"] = "verify-theory";
  j["theory_checks"] = theory_json(battery);
  write_text_file(path_in(cfg, "report.json"), j.dump(2) + "\n");
  return battery.total_violations() > 0 ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"population likelihood landscape tools for Gaussian mixtures"};
  app.require_subcommand(1);
  CommonArgs args;
  CLI::App* eval = app.add_subcommand("eval", "diagnostics at an explicit candidate");
  CLI::App* descend = app.add_subcommand("descend", "multi-start descent and classification");
  CLI::App* sweep = app.add_subcommand("sweep-snr", "separation sweep of the one-fit-two minimum");
  CLI::App* verify = app.add_subcommand("verify-theory", "numeric inequality battery");
  for (CLI::App* cmd : {eval, descend, sweep, verify}) add_common(cmd, args);

  CLI11_PARSE(app, argc, argv);
  try {
    if (eval->parsed()) return cmd_eval(args);
    if (descend->parsed()) return cmd_descend(args);
    if (sweep->parsed()) return cmd_sweep(args);
    if (verify->parsed()) return cmd_verify(args);
  } catch (const gmmland::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
