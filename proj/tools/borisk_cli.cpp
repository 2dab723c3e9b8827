#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "borisk/experiment.hpp"

namespace {

using borisk::experiment::ExperimentConfig;
using borisk::experiment::Scenario;

// Flags shared by all subcommands; only values the user actually passed
// override the config file.
struct Overrides {
  std::vector<int> n_grid;
  std::vector<double> lambda_grid;
  double alpha = -1;
  long trials = -1;
  int replicates = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string output;
  bool strict = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--n", n_grid, "sample sizes (overrides config n_grid)");
    cmd->add_option("--lambda", lambda_grid, "regularization grid (overrides config)");
    cmd->add_option("--alpha", alpha, "perturbation budget");
    cmd->add_option("--trials", trials, "Monte Carlo trials per point");
    cmd->add_option("--replicates", replicates, "independent design draws per point");
    cmd->add_option("--seed", seed, "master seed")->each([this](const std::string&) {
      seed_set = true;
    });
    cmd->add_option("--output,-o", output, "output CSV path");
    cmd->add_flag("--strict", strict, "abort with exit code 3 on any numerical failure");
  }

  void apply(ExperimentConfig& cfg) const {
    if (!n_grid.empty()) cfg.n_grid = n_grid;
    if (!lambda_grid.empty()) {
      cfg.lambda_grid = lambda_grid;
      cfg.auto_lambda_grid = false;
    }
    if (alpha >= 0) cfg.alpha = alpha;
    if (trials >= 0) cfg.trials = trials;
    if (replicates >= 1) cfg.replicates = replicates;
    if (seed_set) cfg.master_seed = seed;
    if (!output.empty()) cfg.output_path = output;
    if (strict) cfg.strict = true;
  }
};

ExperimentConfig repro_preset(Scenario scenario) {
  ExperimentConfig cfg;
  cfg.scenario = scenario;
  cfg.master_seed = 20240817;
  cfg.replicates = 5;
  cfg.alpha = 0.5;
  switch (scenario) {
    case Scenario::Example1:
      cfg.n_grid = {256, 1024, 4096};
      cfg.lambda_grid = {0.0};
      break;
    case Scenario::Example2:
      cfg.n_grid = {128, 256, 512};
      cfg.lambda_grid = {0.0};
      break;
    case Scenario::NtkExample:
      cfg.n_grid = {8, 16, 32};
      cfg.replicates = 3;
      cfg.ntk_m = 1 << 12;
      break;
    default:
      throw borisk::experiment::ConfigError("repro: scenario has no preset");
  }
  return cfg;
}

void print_table_summary(const borisk::experiment::ResultsTable& table) {
  int ok = 0, err = 0;
  for (const auto& r : table.rows) (r.status == "ok" ? ok : err)++;
  std::cout << table.rows.size() << " rows (" << ok << " ok, " << err << " error)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risk and bound experiments for overparameterized linear and NTK models"};
  app.require_subcommand(1);

  std::string repro_scenario;
  std::string config_path;

  auto* repro = app.add_subcommand("repro", "run a named built-in scenario");
  repro->add_option("scenario", repro_scenario, "Example1 | Example2 | NtkExample")
      ->required();
  Overrides repro_ov;
  repro_ov.attach(repro);

  auto* sweep = app.add_subcommand("sweep", "lambda trade-off sweep from a config file");
  sweep->add_option("--config", config_path, "JSON config path")->required();
  Overrides sweep_ov;
  sweep_ov.attach(sweep);

  auto* conds = app.add_subcommand("conditions", "evaluate the benign/trade-off conditions");
  conds->add_option("--config", config_path, "JSON config path")->required();
  Overrides cond_ov;
  cond_ov.attach(conds);

  auto* ntk = app.add_subcommand("ntk-sweep", "NTK risk sweep from a config file");
  ntk->add_option("--config", config_path, "JSON config path")->required();
  Overrides ntk_ov;
  ntk_ov.attach(ntk);

  CLI11_PARSE(app, argc, argv);

  try {
    if (repro->parsed()) {
      ExperimentConfig cfg =
          repro_preset(borisk::experiment::scenario_from_name(repro_scenario));
      repro_ov.apply(cfg);
      if (cfg.output_path.empty()) cfg.output_path = repro_scenario + "_repro.csv";
      const auto table = (cfg.scenario == Scenario::NtkExample)
                             ? borisk::experiment::ntk_sweep(cfg)
                             : borisk::experiment::run_experiment(cfg);
      print_table_summary(table);
      std::cout << "wrote " << cfg.output_path << "\n";
    } else if (sweep->parsed()) {
      ExperimentConfig cfg = borisk::experiment::load_config(config_path);
      sweep_ov.apply(cfg);
      const auto result = borisk::experiment::tradeoff_curve(cfg);
      print_table_summary(result.table);
      std::cout << result.summary_csv();
      if (!cfg.output_path.empty())
        std::cout << "wrote " << cfg.output_path << " and " << cfg.output_path
                  << ".summary.csv\n";
    } else if (conds->parsed()) {
      ExperimentConfig cfg = borisk::experiment::load_config(config_path);
      cond_ov.apply(cfg);
      const auto set = borisk::experiment::report_conditions(cfg);
      std::cout << set.text();
      if (!cfg.output_path.empty()) std::cout << "wrote " << cfg.output_path << "\n";
    } else if (ntk->parsed()) {
      ExperimentConfig cfg = borisk::experiment::load_config(config_path);
      ntk_ov.apply(cfg);
      const auto table = borisk::experiment::ntk_sweep(cfg);
      print_table_summary(table);
      if (!cfg.output_path.empty()) std::cout << "wrote " << cfg.output_path << "\n";
    }
  } catch (const borisk::experiment::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const borisk::experiment::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
