#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "borisk/bounds.hpp"
#include "borisk/risk.hpp"
#include "borisk/spectra.hpp"

namespace borisk::experiment {

// Raised for malformed configuration (maps to CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised for numerical failure in strict mode (maps to CLI exit code 3).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Scenario { Example1, Example2, NtkExample, CustomLinear, CustomNtk };
std::string scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

struct ExperimentConfig {
  Scenario scenario = Scenario::Example1;
  std::vector<int> n_grid{256};
  std::vector<double> lambda_grid{0.0};
  bool auto_lambda_grid = false;  // geometric 25-point grid per n
  double alpha = 0.5;
  long trials = 0;  // Monte Carlo trials per point; 0 = closed form only
  int replicates = 1;
  std::uint64_t master_seed = 1;
  double b = 2.0;
  int p_factor = 2;  // ambient dimension p = p_factor * n for linear scenarios
  double param = 0.5;  // PolyDecay exponent / NtkExample s
  double sigma2_override = -1.0;  // < 0: use the family's noise level
  std::string output_path;
  bool strict = false;
  bounds::BoundConstants constants;

  // CustomLinear inputs.
  std::vector<double> custom_eigenvalues;
  std::vector<double> custom_weights_sq;
  double custom_sigma2 = 1.0;

  // NTK scenarios.
  int ntk_m = 1 << 12;
  double ntk_R = 10.0;
  long ntk_trials = 400;

  void validate() const;
};

// Parses a JSON config file. Unknown keys are a ConfigError (reported with
// the offending key); flags in the CLI layer override parsed values.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);

struct ResultRow {
  std::string scenario;
  int n = 0;
  double lambda = 0.0;
  int replicate = 0;
  std::string status = "ok";  // "ok" or "error"
  std::optional<int> k_star;
  std::optional<int> w_star;
  double r_kstar = 0.0;
  double R_kstar = 0.0;
  double theta_norm_sq = 0.0;
  double sigma2 = 0.0;
  double alpha = 0.0;
  risk::RiskReport risk;
  std::optional<bounds::BoundReport> bound;
  std::string note;
};

struct ResultsTable {
  static constexpr int schema_version = 1;
  std::vector<ResultRow> rows;

  std::string to_csv() const;
  // Writes CSV via temp file + rename so readers never see a partial file.
  void write_csv(const std::string& path) const;
  std::string to_json() const;
};

struct TradeoffSummaryRow {
  int n = 0;
  double min_objective = 0.0;  // min over lambda of S/(||theta||^2 S(0)) + A_lower/alpha^2
  double argmin_lambda = 0.0;
};

struct TradeoffResult {
  ResultsTable table;
  std::vector<TradeoffSummaryRow> summary;
  std::string summary_csv() const;
};

ResultsTable run_experiment(const ExperimentConfig& config);

// Lambda-sweep with the divergence objective; forces lambda = 0 into the grid
// so the summary is recomputable from the emitted rows alone. Warns in the
// note column when the grid misses a regime.
TradeoffResult tradeoff_curve(const ExperimentConfig& config);

// Condition checkers for the configured scenario, rendered as text and JSON.
struct ConditionSet {
  std::vector<spectra::ConditionReport> reports;
  std::string text() const;
  std::string json() const;
};
ConditionSet report_conditions(const ExperimentConfig& config);

ResultsTable ntk_sweep(const ExperimentConfig& config);

// Recomputes the tradeoff summary from a CSV previously written by this
// module (independent verification path for the emitted summary).
std::vector<TradeoffSummaryRow> summary_from_csv(const std::string& csv_text);

// Geometric default grid from lambda_{k*+1} r_{k*} / (10 n) to 10 lambda_1.
std::vector<double> default_lambda_grid(const spectra::Spectrum& spec, double b, int n,
                                        int points = 25);

}  // namespace borisk::experiment
