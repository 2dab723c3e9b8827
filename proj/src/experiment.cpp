#include "borisk/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "borisk/datagen.hpp"
#include "borisk/ntk.hpp"
#include "borisk/ridge.hpp"
#include "borisk/rng.hpp"

namespace borisk::experiment {

namespace {

using nlohmann::json;

// Shortest decimal representation that round-trips; deterministic and
// locale-free, which the byte-identical-rerun contract depends on.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = std::strtod(buf, nullptr);
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == back) return shorter;
  }
  return buf;
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return (v.size() % 2) ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

int worker_count() {
  if (const char* env = std::getenv("BORISK_WORKERS")) {
    const int w = std::atoi(env);
    if (w >= 1) return w;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

template <typename Fn>
void parallel_for(int count, Fn&& fn) {
  const int workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::mutex mu;
  int next = 0;
  std::exception_ptr first_error;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        int i;
        {
          std::lock_guard<std::mutex> lk(mu);
          if (next >= count || first_error) return;
          i = next++;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

spectra::SpectrumBundle bundle_for(const ExperimentConfig& cfg, int n) {
  spectra::SpectrumBundle bundle;
  switch (cfg.scenario) {
    case Scenario::Example1:
      bundle = spectra::make_spectrum(spectra::Family::Example1, n, cfg.p_factor * n);
      break;
    case Scenario::Example2:
      bundle = spectra::make_spectrum(spectra::Family::Example2, n, cfg.p_factor * n);
      break;
    case Scenario::NtkExample:
      bundle = spectra::make_spectrum(spectra::Family::NtkExample, n,
                                      static_cast<long long>(n) * n > 1 << 20
                                          ? 1 << 20
                                          : n * n,
                                      cfg.param);
      break;
    case Scenario::CustomLinear:
    case Scenario::CustomNtk: {
      Eigen::VectorXd ev = Eigen::Map<const Eigen::VectorXd>(
          cfg.custom_eigenvalues.data(), static_cast<Eigen::Index>(cfg.custom_eigenvalues.size()));
      Eigen::VectorXd wq = Eigen::Map<const Eigen::VectorXd>(
          cfg.custom_weights_sq.data(), static_cast<Eigen::Index>(cfg.custom_weights_sq.size()));
      bundle = spectra::make_custom(ev, wq, cfg.custom_sigma2);
      break;
    }
  }
  if (cfg.sigma2_override >= 0) bundle.noise_variance = cfg.sigma2_override;
  return bundle;
}

std::uint64_t task_seed(const ExperimentConfig& cfg, int n, int replicate) {
  return rng::derive_stream(cfg.master_seed,
                            static_cast<std::uint64_t>(n) * 1000003ULL +
                                static_cast<std::uint64_t>(replicate));
}

void fill_diagnostics(ResultRow& row, const spectra::SpectrumBundle& bundle, double b,
                      int n) {
  const auto& spec = bundle.spectrum;
  row.theta_norm_sq = bundle.weights.norm_sq();
  row.sigma2 = bundle.noise_variance;
  const auto ks = spectra::critical_index(spec, b, n);
  if (ks) {
    row.k_star = *ks;
    const auto [r, R] = spectra::effective_ranks(spec, *ks);
    row.r_kstar = r;
    row.R_kstar = R;
    row.w_star = spectra::tradeoff_index(spec, bundle.weights, n, b);
  }
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.n != b.n) return a.n < b.n;
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    return a.replicate < b.replicate;
  });
}

const char* kColumns =
    "schema_version,scenario,n,lambda,replicate,status,k_star,w_star,r_kstar,"
    "R_kstar,theta_norm_sq,sigma2,alpha,std_bias,std_variance,std_total,"
    "norm_bias,norm_variance,norm_total,adv_lower,adv_upper,adv_exact_gaussian,"
    "mc_std_mean,mc_std_se,mc_adv_mean,mc_adv_se,mc_norm_mean,mc_norm_se,"
    "bound_srisk_upper,bound_srisk_lower,bound_norm_lower,regime,delta_lambda,"
    "small_boundary,note";

}  // namespace

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Example1: return "Example1";
    case Scenario::Example2: return "Example2";
    case Scenario::NtkExample: return "NtkExample";
    case Scenario::CustomLinear: return "CustomLinear";
    case Scenario::CustomNtk: return "CustomNtk";
  }
  return "Example1";
}

Scenario scenario_from_name(const std::string& name) {
  for (Scenario s : {Scenario::Example1, Scenario::Example2, Scenario::NtkExample,
                     Scenario::CustomLinear, Scenario::CustomNtk})
    if (scenario_name(s) == name) return s;
  throw ConfigError("unknown scenario: " + name);
}

void ExperimentConfig::validate() const {
  if (n_grid.empty()) throw ConfigError("n_grid: must be non-empty");
  if (!std::is_sorted(n_grid.begin(), n_grid.end()))
    throw ConfigError("n_grid: must be sorted ascending");
  for (int n : n_grid)
    if (n < 2) throw ConfigError("n_grid: entries must be >= 2");
  if (!auto_lambda_grid) {
    if (lambda_grid.empty()) throw ConfigError("lambda_grid: must be non-empty");
    if (!std::is_sorted(lambda_grid.begin(), lambda_grid.end()))
      throw ConfigError("lambda_grid: must be sorted ascending");
    for (double l : lambda_grid)
      if (l < 0) throw ConfigError("lambda_grid: entries must be >= 0");
  }
  if (alpha < 0) throw ConfigError("alpha: must be >= 0");
  if (trials < 0) throw ConfigError("trials: must be >= 0");
  if (trials == 1) throw ConfigError("trials: must be 0 or >= 2");
  if (replicates < 1) throw ConfigError("replicates: must be >= 1");
  if (b <= 0) throw ConfigError("b: must be > 0");
  if (p_factor < 1) throw ConfigError("p_factor: must be >= 1");
  if (scenario == Scenario::CustomLinear || scenario == Scenario::CustomNtk) {
    if (custom_eigenvalues.empty()) throw ConfigError("custom_eigenvalues: required");
    if (custom_weights_sq.size() != custom_eigenvalues.size())
      throw ConfigError("custom_weights_sq: size must match custom_eigenvalues");
  }
  if (ntk_m < 1) throw ConfigError("ntk_m: must be >= 1");
  if (ntk_trials < 2) throw ConfigError("ntk_trials: must be >= 2");
  constants.validate();
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  bounds::BoundConstants& bc = cfg.constants;
  const std::map<std::string, std::function<void(const json&)>> handlers{
      {"scenario", [&](const json& v) { cfg.scenario = scenario_from_name(v.get<std::string>()); }},
      {"n_grid", [&](const json& v) { cfg.n_grid = v.get<std::vector<int>>(); }},
      {"lambda_grid", [&](const json& v) {
         if (v.is_string() && v.get<std::string>() == "auto") {
           cfg.auto_lambda_grid = true;
         } else {
           cfg.lambda_grid = v.get<std::vector<double>>();
         }
       }},
      {"alpha", [&](const json& v) { cfg.alpha = v.get<double>(); }},
      {"trials", [&](const json& v) { cfg.trials = v.get<long>(); }},
      {"replicates", [&](const json& v) { cfg.replicates = v.get<int>(); }},
      {"master_seed", [&](const json& v) { cfg.master_seed = v.get<std::uint64_t>(); }},
      {"b", [&](const json& v) { cfg.b = v.get<double>(); }},
      {"p_factor", [&](const json& v) { cfg.p_factor = v.get<int>(); }},
      {"param", [&](const json& v) { cfg.param = v.get<double>(); }},
      {"sigma2", [&](const json& v) { cfg.sigma2_override = v.get<double>(); }},
      {"output_path", [&](const json& v) { cfg.output_path = v.get<std::string>(); }},
      {"strict", [&](const json& v) { cfg.strict = v.get<bool>(); }},
      {"custom_eigenvalues",
       [&](const json& v) { cfg.custom_eigenvalues = v.get<std::vector<double>>(); }},
      {"custom_weights_sq",
       [&](const json& v) { cfg.custom_weights_sq = v.get<std::vector<double>>(); }},
      {"custom_sigma2", [&](const json& v) { cfg.custom_sigma2 = v.get<double>(); }},
      {"ntk_m", [&](const json& v) { cfg.ntk_m = v.get<int>(); }},
      {"ntk_R", [&](const json& v) { cfg.ntk_R = v.get<double>(); }},
      {"ntk_trials", [&](const json& v) { cfg.ntk_trials = v.get<long>(); }},
      {"constants", [&](const json& v) {
         for (auto& [k, val] : v.items()) {
           double* slot = nullptr;
           if (k == "C1") slot = &bc.C1;
           else if (k == "C2") slot = &bc.C2;
           else if (k == "C3") slot = &bc.C3;
           else if (k == "C4") slot = &bc.C4;
           else if (k == "C5") slot = &bc.C5;
           else if (k == "C6") slot = &bc.C6;
           else if (k == "C7") slot = &bc.C7;
           else if (k == "C8") slot = &bc.C8;
           else if (k == "C9") slot = &bc.C9;
           else if (k == "c") slot = &bc.c;
           else throw ConfigError("constants." + k + ": unknown constant");
           *slot = val.get<double>();
         }
       }},
  };
  for (auto& [key, value] : j.items()) {
    auto it = handlers.find(key);
    if (it == handlers.end()) throw ConfigError(key + ": unknown config key");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
  cfg.constants.b = cfg.b;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::vector<double> default_lambda_grid(const spectra::Spectrum& spec, double b, int n,
                                        int points) {
  const auto ks = spectra::critical_index(spec, b, n);
  if (!ks) throw NumericalError("default_lambda_grid: no critical index for this spectrum");
  const auto [r, R] = spectra::effective_ranks(spec, *ks);
  (void)R;
  const double lo = spec.eigenvalues(*ks) * r / (10.0 * n);
  const double hi = 10.0 * spec.eigenvalues(0);
  std::vector<double> grid(points);
  const double ratio = std::log(hi / lo) / (points - 1);
  for (int i = 0; i < points; ++i) grid[i] = lo * std::exp(ratio * i);
  grid.back() = hi;
  return grid;
}

std::string ResultsTable::to_csv() const {
  std::ostringstream out;
  out << kColumns << "\n";
  auto opt_int = [](const std::optional<int>& v) { return v ? std::to_string(*v) : ""; };
  for (const ResultRow& r : rows) {
    out << schema_version << ',' << r.scenario << ',' << r.n << ',' << fmt(r.lambda)
        << ',' << r.replicate << ',' << r.status << ',' << opt_int(r.k_star) << ','
        << opt_int(r.w_star) << ',' << fmt(r.r_kstar) << ',' << fmt(r.R_kstar) << ','
        << fmt(r.theta_norm_sq) << ',' << fmt(r.sigma2) << ',' << fmt(r.alpha) << ','
        << fmt(r.risk.std_bias) << ',' << fmt(r.risk.std_variance) << ','
        << fmt(r.risk.std_total) << ',' << fmt(r.risk.norm_bias) << ','
        << fmt(r.risk.norm_variance) << ',' << fmt(r.risk.norm_total) << ','
        << fmt(r.risk.adv_lower) << ',' << fmt(r.risk.adv_upper) << ','
        << (r.risk.adv_exact_gaussian ? fmt(*r.risk.adv_exact_gaussian) : "") << ','
        << (r.risk.mc_std ? fmt(r.risk.mc_std->mean) : "") << ','
        << (r.risk.mc_std ? fmt(r.risk.mc_std->std_error) : "") << ','
        << (r.risk.mc_adv ? fmt(r.risk.mc_adv->mean) : "") << ','
        << (r.risk.mc_adv ? fmt(r.risk.mc_adv->std_error) : "") << ','
        << (r.risk.mc_norm ? fmt(r.risk.mc_norm->mean) : "") << ','
        << (r.risk.mc_norm ? fmt(r.risk.mc_norm->std_error) : "") << ','
        << (r.bound ? fmt(r.bound->srisk_upper) : "") << ','
        << (r.bound && r.bound->srisk_lower ? fmt(*r.bound->srisk_lower) : "") << ','
        << (r.bound ? fmt(r.bound->norm_lower) : "") << ','
        << (r.bound ? bounds::regime_name(r.bound->regime) : "") << ','
        << (r.bound && r.bound->delta_lambda ? fmt(*r.bound->delta_lambda) : "") << ','
        << (r.bound ? fmt(r.bound->small_boundary) : "") << ',' << sanitize(r.note)
        << "\n";
  }
  return out.str();
}

void ResultsTable::write_csv(const std::string& path) const {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << to_csv();
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string ResultsTable::to_json() const {
  json arr = json::array();
  for (const ResultRow& r : rows) {
    json row{{"schema_version", schema_version},
             {"scenario", r.scenario},
             {"n", r.n},
             {"lambda", r.lambda},
             {"replicate", r.replicate},
             {"status", r.status},
             {"r_kstar", r.r_kstar},
             {"R_kstar", r.R_kstar},
             {"theta_norm_sq", r.theta_norm_sq},
             {"sigma2", r.sigma2},
             {"alpha", r.alpha},
             {"std_total", r.risk.std_total},
             {"norm_total", r.risk.norm_total},
             {"adv_lower", r.risk.adv_lower},
             {"adv_upper", r.risk.adv_upper},
             {"note", r.note}};
    if (r.k_star) row["k_star"] = *r.k_star;
    if (r.w_star) row["w_star"] = *r.w_star;
    if (r.risk.adv_exact_gaussian) row["adv_exact_gaussian"] = *r.risk.adv_exact_gaussian;
    if (r.bound) {
      row["bound_srisk_upper"] = r.bound->srisk_upper;
      row["bound_norm_lower"] = r.bound->norm_lower;
      row["regime"] = bounds::regime_name(r.bound->regime);
      if (r.bound->delta_lambda) row["delta_lambda"] = *r.bound->delta_lambda;
    }
    arr.push_back(std::move(row));
  }
  return arr.dump(2);
}

namespace {

// Rows for one (n, replicate) cell: one design draw shared across the
// lambda grid.
std::vector<ResultRow> run_cell(const ExperimentConfig& cfg,
                                const spectra::SpectrumBundle& bundle, int n,
                                int replicate, const std::vector<double>& lambdas) {
  const auto& spec = bundle.spectrum;
  const auto& w = bundle.weights;
  const double sigma2 = bundle.noise_variance;
  const std::uint64_t seed = task_seed(cfg, n, replicate);

  ResultRow base;
  base.scenario = scenario_name(cfg.scenario);
  base.n = n;
  base.replicate = replicate;
  base.alpha = cfg.alpha;
  fill_diagnostics(base, bundle, cfg.b, n);

  std::vector<ResultRow> rows;
  const auto design = datagen::sample_design(spec, n, datagen::DesignDist::Gaussian, seed);

  // Reference point (lambda = 0) for bound classification and trade-off
  // normalization; reuse a shared factorization when the grid has > 1 point.
  std::unique_ptr<risk::EigenbasisCache> cache;
  auto moments = [&](double lam) {
    if (cache) return cache->conditional_moments(lam, sigma2, cfg.alpha);
    return risk::conditional_moments(design.X, lam, spec, w, sigma2, cfg.alpha);
  };
  const bool multi = lambdas.size() > 1 || cfg.trials > 0;
  try {
    if (multi) cache = std::make_unique<risk::EigenbasisCache>(design.X, spec, w);
    risk::RiskReport ref = moments(0.0);
    for (double lam : lambdas) {
      ResultRow row = base;
      row.lambda = lam;
      try {
        row.risk = (lam == 0.0) ? ref : moments(lam);
        if (cfg.trials > 0 && cache) {
          const auto mc = risk::mc_risks(*cache, sigma2, lam, cfg.alpha, cfg.trials,
                                         rng::derive_stream(seed, 0xA11CE));
          row.risk.mc_std = mc.std_mc;
          row.risk.mc_adv = mc.adv_mc;
          row.risk.mc_norm = mc.norm_mc;
        }
        try {
          row.bound = bounds::regime_classify(spec, w, sigma2, n, lam, cfg.alpha,
                                              cfg.constants, ref.std_total, ref.adv_lower);
        } catch (const std::exception& e) {
          row.note = e.what();
        }
      } catch (const std::exception& e) {
        row.status = "error";
        row.note = e.what();
      }
      rows.push_back(std::move(row));
    }
  } catch (const std::exception& e) {
    for (double lam : lambdas) {
      ResultRow row = base;
      row.lambda = lam;
      row.status = "error";
      row.note = e.what();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

ResultsTable run_linear(const ExperimentConfig& cfg,
                        const std::function<std::vector<double>(const spectra::Spectrum&, int)>&
                            grid_for) {
  struct Cell {
    int n, replicate;
    const spectra::SpectrumBundle* bundle;
    const std::vector<double>* lambdas;
  };
  std::vector<spectra::SpectrumBundle> bundles;
  std::vector<std::vector<double>> grids;
  bundles.reserve(cfg.n_grid.size());
  for (int n : cfg.n_grid) {
    bundles.push_back(bundle_for(cfg, n));
    grids.push_back(grid_for(bundles.back().spectrum, n));
  }
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i)
    for (int rep = 0; rep < cfg.replicates; ++rep)
      cells.push_back({cfg.n_grid[i], rep, &bundles[i], &grids[i]});

  std::vector<std::vector<ResultRow>> cell_rows(cells.size());
  parallel_for(static_cast<int>(cells.size()), [&](int i) {
    const Cell& c = cells[i];
    cell_rows[i] = run_cell(cfg, *c.bundle, c.n, c.replicate, *c.lambdas);
  });

  ResultsTable table;
  for (auto& rs : cell_rows)
    for (auto& r : rs) table.rows.push_back(std::move(r));
  sort_rows(table.rows);

  if (cfg.strict)
    for (const auto& r : table.rows)
      if (r.status != "ok") throw NumericalError("strict mode: " + r.note);
  if (!cfg.output_path.empty()) table.write_csv(cfg.output_path);
  return table;
}

}  // namespace

ResultsTable run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.scenario == Scenario::CustomNtk || config.scenario == Scenario::NtkExample)
    if (config.auto_lambda_grid)
      throw ConfigError("lambda_grid: auto grid is for linear scenarios");
  return run_linear(config, [&](const spectra::Spectrum& spec, int n) {
    if (config.auto_lambda_grid) return default_lambda_grid(spec, config.b, n);
    (void)spec;
    (void)n;
    return config.lambda_grid;
  });
}

TradeoffResult tradeoff_curve(const ExperimentConfig& config) {
  config.validate();
  ExperimentConfig cfg = config;
  cfg.output_path.clear();  // write after summary assembly
  TradeoffResult result;
  result.table = run_linear(cfg, [&](const spectra::Spectrum& spec, int n) {
    std::vector<double> grid =
        config.auto_lambda_grid ? default_lambda_grid(spec, config.b, n) : config.lambda_grid;
    if (std::find(grid.begin(), grid.end(), 0.0) == grid.end())
      grid.insert(grid.begin(), 0.0);
    return grid;
  });

  // Regime-coverage warning per n.
  for (std::size_t i = 0; i < config.n_grid.size(); ++i) {
    const int n = config.n_grid[i];
    double max_lambda = 0, boundary = 0, lam1 = 0;
    for (const auto& r : result.table.rows)
      if (r.n == n && r.bound) {
        max_lambda = std::max(max_lambda, r.lambda);
        boundary = r.bound->small_boundary;
      }
    lam1 = bundle_for(config, n).spectrum.eigenvalues(0);
    if (max_lambda < lam1)
      for (auto& r : result.table.rows)
        if (r.n == n && r.lambda == 0.0 && r.note.empty())
          r.note = "warning: lambda grid does not reach the large regime (lambda_1=" +
                   fmt(lam1) + "; small boundary=" + fmt(boundary) + ")";
  }

  result.summary = summary_from_csv(result.table.to_csv());
  if (!config.output_path.empty()) {
    result.table.write_csv(config.output_path);
    const std::string spath = config.output_path + ".summary.csv";
    std::ofstream out(spath + ".tmp", std::ios::binary | std::ios::trunc);
    out << result.summary_csv();
    out.close();
    std::filesystem::rename(spath + ".tmp", spath);
  }
  return result;
}

std::string TradeoffResult::summary_csv() const {
  std::ostringstream out;
  out << "n,min_objective,argmin_lambda\n";
  for (const auto& s : summary)
    out << s.n << ',' << fmt(s.min_objective) << ',' << fmt(s.argmin_lambda) << "\n";
  return out.str();
}

std::vector<TradeoffSummaryRow> summary_from_csv(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("summary_from_csv: empty input");
  std::vector<std::string> cols;
  {
    std::istringstream hs(line);
    std::string c;
    while (std::getline(hs, c, ',')) cols.push_back(c);
  }
  auto col = [&](const std::string& name) {
    auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) throw std::runtime_error("summary_from_csv: missing column " + name);
    return static_cast<std::size_t>(it - cols.begin());
  };
  const std::size_t cn = col("n"), clam = col("lambda"), cstat = col("status"),
                    cstd = col("std_total"), cadv = col("adv_lower"),
                    cth = col("theta_norm_sq"), cal = col("alpha");

  struct Point {
    std::vector<double> std_vals, adv_vals;
    double theta2 = 0, alpha = 0;
  };
  std::map<int, std::map<double, Point>> by_n;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) f.push_back(c);
    while (f.size() < cols.size()) f.emplace_back();
    if (f[cstat] != "ok") continue;
    Point& pt = by_n[std::stoi(f[cn])][std::stod(f[clam])];
    pt.std_vals.push_back(std::stod(f[cstd]));
    pt.adv_vals.push_back(std::stod(f[cadv]));
    pt.theta2 = std::stod(f[cth]);
    pt.alpha = std::stod(f[cal]);
  }

  std::vector<TradeoffSummaryRow> summary;
  for (auto& [n, pts] : by_n) {
    auto ref_it = pts.find(0.0);
    if (ref_it == pts.end()) continue;
    const double ref_std = median(ref_it->second.std_vals);
    TradeoffSummaryRow row;
    row.n = n;
    row.min_objective = std::numeric_limits<double>::infinity();
    for (auto& [lam, pt] : pts) {
      const double obj = median(pt.std_vals) / (pt.theta2 * ref_std) +
                         median(pt.adv_vals) / (pt.alpha * pt.alpha);
      if (obj < row.min_objective) {
        row.min_objective = obj;
        row.argmin_lambda = lam;
      }
    }
    summary.push_back(row);
  }
  return summary;
}

ConditionSet report_conditions(const ExperimentConfig& config) {
  config.validate();
  if (config.n_grid.size() < 3)
    throw ConfigError("n_grid: condition reports need at least 3 grid points");
  ConditionSet set;
  using spectra::ConditionId;
  auto run_builtin = [&](spectra::Family fam, double param,
                         std::initializer_list<ConditionId> ids) {
    for (ConditionId id : ids)
      set.reports.push_back(spectra::check_conditions(id, fam, param, config.n_grid,
                                                      config.b, config.p_factor));
  };
  switch (config.scenario) {
    case Scenario::Example1:
      run_builtin(spectra::Family::Example1, 0, {ConditionId::Benign, ConditionId::TradeOff});
      break;
    case Scenario::Example2:
      run_builtin(spectra::Family::Example2, 0, {ConditionId::Benign, ConditionId::TradeOff});
      break;
    case Scenario::NtkExample:
      run_builtin(spectra::Family::NtkExample, config.param,
                  {ConditionId::NtkBenign, ConditionId::NtkHighDim});
      break;
    case Scenario::CustomLinear:
    case Scenario::CustomNtk: {
      const auto bundle = bundle_for(config, config.n_grid.front());
      auto bundle_at = [bundle](int) { return bundle; };
      const auto ids = (config.scenario == Scenario::CustomLinear)
                           ? std::vector<ConditionId>{ConditionId::Benign, ConditionId::TradeOff}
                           : std::vector<ConditionId>{ConditionId::NtkBenign};
      for (ConditionId id : ids)
        set.reports.push_back(
            spectra::check_conditions(id, bundle_at, config.n_grid, config.b));
      break;
    }
  }
  if (!config.output_path.empty()) {
    std::ofstream out(config.output_path + ".tmp", std::ios::binary | std::ios::trunc);
    out << set.json();
    out.close();
    std::filesystem::rename(config.output_path + ".tmp", config.output_path);
  }
  return set;
}

std::string ConditionSet::text() const {
  std::ostringstream out;
  for (const auto& rep : reports) {
    out << "== " << spectra::condition_name(rep.condition) << ": "
        << spectra::verdict_name(rep.verdict) << " ==\n";
    out << "n grid:";
    for (int n : rep.n_grid) out << ' ' << n;
    out << "\n";
    for (const auto& term : rep.terms) {
      out << "  " << term.name << " (slope " << fmt(term.loglog_slope) << ", "
          << (term.decreasing ? "decreasing" : "not decreasing") << "):";
      for (double v : term.values) out << ' ' << fmt(v);
      out << "\n";
    }
    if (!rep.note.empty()) out << "  note: " << rep.note << "\n";
  }
  return out.str();
}

std::string ConditionSet::json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& rep : reports) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : rep.terms)
      terms.push_back({{"name", t.name},
                       {"values", t.values},
                       {"loglog_slope", t.loglog_slope},
                       {"decreasing", t.decreasing}});
    arr.push_back({{"condition", spectra::condition_name(rep.condition)},
                   {"verdict", spectra::verdict_name(rep.verdict)},
                   {"n_grid", rep.n_grid},
                   {"terms", std::move(terms)},
                   {"note", rep.note}});
  }
  return arr.dump(2);
}

ResultsTable ntk_sweep(const ExperimentConfig& config) {
  config.validate();
  if (config.scenario != Scenario::NtkExample && config.scenario != Scenario::CustomNtk)
    throw ConfigError("scenario: ntk sweep requires NtkExample or CustomNtk");

  struct Cell {
    int n, replicate;
  };
  std::vector<Cell> cells;
  for (int n : config.n_grid)
    for (int rep = 0; rep < config.replicates; ++rep) cells.push_back({n, rep});

  std::vector<ResultRow> rows(cells.size());
  parallel_for(static_cast<int>(cells.size()), [&](int i) {
    const auto [n, rep] = cells[i];
    ResultRow row;
    row.scenario = scenario_name(config.scenario);
    row.n = n;
    row.replicate = rep;
    row.alpha = config.alpha;
    try {
      const auto bundle = bundle_for(config, n);
      const auto& spec = bundle.spectrum;
      fill_diagnostics(row, bundle, config.b, n);
      const std::uint64_t seed = task_seed(config, n, rep);
      const auto model =
          ntk::init_network(config.ntk_m, spec.truncation_dim, rng::derive_stream(seed, 1),
                            config.ntk_R);
      const auto design =
          datagen::sample_design(spec, n, datagen::DesignDist::Gaussian,
                                 rng::derive_stream(seed, 2));
      const Eigen::VectorXd w_star =
          ntk::synthetic_target(model, spec, rng::derive_stream(seed, 3));
      Eigen::VectorXd y(n);
      for (int j = 0; j < n; ++j)
        y(j) = ntk::forward(model, w_star, design.X.row(j).transpose(), ntk::ForwardMode::NTK);
      auto noise_eng = rng::make_engine(rng::derive_stream(seed, 4));
      std::normal_distribution<double> gauss(0.0, std::sqrt(bundle.noise_variance));
      for (int j = 0; j < n; ++j) y(j) += gauss(noise_eng);
      const auto fit = ntk::ntk_fixed_point(model, design.X, y);
      row.risk = ntk::ntk_risks(model, fit, w_star, bundle.noise_variance, config.alpha,
                                config.ntk_trials, rng::derive_stream(seed, 5), spec);
      row.sigma2 = bundle.noise_variance;
    } catch (const std::exception& e) {
      row.status = "error";
      row.note = e.what();
    }
    rows[i] = std::move(row);
  });

  ResultsTable table;
  table.rows = std::move(rows);
  sort_rows(table.rows);
  if (config.strict)
    for (const auto& r : table.rows)
      if (r.status != "ok") throw NumericalError("strict mode: " + r.note);
  if (!config.output_path.empty()) table.write_csv(config.output_path);
  return table;
}

}  // namespace borisk::experiment
