// Command-line surface: simulation, Phase I fitting, chart design,
// monitoring, ARL evaluation, experiment runs, and RMI computation.

#include "amfewma/harness.hpp"
#include "amfewma/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace amfewma;

namespace {

struct FitOptions {
  int order = 4;
  int n_basis = 10;
  double threshold = 0.9;
};

std::vector<CoefficientProfile> smooth_units(const std::vector<UnitProfiles>& units,
                                             const BasisSystem& basis,
                                             const GramMatrices& grams) {
  std::vector<CoefficientProfile> out;
  out.reserve(units.size());
  auto grid = default_lambda_grid();
  for (const auto& unit : units) out.push_back(smooth_unit(unit, basis, grams, grid));
  return out;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  ExperimentConfig config;
  auto get = [&](const char* key, auto& target) {
    if (j.contains(key)) target = j.at(key).get<std::decay_t<decltype(target)>>();
  };
  get("scenarios", config.scenarios);
  get("severity_levels", config.severity_levels);
  get("phase1_total", config.phase1_total);
  get("train_size", config.train_size);
  get("tune_size", config.tune_size);
  get("n_seq", config.n_seq);
  get("n_obs", config.n_obs);
  get("phase2_n_seq", config.phase2_n_seq);
  get("phase2_n_obs", config.phase2_n_obs);
  get("shift_location", config.shift_location);
  get("n_runs", config.n_runs);
  get("arl0", config.arl0);
  get("variance_threshold", config.variance_threshold);
  get("basis_order", config.basis_order);
  get("n_basis", config.n_basis);
  get("grid_size", config.grid_size);
  get("v2_n_seq", config.v2_n_seq);
  get("v2_n_obs", config.v2_n_obs);
  get("v2_burn_in", config.v2_burn_in);
  get("epsilon", config.epsilon);
  get("opt_delta1_scale", config.opt_delta1_scale);
  if (j.contains("theta_grid")) {
    for (const auto& t : j.at("theta_grid"))
      config.theta_grid.push_back({t.at("lambda").get<double>(), t.at("k").get<double>()});
  }
  if (!j.contains("roster")) throw std::runtime_error("config: missing roster");
  for (const auto& r : j.at("roster")) {
    ChartSpecEntry entry;
    std::string kind = r.at("kind").get<std::string>();
    if (kind == "SHEWHART") {
      entry.kind = ChartKind::Shewhart;
    } else if (kind == "MFEWMA") {
      entry.kind = ChartKind::Mfewma;
      entry.lambda = r.at("lambda").get<double>();
    } else if (kind == "AMFEWMA") {
      entry.kind = ChartKind::Amfewma;
      entry.lambda = r.at("lambda").get<double>();
      entry.k = r.at("k").get<double>();
    } else if (kind == "AMFEWMA*") {
      entry.kind = ChartKind::AmfewmaOptimal;
    } else {
      throw std::runtime_error("config: unknown chart kind '" + kind + "'");
    }
    if (r.contains("variant") && r.at("variant") == "eta2") entry.variant = ScoreVariant::Eta2;
    config.roster.push_back(entry);
  }
  return config;
}

int run_simulate(int scenario, int sl, int n, uint64_t seed, const std::string& out_dir,
                 bool as_printed) {
  ScenarioSpec spec = scenario_table(scenario, sl);
  GeneratorModel model = build_generator();
  std::vector<UnitProfiles> units;
  units.reserve(n);
  for (int i = 0; i < n; ++i) {
    auto rng = unit_rng(seed, static_cast<uint64_t>(i));
    auto unit = draw_unit(model, spec, rng, as_printed);
    for (auto& ch : unit) ch.unit_id = "u" + std::to_string(i);
    units.push_back(std::move(unit));
  }
  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / "data.csv");
  write_profiles_csv(csv, units);
  write_text_file((fs::path(out_dir) / "sidecar.json").string(),
                  scenario_sidecar_json(spec, n, seed, as_printed));
  std::cout << "wrote " << n << " units to " << out_dir << "/data.csv\n";
  return 0;
}

int run_fit_phase1(const std::string& data_path, const FitOptions& fit, uint64_t seed,
                   const std::string& out_path) {
  BasisSystem basis = build_basis(fit.order, fit.n_basis);
  GramMatrices grams = gram_matrices(basis, 2);
  IngestReport report;
  auto units = ingest_csv_file(data_path, IngestOptions{basis.order}, &report);
  auto sample = smooth_units(units, basis, grams);
  MFPCAModel model = fit_mfpca(sample, basis, grams, fit.threshold);
  write_text_file(out_path, serialize_mfpca(model, seed));
  std::cout << "fitted MFPCA on " << report.units << " units (" << report.channels
            << " channels); L = " << model.L << "\n";
  return 0;
}

int run_design_chart(const std::string& data_path, const FitOptions& fit, double lambda,
                     double k, bool eta2_variant, bool optimize, double arl0, int n_seq,
                     int n_obs, double train_frac, uint64_t seed, const std::string& out_path) {
  BasisSystem basis = build_basis(fit.order, fit.n_basis);
  GramMatrices grams = gram_matrices(basis, 2);
  auto units = ingest_csv_file(data_path, IngestOptions{basis.order}, nullptr);
  auto sample = smooth_units(units, basis, grams);
  if (sample.size() < 4) throw std::runtime_error("design-chart: need at least 4 units");

  std::vector<int> order(sample.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  auto rng = unit_rng(seed, 0xD5161);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_train = std::max<int>(2, static_cast<int>(train_frac * sample.size()));

  Matrix mean = Matrix::Zero(sample.front().coef.rows(), basis.num_basis());
  for (int i = 0; i < n_train; ++i) mean += sample[order[i]].coef;
  mean /= n_train;

  std::vector<CoefficientProfile> train_c, tune_c, all_c;
  for (size_t i = 0; i < order.size(); ++i) {
    CoefficientProfile c = sample[order[i]];
    c.coef -= mean;
    (static_cast<int>(i) < n_train ? train_c : tune_c).push_back(c);
    all_c.push_back(std::move(c));
  }
  if (tune_c.size() < 2) throw std::runtime_error("design-chart: tuning split too small");

  Matrix sigma_coef = pointwise_sd_coef(train_c, basis);
  auto ctx = std::make_shared<const ChartContext>(basis, sigma_coef);
  ScoreVariant variant = eta2_variant ? ScoreVariant::Eta2 : ScoreVariant::Eta1;

  ChartDesign design;
  if (optimize) {
    DefaultShifts shifts = default_shifts(all_c, basis, 100, seed + 5);
    for (const auto& w : shifts.warnings) std::cerr << "warning: " << w << "\n";
    // Half-strength small reference shift; see ExperimentConfig::opt_delta1_scale.
    shifts.delta1.delta *= 0.5;
    OptimizeOptions opt;
    opt.arl0 = arl0;
    opt.n_seq = n_seq;
    opt.n_obs = n_obs;
    opt.variant = variant;
    ThetaOptimum best = optimize_theta(default_theta_grid(), sigma_coef, train_c, tune_c,
                                       basis, grams, shifts.delta1, shifts.delta2, opt, seed);
    for (const auto& w : best.warnings) std::cerr << "warning: " << w << "\n";
    design.params = ScoreParams{best.theta.lambda, best.theta.k, variant, sigma_coef};
    design.v2model = best.v2model;
    design.h = best.h;
    design.arl0 = arl0;
    design.meta = CalibrationMeta{n_seq, n_obs, seed};
    std::cout << "optimized theta: lambda = " << best.theta.lambda << ", k = " << best.theta.k
              << "\n";
  } else {
    ScoreParams params{lambda, k, variant, sigma_coef};
    V2Model v2m = estimate_v2_model(params, *ctx, train_c, basis, grams, fit.threshold, 50,
                                    100, 50, seed + 1);
    design = calibrate_h(params, v2m, ctx, tune_c, arl0, n_seq, n_obs, seed + 2);
  }
  design.center_coef = mean;
  write_text_file(out_path, serialize_design(design));
  std::cout << "control limit h = " << design.h << "\n";
  return 0;
}

int run_monitor(const std::string& design_path, const std::string& data_path,
                const std::string& out_path) {
  ChartDesign design = deserialize_design(read_text_file(design_path));
  const BasisSystem& basis = design.v2model.model.basis;
  GramMatrices grams = design.v2model.model.grams;
  auto units = ingest_csv_file(data_path, IngestOptions{basis.order}, nullptr);
  auto sample = smooth_units(units, basis, grams);

  auto ctx = std::make_shared<const ChartContext>(basis, design.params.sigma_coef);
  AmfewmaMonitor monitor(design.params, ctx, design.v2model);

  std::ostringstream os;
  os << "n,unit_id,v2,h,alarm\n";
  os.precision(10);
  int n = 0;
  int alarms = 0;
  for (auto& x : sample) {
    if (design.center_coef.size() > 0) x.coef -= design.center_coef;
    double v = monitor.step(x);
    bool alarm = v > design.h;
    alarms += alarm;
    os << ++n << "," << x.unit_id << "," << v << "," << design.h << "," << (alarm ? 1 : 0)
       << "\n";
  }
  write_text_file(out_path, os.str());
  std::cout << "monitored " << n << " observations, " << alarms << " alarms\n";
  return 0;
}

int run_evaluate_arl(const std::string& design_path, std::optional<int> scenario,
                     std::optional<int> sl, const std::string& pool_path, int n_seq, int n_obs,
                     int shift_location, uint64_t seed, const std::string& out_path) {
  ChartDesign design = deserialize_design(read_text_file(design_path));
  const BasisSystem& basis = design.v2model.model.basis;
  GramMatrices grams = design.v2model.model.grams;
  auto ctx = std::make_shared<const ChartContext>(basis, design.params.sigma_coef);
  AmfewmaMonitor monitor(design.params, ctx, design.v2model);

  RunLengthStats stats;
  if (!pool_path.empty()) {
    auto units = ingest_csv_file(pool_path, IngestOptions{basis.order}, nullptr);
    auto pool = smooth_units(units, basis, grams);
    if (design.center_coef.size() > 0)
      for (auto& x : pool) x.coef -= design.center_coef;
    stats = estimate_arl(monitor, pool, design.h, n_seq, n_obs, seed);
  } else if (scenario && sl) {
    GeneratorModel generator = build_generator();
    SmootherCache smoother(generator.obs_grid, basis, grams, default_lambda_grid());
    ScenarioSpec ic = scenario_table(*scenario, 0);
    ScenarioSpec oc = scenario_table(*scenario, *sl);
    auto draw = [&](int s, int n) {
      auto rng = unit_rng(seed, static_cast<uint64_t>(s) * 100000ULL + n);
      auto unit = draw_unit(generator, n < shift_location ? ic : oc, rng);
      CoefficientProfile prof = smoother.smooth(unit);
      if (design.center_coef.size() > 0) prof.coef -= design.center_coef;
      return prof;
    };
    ShiftSpec convention;
    convention.delta = Matrix::Zero(design.v2model.model.p, basis.num_basis());
    convention.n0 = shift_location;
    stats = estimate_arl_generated(monitor, draw, design.h, n_seq, n_obs, convention);
  } else {
    throw std::runtime_error("evaluate-arl: give either --pool or --scenario with --sl");
  }

  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = "run-length-stats";
  j["seed"] = seed;
  j["arl"] = stats.arl;
  j["se"] = stats.se;
  j["n_censored"] = stats.n_censored;
  j["run_lengths"] = stats.run_lengths;
  write_text_file(out_path, j.dump(2));
  std::cout << "ARL = " << stats.arl << " (se " << stats.se << ", " << stats.n_censored
            << " censored)\n";
  return 0;
}

int run_run_experiment(const std::string& config_path, uint64_t seed,
                       const std::string& out_dir) {
  nlohmann::json j = nlohmann::json::parse(read_text_file(config_path));
  ExperimentConfig config = parse_experiment_config(j);
  config.seed = seed;
  ResultTable table = run_experiment(config);
  fs::create_directories(out_dir);
  write_text_file((fs::path(out_dir) / "results.csv").string(), result_table_csv(table));
  nlohmann::json out;
  out["format_version"] = 1;
  out["kind"] = "result-table";
  out["seed"] = seed;
  for (const auto& [key, value] : table.rmi)
    out["rmi"].push_back({{"chart", key.first}, {"scenario", key.second}, {"rmi", value}});
  out["warnings"] = table.warnings;
  write_text_file((fs::path(out_dir) / "results.json").string(), out.dump(2));
  for (const auto& w : table.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "wrote " << table.cells.size() << " result rows to " << out_dir << "\n";
  return 0;
}

int run_compute_rmi(const std::string& table_path, bool no_normalize,
                    const std::string& out_path) {
  ResultTable table = result_table_from_csv(read_text_file(table_path));
  std::map<int, std::map<std::string, std::vector<double>>> by_scenario;
  std::map<int, std::map<std::string, std::map<int, double>>> cells;
  for (const auto& c : table.cells)
    if (c.severity >= 1) cells[c.scenario][c.chart][c.severity] = c.arl;
  std::ostringstream os;
  os << "chart,scenario,rmi\n";
  os.precision(10);
  for (const auto& [scenario, charts] : cells) {
    std::map<std::string, std::vector<double>> arls;
    for (const auto& [name, by_sl] : charts)
      for (const auto& [sl, arl] : by_sl) arls[name].push_back(arl);
    for (const auto& [name, rmi] : compute_rmi(arls, !no_normalize))
      os << name << "," << scenario << "," << rmi << "\n";
  }
  write_text_file(out_path, os.str());
  std::cout << "wrote RMI table to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive multivariate functional EWMA control charting"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = auto)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate synthetic scenario data");
  int scenario = 1, sl = 0, n = 100;
  uint64_t seed = 0;
  std::string out_dir = "out", out_path = "out.json", data_path, design_path, config_path;
  bool as_printed = false;
  sim->add_option("--scenario", scenario)->required();
  sim->add_option("--sl", sl)->required();
  sim->add_option("--n", n)->required();
  // randomized subcommands refuse to run without an explicit seed
  auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", seed)->required(); };
  add_seed(sim);
  sim->add_option("--out", out_dir);
  sim->add_flag("--as-printed", as_printed, "use the literal printed peak-shift contamination (discontinuous warp and warped-mean difference)");

  // fit-phase1
  auto* fitcmd = app.add_subcommand("fit-phase1", "smooth a CSV sample and fit MFPCA");
  FitOptions fit;
  fitcmd->add_option("--data", data_path)->required();
  fitcmd->add_option("--order", fit.order);
  fitcmd->add_option("--n-basis", fit.n_basis);
  fitcmd->add_option("--threshold", fit.threshold);
  add_seed(fitcmd);
  fitcmd->add_option("--out", out_path);

  // design-chart
  auto* design = app.add_subcommand("design-chart", "calibrate an adaptive chart design");
  double lambda = 0.2, k = 3.0, arl0 = 20.0, train_frac = 0.6;
  int n_seq = 200, n_obs = 150, shift_location = 100;
  bool optimize = false, eta2_variant = false, no_normalize = false;
  design->add_option("--data", data_path)->required();
  design->add_option("--order", fit.order);
  design->add_option("--n-basis", fit.n_basis);
  design->add_option("--threshold", fit.threshold);
  design->add_option("--lambda", lambda);
  design->add_option("--k", k);
  design->add_flag("--eta2", eta2_variant, "use the smooth score function");
  design->add_flag("--optimize", optimize, "grid-optimize (lambda, k)");
  design->add_option("--arl0", arl0);
  design->add_option("--n-seq", n_seq);
  design->add_option("--n-obs", n_obs);
  design->add_option("--train-frac", train_frac);
  add_seed(design);
  design->add_option("--out", out_path);

  // monitor
  auto* mon = app.add_subcommand("monitor", "run a design over a CSV stream");
  mon->add_option("--design", design_path)->required();
  mon->add_option("--data", data_path)->required();
  mon->add_option("--out", out_path);

  // evaluate-arl
  auto* eval = app.add_subcommand("evaluate-arl", "run-length simulation for a design");
  std::string pool_path;
  std::optional<int> eval_scenario, eval_sl;
  int tmp_scenario = -1, tmp_sl = -1;
  eval->add_option("--design", design_path)->required();
  eval->add_option("--scenario", tmp_scenario);
  eval->add_option("--sl", tmp_sl);
  eval->add_option("--pool", pool_path);
  eval->add_option("--n-seq", n_seq);
  eval->add_option("--n-obs", n_obs);
  eval->add_option("--shift-location", shift_location);
  add_seed(eval);
  eval->add_option("--out", out_path);

  // run-experiment
  auto* runexp = app.add_subcommand("run-experiment", "full scenario/severity study");
  runexp->add_option("--config", config_path)->required();
  add_seed(runexp);
  runexp->add_option("--out", out_dir);

  // compute-rmi
  auto* rmi = app.add_subcommand("compute-rmi", "relative mean index from a result table");
  std::string table_path;
  rmi->add_option("--table", table_path)->required();
  rmi->add_flag("--no-normalize", no_normalize,
                "report the unnormalized sum over severity levels");
  rmi->add_option("--out", out_path);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return run_simulate(scenario, sl, n, seed, out_dir, as_printed);
    if (fitcmd->parsed()) return run_fit_phase1(data_path, fit, seed, out_path);
    if (design->parsed())
      return run_design_chart(data_path, fit, lambda, k, eta2_variant, optimize, arl0, n_seq,
                              n_obs, train_frac, seed, out_path);
    if (mon->parsed()) return run_monitor(design_path, data_path, out_path);
    if (eval->parsed()) {
      if (tmp_scenario >= 0) eval_scenario = tmp_scenario;
      if (tmp_sl >= 0) eval_sl = tmp_sl;
      return run_evaluate_arl(design_path, eval_scenario, eval_sl, pool_path, n_seq, n_obs,
                              shift_location, seed, out_path);
    }
    if (runexp->parsed()) return run_run_experiment(config_path, seed, out_dir);
    if (rmi->parsed()) return run_compute_rmi(table_path, no_normalize, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
