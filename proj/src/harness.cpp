#include "amfewma/harness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace amfewma {

std::string ChartSpecEntry::name() const {
  std::ostringstream os;
  switch (kind) {
    case ChartKind::Shewhart:
      return "SHEWHART";
    case ChartKind::Mfewma:
      os << "MFEWMA(" << lambda << ")";
      return os.str();
    case ChartKind::Amfewma:
      os << "AMFEWMA(" << lambda << "," << k << ")";
      return os.str();
    case ChartKind::AmfewmaOptimal:
      return "AMFEWMA*";
  }
  return "?";
}

std::vector<ThetaCandidate> default_theta_grid() {
  std::vector<ThetaCandidate> grid;
  for (double lambda : {0.1, 0.2, 0.3, 0.5, 0.7, 1.0})
    for (double k : {1.0, 2.0, 3.0, 4.0, 5.0}) grid.push_back({lambda, k});
  return grid;
}

V2Model estimate_v2_model_mfewma(double lambda, const std::vector<CoefficientProfile>& training_pool,
                                 const BasisSystem& basis, const GramMatrices& grams,
                                 double variance_threshold, int n_seq, int n_obs, int burn_in,
                                 uint64_t seed) {
  if (training_pool.empty())
    throw std::invalid_argument("estimate_v2_model_mfewma: empty training pool");
  auto sequences = bootstrap_sequences(training_pool.size(), n_seq, n_obs, seed);
  const int p = static_cast<int>(training_pool.front().coef.rows());
  const int K = basis.num_basis();
  Vector lambdas = Vector::Constant(p, lambda);
  std::vector<CoefficientProfile> pooled;
  pooled.reserve(static_cast<size_t>(n_seq) * (n_obs - burn_in));
  for (int s = 0; s < n_seq; ++s) {
    ChartState state = make_chart_state(p, K);
    for (int n = 0; n < n_obs; ++n) {
      state = mfewma_step(state, training_pool[sequences[s][n]], lambdas);
      if (n >= burn_in) pooled.push_back(CoefficientProfile{"", state.coef});
    }
  }
  return fit_v2_model(pooled, basis, grams, variance_threshold);
}

std::map<std::string, double> compute_rmi(
    const std::map<std::string, std::vector<double>>& arls_by_chart, bool normalize) {
  if (arls_by_chart.empty()) throw std::invalid_argument("compute_rmi: no charts");
  const size_t n_sl = arls_by_chart.begin()->second.size();
  for (const auto& [name, arls] : arls_by_chart)
    if (arls.size() != n_sl)
      throw std::invalid_argument("compute_rmi: chart " + name + " is missing cells");

  std::vector<double> row_min(n_sl, std::numeric_limits<double>::infinity());
  for (const auto& [name, arls] : arls_by_chart)
    for (size_t s = 0; s < n_sl; ++s) row_min[s] = std::min(row_min[s], arls[s]);

  std::map<std::string, double> out;
  for (const auto& [name, arls] : arls_by_chart) {
    double total = 0.0;
    for (size_t s = 0; s < n_sl; ++s) total += (arls[s] - row_min[s]) / row_min[s];
    out[name] = normalize ? total / static_cast<double>(n_sl) : total;
  }
  return out;
}

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t z = seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xbf58476d1ce4e5b9ULL) ^
               (c * 0x94d049bb133111ebULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double pos = q * (v.size() - 1);
  size_t lo = static_cast<size_t>(pos);
  size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

struct BuiltChart {
  ChartSpecEntry spec;
  std::unique_ptr<Monitor> monitor;
  double h = 0.0;
  double arl_ic_calibration = 0.0;
};

}  // namespace

ResultTable run_experiment(const ExperimentConfig& config) {
  if (config.roster.empty()) throw std::invalid_argument("run_experiment: empty chart roster");
  if (config.train_size + config.tune_size != config.phase1_total)
    throw std::invalid_argument("run_experiment: train + tune must equal the Phase I total");
  if (config.n_runs < 1) throw std::invalid_argument("run_experiment: n_runs must be >= 1");
  if (config.shift_location < 1 || config.shift_location > config.phase2_n_obs)
    throw std::invalid_argument("run_experiment: shift location outside Phase II sequences");

  ResultTable table;
  GeneratorModel generator = build_generator();
  BasisSystem basis = build_basis(config.basis_order, config.n_basis);
  GramMatrices grams = gram_matrices(basis, 2);
  SmootherCache smoother(generator.obs_grid, basis, grams, default_lambda_grid());
  auto theta_grid = config.theta_grid.empty() ? default_theta_grid() : config.theta_grid;

  // accumulated per (chart, scenario, SL): per-run ARLs and pooled RLs
  std::map<std::tuple<std::string, int, int>, std::vector<double>> run_arls;
  std::map<std::tuple<std::string, int, int>, std::vector<double>> pooled_rls;

  for (int run = 0; run < config.n_runs; ++run) {
    const uint64_t run_seed = mix_seed(config.seed, run + 1, 0, 0);

    // --- Phase I: generate, smooth, split, center ---
    ScenarioSpec ic = scenario_table(1, 0);
    std::vector<CoefficientProfile> phase1;
    phase1.reserve(config.phase1_total);
    for (int i = 0; i < config.phase1_total; ++i) {
      auto rng = unit_rng(run_seed, static_cast<uint64_t>(i));
      auto unit = draw_unit(generator, ic, rng);
      CoefficientProfile prof = smoother.smooth(unit);
      prof.unit_id = "p1-" + std::to_string(i);
      phase1.push_back(std::move(prof));
    }
    std::vector<int> order(config.phase1_total);
    for (int i = 0; i < config.phase1_total; ++i) order[i] = i;
    {
      auto rng = unit_rng(run_seed, 0xC0FFEEULL);
      std::shuffle(order.begin(), order.end(), rng);
    }
    Matrix center_mean = Matrix::Zero(generator.p, basis.num_basis());
    for (int i = 0; i < config.phase1_total; ++i) center_mean += phase1[order[i]].coef;
    center_mean /= static_cast<double>(config.phase1_total);

    std::vector<CoefficientProfile> train_c, tune_c, phase1_c;
    for (int i = 0; i < config.phase1_total; ++i) {
      CoefficientProfile c = phase1[order[i]];
      c.coef -= center_mean;
      if (i < config.train_size)
        train_c.push_back(c);
      else
        tune_c.push_back(c);
      phase1_c.push_back(std::move(c));
    }

    Matrix sigma_coef = pointwise_sd_coef(train_c, basis, config.grid_size);
    auto ctx = std::make_shared<const ChartContext>(basis, sigma_coef, config.grid_size);

    // --- Build and calibrate every chart on this run's Phase I ---
    std::vector<BuiltChart> charts;
    for (size_t ci = 0; ci < config.roster.size(); ++ci) {
      const ChartSpecEntry& spec = config.roster[ci];
      const uint64_t chart_seed = mix_seed(run_seed, 7, ci + 1, 0);
      BuiltChart built;
      built.spec = spec;
      switch (spec.kind) {
        case ChartKind::Shewhart: {
          MFPCAModel model = fit_mfpca(train_c, basis, grams, config.variance_threshold);
          built.monitor = std::make_unique<ShewhartMonitor>(std::move(model));
          break;
        }
        case ChartKind::Mfewma: {
          V2Model v2m = estimate_v2_model_mfewma(spec.lambda, train_c, basis, grams,
                                                 config.variance_threshold, config.v2_n_seq,
                                                 config.v2_n_obs, config.v2_burn_in, chart_seed);
          built.monitor = std::make_unique<MfewmaMonitor>(spec.lambda, std::move(v2m));
          break;
        }
        case ChartKind::Amfewma: {
          ScoreParams params{spec.lambda, spec.k, spec.variant, sigma_coef};
          V2Model v2m = estimate_v2_model(params, *ctx, train_c, basis, grams,
                                          config.variance_threshold, config.v2_n_seq,
                                          config.v2_n_obs, config.v2_burn_in, chart_seed);
          built.monitor = std::make_unique<AmfewmaMonitor>(params, ctx, std::move(v2m));
          break;
        }
        case ChartKind::AmfewmaOptimal: {
          DefaultShifts shifts =
              default_shifts(phase1_c, basis, 100, mix_seed(run_seed, 11, ci, 0), config.grid_size);
          for (const auto& w : shifts.warnings) table.warnings.push_back(w);
          shifts.delta1.delta *= config.opt_delta1_scale;
          OptimizeOptions opt;
          opt.epsilon = config.epsilon;
          opt.arl0 = config.arl0;
          opt.variance_threshold = config.variance_threshold;
          opt.n_seq = config.n_seq;
          opt.n_obs = config.n_obs;
          opt.v2_n_seq = config.v2_n_seq;
          opt.v2_n_obs = config.v2_n_obs;
          opt.v2_burn_in = config.v2_burn_in;
          opt.variant = spec.variant;
          opt.grid_size = config.grid_size;
          ThetaOptimum best = optimize_theta(theta_grid, sigma_coef, train_c, tune_c, basis,
                                             grams, shifts.delta1, shifts.delta2, opt, chart_seed);
          for (const auto& w : best.warnings) table.warnings.push_back(w);
          ScoreParams params{best.theta.lambda, best.theta.k, spec.variant, sigma_coef};
          built.monitor = std::make_unique<AmfewmaMonitor>(params, ctx, best.v2model);
          built.h = best.h;
          break;
        }
      }
      if (spec.kind != ChartKind::AmfewmaOptimal) {
        Matrix traj = v2_trajectories(*built.monitor, tune_c, config.n_seq, config.n_obs,
                                      mix_seed(run_seed, 13, ci + 1, 0));
        built.h = control_limit_for(traj, config.arl0);
        built.arl_ic_calibration = run_lengths_at(traj, built.h).arl;
      }
      charts.push_back(std::move(built));
    }

    // --- Phase II cells, paired across charts ---
    for (int scenario : config.scenarios) {
      for (int sl : config.severity_levels) {
        const ScenarioSpec oc = scenario_table(scenario, sl);
        const uint64_t cell_seed = mix_seed(run_seed, 17, scenario, sl);
        const int n0 = config.shift_location;

        std::vector<std::vector<CoefficientProfile>> sequences(config.phase2_n_seq);
        for (int s = 0; s < config.phase2_n_seq; ++s) {
          sequences[s].reserve(config.phase2_n_obs);
          for (int n = 1; n <= config.phase2_n_obs; ++n) {
            auto rng = unit_rng(cell_seed, static_cast<uint64_t>(s) * 100000ULL + n);
            auto unit = draw_unit(generator, n < n0 ? ic : oc, rng);
            CoefficientProfile prof = smoother.smooth(unit);
            prof.coef -= center_mean;
            sequences[s].push_back(std::move(prof));
          }
        }
        auto draw = [&](int s, int n) -> CoefficientProfile { return sequences[s][n - 1]; };

        for (auto& built : charts) {
          ShiftSpec convention;  // shift already baked into the data
          convention.delta = Matrix::Zero(generator.p, basis.num_basis());
          convention.n0 = n0;
          RunLengthStats stats = estimate_arl_generated(*built.monitor, draw, built.h,
                                                        config.phase2_n_seq,
                                                        config.phase2_n_obs, convention);
          if (stats.n_censored > config.phase2_n_seq / 100)
            table.warnings.push_back("run " + std::to_string(run) + " " + built.spec.name() +
                                     " scenario " + std::to_string(scenario) + " SL " +
                                     std::to_string(sl) + ": " +
                                     std::to_string(stats.n_censored) + " censored sequences");
          auto key = std::make_tuple(built.spec.name(), scenario, sl);
          run_arls[key].push_back(stats.arl);
          for (int rl : stats.run_lengths) pooled_rls[key].push_back(rl);
        }
      }
    }
  }

  // --- Averages over runs, quantiles over pooled run lengths ---
  for (const auto& [key, arls] : run_arls) {
    ResultCell cell;
    cell.chart = std::get<0>(key);
    cell.scenario = std::get<1>(key);
    cell.severity = std::get<2>(key);
    double mean = 0.0;
    for (double a : arls) mean += a;
    mean /= arls.size();
    double var = 0.0;
    for (double a : arls) var += (a - mean) * (a - mean);
    cell.arl = mean;
    cell.se = arls.size() > 1 ? std::sqrt(var / (arls.size() - 1) / arls.size()) : 0.0;
    const auto& rls = pooled_rls[key];
    cell.rl_median = quantile(rls, 0.5);
    cell.rl_p90 = quantile(rls, 0.9);
    table.cells.push_back(cell);
  }

  // --- RMI per (chart, scenario) over SL >= 1 ---
  for (int scenario : config.scenarios) {
    std::map<std::string, std::vector<double>> arls_by_chart;
    for (const auto& spec : config.roster) {
      std::vector<double> arls;
      for (int sl : config.severity_levels) {
        if (sl == 0) continue;
        auto key = std::make_tuple(spec.name(), scenario, sl);
        auto it = run_arls.find(key);
        if (it == run_arls.end()) continue;
        double mean = 0.0;
        for (double a : it->second) mean += a;
        arls.push_back(mean / it->second.size());
      }
      if (!arls.empty()) arls_by_chart[spec.name()] = arls;
    }
    if (arls_by_chart.empty()) continue;
    for (const auto& [name, rmi] : compute_rmi(arls_by_chart, true))
      table.rmi[{name, scenario}] = rmi;
  }
  return table;
}

std::string result_table_csv(const ResultTable& table) {
  std::ostringstream os;
  os << "chart,scenario,severity,arl,se,rl_median,rl_p90\n";
  os.precision(10);
  for (const auto& c : table.cells)
    os << c.chart << "," << c.scenario << "," << c.severity << "," << c.arl << "," << c.se
       << "," << c.rl_median << "," << c.rl_p90 << "\n";
  return os.str();
}

ResultTable result_table_from_csv(const std::string& csv_text) {
  ResultTable table;
  std::istringstream is(csv_text);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("result_table_from_csv: empty input");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ResultCell cell;
    std::string field;
    std::getline(ls, cell.chart, ',');
    std::getline(ls, field, ',');
    cell.scenario = std::stoi(field);
    std::getline(ls, field, ',');
    cell.severity = std::stoi(field);
    std::getline(ls, field, ',');
    cell.arl = std::stod(field);
    if (std::getline(ls, field, ',')) cell.se = std::stod(field);
    if (std::getline(ls, field, ',')) cell.rl_median = std::stod(field);
    if (std::getline(ls, field, ',')) cell.rl_p90 = std::stod(field);
    table.cells.push_back(cell);
  }
  return table;
}

}  // namespace amfewma
