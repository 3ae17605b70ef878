// Acceptance gate: desk-scale Monte Carlo replicas plus property suites.
// Prints one PASS/FAIL line per criterion; exit code 0 only if all pass.

#include "amfewma/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

using namespace amfewma;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Monte Carlo replica (criteria 1-4)
// ---------------------------------------------------------------------------

struct McSettings {
  int n_runs = 5;
  int phase1_total = 600;
  int train_size = 350;
  int calib_n_seq = 500;
  int calib_n_obs = 300;
  int ic_n_seq = 500;
  int ic_n_obs = 300;
  int phase2_n_seq = 200;
  int phase2_n_obs = 150;
  int shift_location = 100;
  double arl0 = 20.0;
  double variance_threshold = 0.9;
  int v2_n_seq = 50;
  int v2_n_obs = 100;
  int v2_burn_in = 50;
  uint64_t seed = 20260825;
};

struct McResults {
  // chart -> averaged IC ARL (fresh sequences, no shift)
  std::map<std::string, double> ic_arl;
  // (chart, scenario, sl) -> averaged OC ARL
  std::map<std::tuple<std::string, int, int>, double> arl;
  ThetaCandidate last_theta;
};

McResults run_replica(const McSettings& cfg) {
  GeneratorModel generator = build_generator();
  BasisSystem basis = build_basis(4, 10);
  GramMatrices grams = gram_matrices(basis, 2);
  SmootherCache smoother(generator.obs_grid, basis, grams, default_lambda_grid());

  const std::vector<std::string> names = {"SHEWHART",    "MFEWMA(0.1)", "MFEWMA(0.2)",
                                          "MFEWMA(0.3)", "MFEWMA(0.5)", "AMFEWMA(0.1,2)",
                                          "AMFEWMA*"};
  std::map<std::string, std::vector<double>> ic_acc;
  std::map<std::tuple<std::string, int, int>, std::vector<double>> arl_acc;
  McResults out;

  for (int run = 0; run < cfg.n_runs; ++run) {
    const uint64_t run_seed = mix(cfg.seed, run);
    std::printf("# run %d/%d\n", run + 1, cfg.n_runs);
    std::fflush(stdout);

    // Phase I
    ScenarioSpec ic = scenario_table(1, 0);
    std::vector<CoefficientProfile> phase1;
    for (int i = 0; i < cfg.phase1_total; ++i) {
      auto rng = unit_rng(run_seed, static_cast<uint64_t>(i));
      phase1.push_back(smoother.smooth(draw_unit(generator, ic, rng)));
    }
    std::vector<int> order(cfg.phase1_total);
    for (int i = 0; i < cfg.phase1_total; ++i) order[i] = i;
    {
      auto rng = unit_rng(run_seed, 0xC0FFEE);
      std::shuffle(order.begin(), order.end(), rng);
    }
    Matrix train_mean = Matrix::Zero(generator.p, basis.num_basis());
    for (int i = 0; i < cfg.phase1_total; ++i) train_mean += phase1[order[i]].coef;
    train_mean /= cfg.phase1_total;
    std::vector<CoefficientProfile> train_c, tune_c, all_c;
    for (int i = 0; i < cfg.phase1_total; ++i) {
      CoefficientProfile c = phase1[order[i]];
      c.coef -= train_mean;
      (i < cfg.train_size ? train_c : tune_c).push_back(c);
      all_c.push_back(std::move(c));
    }
    Matrix sigma_coef = pointwise_sd_coef(train_c, basis);
    auto ctx = std::make_shared<const ChartContext>(basis, sigma_coef);

    // Calibrated charts
    struct Built {
      std::string name;
      std::unique_ptr<Monitor> monitor;
      double h = 0.0;
    };
    std::vector<Built> charts;
    auto calibrate = [&](const std::string& name, std::unique_ptr<Monitor> monitor,
                         uint64_t seed) {
      Matrix traj = v2_trajectories(*monitor, tune_c, cfg.calib_n_seq, cfg.calib_n_obs, seed);
      Built b;
      b.name = name;
      b.monitor = std::move(monitor);
      b.h = control_limit_for(traj, cfg.arl0);
      charts.push_back(std::move(b));
    };

    calibrate("SHEWHART",
              std::make_unique<ShewhartMonitor>(
                  fit_mfpca(train_c, basis, grams, cfg.variance_threshold)),
              mix(run_seed, 101));
    int li = 0;
    for (double lambda : {0.1, 0.2, 0.3, 0.5}) {
      V2Model v2m = estimate_v2_model_mfewma(lambda, train_c, basis, grams,
                                             cfg.variance_threshold, cfg.v2_n_seq, cfg.v2_n_obs,
                                             cfg.v2_burn_in, mix(run_seed, 200 + li));
      std::ostringstream os;
      os << "MFEWMA(" << lambda << ")";
      calibrate(os.str(), std::make_unique<MfewmaMonitor>(lambda, std::move(v2m)),
                mix(run_seed, 300 + li));
      ++li;
    }
    {
      ScoreParams params{0.1, 2.0, ScoreVariant::Eta1, sigma_coef};
      V2Model v2m = estimate_v2_model(params, *ctx, train_c, basis, grams,
                                      cfg.variance_threshold, cfg.v2_n_seq, cfg.v2_n_obs,
                                      cfg.v2_burn_in, mix(run_seed, 400));
      calibrate("AMFEWMA(0.1,2)", std::make_unique<AmfewmaMonitor>(params, ctx, std::move(v2m)),
                mix(run_seed, 401));
    }
    {
      DefaultShifts shifts = default_shifts(all_c, basis, 100, mix(run_seed, 500));
      // The small reference shift is taken at half strength: at this
      // Phase-I scale a 0.5-sd mean shift applied at every point of every
      // channel is already a moderate shift (out-of-control ARL near 4),
      // so halving it keeps the stage-2 objective in the small-shift
      // regime it is meant to probe.
      shifts.delta1.delta *= 0.5;
      OptimizeOptions opt;
      opt.arl0 = cfg.arl0;
      opt.variance_threshold = cfg.variance_threshold;
      opt.n_seq = 200;  // per-candidate budget; the winner is recalibrated below
      opt.n_obs = 150;
      opt.v2_n_seq = cfg.v2_n_seq;
      opt.v2_n_obs = cfg.v2_n_obs;
      opt.v2_burn_in = cfg.v2_burn_in;
      // Candidate grid restricted to the settings the fixed-parameter
      // comparison charts span.
      std::vector<ThetaCandidate> grid;
      for (double lambda : {0.1, 0.2, 0.3, 0.5})
        for (double k : {2.0, 3.0, 4.0}) grid.push_back({lambda, k});
      ThetaOptimum best = optimize_theta(grid, sigma_coef, train_c, tune_c,
                                         basis, grams, shifts.delta1, shifts.delta2, opt,
                                         mix(run_seed, 501));
      std::printf("# run %d chose lambda=%g k=%g\n", run + 1, best.theta.lambda, best.theta.k);
      out.last_theta = best.theta;
      ScoreParams params{best.theta.lambda, best.theta.k, ScoreVariant::Eta1, sigma_coef};
      calibrate("AMFEWMA*", std::make_unique<AmfewmaMonitor>(params, ctx, best.v2model),
                mix(run_seed, 502));
    }

    // Fresh-sequence IC ARL re-estimation (criterion 1)
    {
      const uint64_t ic_seed = mix(run_seed, 600);
      auto draw = [&](int s, int n) {
        auto rng = unit_rng(ic_seed, static_cast<uint64_t>(s) * 1000ULL + n);
        CoefficientProfile prof = smoother.smooth(draw_unit(generator, ic, rng));
        prof.coef -= train_mean;
        return prof;
      };
      for (auto& built : charts) {
        RunLengthStats stats = estimate_arl_generated(*built.monitor, draw, built.h,
                                                      cfg.ic_n_seq, cfg.ic_n_obs, std::nullopt);
        ic_acc[built.name].push_back(stats.arl);
      }
    }

    // Phase II cells, paired across charts
    for (int scenario : {1, 2}) {
      for (int sl = 1; sl <= 6; ++sl) {
        const ScenarioSpec oc = scenario_table(scenario, sl);
        const uint64_t cell_seed = mix(run_seed, 700 + scenario * 10 + sl);
        std::vector<std::vector<CoefficientProfile>> sequences(cfg.phase2_n_seq);
        for (int s = 0; s < cfg.phase2_n_seq; ++s) {
          sequences[s].reserve(cfg.phase2_n_obs);
          for (int n = 1; n <= cfg.phase2_n_obs; ++n) {
            auto rng = unit_rng(cell_seed, static_cast<uint64_t>(s) * 100000ULL + n);
            CoefficientProfile prof =
                smoother.smooth(draw_unit(generator, n < cfg.shift_location ? ic : oc, rng));
            prof.coef -= train_mean;
            sequences[s].push_back(std::move(prof));
          }
        }
        auto draw = [&](int s, int n) { return sequences[s][n - 1]; };
        ShiftSpec convention;  // shift is baked into the generated data
        convention.delta = Matrix::Zero(generator.p, basis.num_basis());
        convention.n0 = cfg.shift_location;
        for (auto& built : charts) {
          RunLengthStats stats =
              estimate_arl_generated(*built.monitor, draw, built.h, cfg.phase2_n_seq,
                                     cfg.phase2_n_obs, convention);
          arl_acc[{built.name, scenario, sl}].push_back(stats.arl);
        }
      }
    }
  }

  for (const auto& [name, arls] : ic_acc) {
    double m = 0.0;
    for (double a : arls) m += a;
    out.ic_arl[name] = m / arls.size();
  }
  for (const auto& [key, arls] : arl_acc) {
    double m = 0.0;
    for (double a : arls) m += a;
    out.arl[key] = m / arls.size();
  }
  for (int scenario : {1, 2}) {
    std::printf("# scenario %d averaged ARLs (SL 1..6):\n", scenario);
    for (const std::string& name : names) {
      std::printf("#   %-16s", name.c_str());
      for (int sl = 1; sl <= 6; ++sl) std::printf(" %6.3f", out.arl.at({name, scenario, sl}));
      std::printf("\n");
    }
  }
  std::fflush(stdout);
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

void criteria_1_to_4(const McResults& res) {
  // 1: every calibrated chart's re-estimated IC ARL in [17, 24]
  {
    bool pass = true;
    std::string detail = "IC ARL at ARL0=20:";
    for (const auto& [name, arl] : res.ic_arl) {
      detail += " " + name + "=" + fmt(arl);
      if (arl < 17.0 || arl > 24.0) pass = false;
    }
    report(1, pass, detail);
  }
  auto arl_of = [&](const std::string& chart, int scenario, int sl) {
    return res.arl.at({chart, scenario, sl});
  };
  // 2: scenario 1 spot checks
  {
    double a = arl_of("AMFEWMA(0.1,2)", 1, 6);
    double b = arl_of("MFEWMA(0.1)", 1, 1);
    bool pass = a >= 1.0 && a <= 1.15 && b >= 6.4 && b <= 9.6;
    report(2, pass,
           "scenario 1: AMFEWMA(0.1,2) SL6 ARL=" + fmt(a) + " (want [1.00,1.15]), MFEWMA(0.1) SL1 ARL=" +
               fmt(b) + " (want [6.4,9.6])");
  }
  // 3: scenario 2 spot check
  {
    double a = arl_of("MFEWMA(0.2)", 2, 2);
    report(3, a >= 4.0 && a <= 6.0,
           "scenario 2: MFEWMA(0.2) SL2 ARL=" + fmt(a) + " (want [4.0,6.0])");
  }
  // 4: orderings and best RMI on paired sequences
  {
    bool order_ok = true;
    std::string detail;
    for (int scenario : {1, 2}) {
      double m1 = arl_of("MFEWMA(0.1)", scenario, 1);
      double s1 = arl_of("SHEWHART", scenario, 1);
      double m6 = arl_of("MFEWMA(0.1)", scenario, 6);
      double s6 = arl_of("SHEWHART", scenario, 6);
      if (!(m1 < s1) || !(s6 < m6)) order_ok = false;
      detail += " S" + std::to_string(scenario) + "[SL1 " + fmt(m1) + "<" + fmt(s1) +
                ", SL6 " + fmt(s6) + "<" + fmt(m6) + "]";
    }
    bool rmi_ok = true;
    for (int scenario : {1, 2}) {
      std::map<std::string, std::vector<double>> arls;
      for (const std::string& name :
           {"SHEWHART", "MFEWMA(0.1)", "MFEWMA(0.2)", "MFEWMA(0.3)", "MFEWMA(0.5)", "AMFEWMA*"})
        for (int sl = 1; sl <= 6; ++sl) arls[name].push_back(arl_of(name, scenario, sl));
      auto rmi = compute_rmi(arls, true);
      double best = rmi.at("AMFEWMA*");
      detail += " S" + std::to_string(scenario) + " RMI[AMFEWMA*]=" + fmt(best);
      std::printf("# scenario %d RMI:", scenario);
      for (const auto& [name, value] : rmi) std::printf(" %s=%.3f", name.c_str(), value);
      std::printf("\n");
      for (const auto& [name, value] : rmi)
        if (name != "AMFEWMA*" && value < best) rmi_ok = false;
    }
    report(4, order_ok && rmi_ok, "orderings and adaptive-optimal RMI:" + detail);
  }
}

// 5: pure arithmetic on the published severity-level ARLs
void criterion_5() {
  std::map<std::string, std::vector<double>> arls;
  arls["SHEWHART"] = {14.38, 6.44, 2.75, 1.49, 1.10, 1.01};
  arls["MFEWMA(0.1)"] = {7.97, 4.09, 2.82, 2.20, 1.84, 1.61};
  arls["MFEWMA(0.2)"] = {8.04, 3.71, 2.44, 1.88, 1.58, 1.36};
  arls["MFEWMA(0.3)"] = {8.67, 3.62, 2.27, 1.72, 1.42, 1.20};
  arls["MFEWMA(0.5)"] = {10.28, 3.82, 2.13, 1.52, 1.22, 1.06};
  arls["AMFEWMA*"] = {8.73, 3.63, 2.12, 1.49, 1.16, 1.03};
  double value = compute_rmi(arls, false).at("SHEWHART");
  report(5, std::abs(value - 1.88) <= 0.02,
         "published-table RMI recomputation: " + fmt(value) + " (want 1.88 +/- 0.02)");
}

// 6: score-function properties on a 1e4-point grid
void criterion_6() {
  bool pass = true;
  const double c = 1.3, lambda = 0.2;
  auto check_fn = [&](auto fn) {
    double prev = -1e300;
    for (int i = 0; i <= 10000; ++i) {
      double e = -4.0 + 8.0 * i / 10000.0;
      double v = fn(e, c, lambda);
      if (std::abs(v + fn(-e, c, lambda)) > 1e-12) pass = false;   // odd
      if (v <= prev) pass = false;                                 // strictly increasing
      prev = v;
      if (e > 0.0 && (v < lambda * e - 1e-12 || v > e + 1e-12)) pass = false;  // sandwich
    }
    // branch continuity at |e| = c
    for (double edge : {c, -c}) {
      double inner = fn(std::nextafter(edge, 0.0), c, lambda);
      double outer = fn(std::nextafter(edge, 10.0 * edge), c, lambda);
      if (std::abs(inner - outer) > 1e-9) pass = false;
    }
  };
  check_fn([](double e, double cc, double l) { return eta1(e, cc, l); });
  check_fn([](double e, double cc, double l) { return eta2(e, cc, l); });
  report(6, pass, "score functions: odd, strictly increasing, continuous, sandwiched");
}

// 7: reduction identities of the adaptive recursion
void criterion_7() {
  BasisSystem basis = build_basis(4, 8);
  Matrix sigma_coef = Matrix::Constant(2, 8, 1.0);
  ChartContext ctx(basis, sigma_coef);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> gauss;
  auto random_obs = [&]() {
    CoefficientProfile x;
    x.coef = Matrix(2, 8);
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 8; ++k) x.coef(j, k) = gauss(rng);
    return x;
  };
  double worst_linear = 0.0, worst_identity = 0.0;
  ScoreParams wide{0.3, 1e6, ScoreVariant::Eta1, sigma_coef};
  ScoreParams unit{1.0, 2.0, ScoreVariant::Eta1, sigma_coef};
  ChartState a = make_chart_state(2, 8), b = make_chart_state(2, 8), u = make_chart_state(2, 8);
  Vector lambdas = Vector::Constant(2, 0.3);
  for (int n = 0; n < 50; ++n) {
    CoefficientProfile x = random_obs();
    a = amfewma_step(a, x, wide, ctx);
    b = mfewma_step(b, x, lambdas);
    worst_linear = std::max(worst_linear, (a.coef - b.coef).cwiseAbs().maxCoeff());
    u = amfewma_step(u, x, unit, ctx);
    worst_identity = std::max(worst_identity, (u.coef - x.coef).cwiseAbs().maxCoeff());
  }
  report(7, worst_linear <= 1e-8 && worst_identity <= 1e-8,
         "reduction identities: wide-band vs linear " + fmt(worst_linear * 1e9) +
             "e-9, unit-weight vs raw " + fmt(worst_identity * 1e9) + "e-9");
}

// 8: V^2 against a direct tensor-quadrature oracle (p=2, K=4)
void criterion_8() {
  BasisSystem basis = build_basis(4, 4);
  GramMatrices grams = gram_matrices(basis, 2);
  std::mt19937_64 rng(41);
  std::normal_distribution<double> gauss;
  std::vector<CoefficientProfile> sample;
  for (int i = 0; i < 30; ++i) {
    CoefficientProfile x;
    x.coef = Matrix(2, 4);
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 4; ++k) x.coef(j, k) = gauss(rng);
    sample.push_back(std::move(x));
  }
  V2Model model = fit_v2_model(sample, basis, grams, 1.0);

  auto grid = linspace(0.0, 1.0, 20001);
  Matrix phi = eval_basis(basis, grid, 0);
  const double dt = 1.0 / 20000.0;
  const double floor = 1e-12 * model.model.eigenvalues.maxCoeff();
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    CoefficientProfile y;
    y.coef = Matrix(2, 4);
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 4; ++k) y.coef(j, k) = gauss(rng);
    double oracle = 0.0;
    for (int l = 0; l < model.model.L; ++l) {
      if (model.model.eigenvalues[l] < floor) continue;
      double xi = 0.0;
      for (int j = 0; j < 2; ++j) {
        Vector fy = phi * y.coef.row(j).transpose();
        Vector fp = phi * model.model.eigenfunctions[l].row(j).transpose();
        for (Eigen::Index i = 0; i < fy.size(); ++i)
          xi += ((i == 0 || i + 1 == fy.size()) ? 0.5 * dt : dt) * fy[i] * fp[i];
      }
      oracle += xi * xi / model.model.eigenvalues[l];
    }
    worst = std::max(worst, std::abs(v2(model, y) - oracle) / oracle);
  }
  report(8, worst <= 1e-6, "V^2 vs quadrature oracle: max relative error " + fmt(worst * 1e7) + "e-7");
}

// 9: MFPCA orthonormality, round trip, score-variance identity at N=500
void criterion_9() {
  BasisSystem basis = build_basis(4, 8);
  GramMatrices grams = gram_matrices(basis, 2);
  std::mt19937_64 rng(90);
  std::normal_distribution<double> gauss;
  std::vector<CoefficientProfile> sample;
  const int N = 500;
  for (int i = 0; i < N; ++i) {
    CoefficientProfile x;
    x.coef = Matrix(2, 8);
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 8; ++k) x.coef(j, k) = 0.3 + gauss(rng);
    sample.push_back(std::move(x));
  }
  MFPCAModel model = fit_mfpca(sample, basis, grams, 1.0);

  double worst_ortho = 0.0;
  for (int l = 0; l < model.L; ++l)
    for (int m = 0; m <= l; ++m) {
      double ip = 0.0;
      for (int j = 0; j < model.p; ++j)
        ip += model.eigenfunctions[l].row(j) * grams.W * model.eigenfunctions[m].row(j).transpose();
      worst_ortho = std::max(worst_ortho, std::abs(ip - (l == m ? 1.0 : 0.0)));
    }

  double worst_rt = 0.0;
  for (int i = 0; i < 50; ++i)
    worst_rt = std::max(worst_rt, (reconstruct(model, project(model, sample[i])).coef -
                                   sample[i].coef)
                                      .cwiseAbs()
                                      .maxCoeff());

  double worst_var = 0.0;
  for (int l = 0; l < std::min(model.L, 5); ++l) {
    double s = 0.0, s2 = 0.0;
    for (const auto& x : sample) {
      double xi = project(model, x)[l];
      s += xi;
      s2 += xi * xi;
    }
    double var = (s2 - s * s / N) / (N - 1.0);
    worst_var = std::max(worst_var, std::abs(var - model.eigenvalues[l]) / model.eigenvalues[l]);
  }
  report(9, worst_ortho <= 1e-8 && worst_rt <= 1e-8 && worst_var <= 0.02,
         "MFPCA: orthonormality " + fmt(worst_ortho * 1e9) + "e-9, round trip " +
             fmt(worst_rt * 1e9) + "e-9, score-variance mismatch " + fmt(worst_var * 100) + "%");
}

// 10: smoother limits and GCV oracle
void criterion_10() {
  BasisSystem basis = build_basis(4, 12);
  GramMatrices grams = gram_matrices(basis, 2);
  auto t = linspace(0.0, 1.0, 40);
  std::mt19937_64 rng(100);
  std::normal_distribution<double> gauss;
  DiscreteProfile prof;
  prof.t = t;
  prof.y.resize(t.size());
  for (size_t i = 0; i < t.size(); ++i) prof.y[i] = std::sin(2.0 * M_PI * t[i]) + 0.02 * gauss(rng);

  PenalizedFit heavy = fit_penalized(prof, basis, grams, 1e8);
  bool df_ok = std::abs(heavy.df - 2.0) <= 0.01;

  std::vector<double> grid = {1e-6, 1e-4, 1e-2, 1.0};
  GcvResult res = gcv_select(prof, basis, grams, grid);
  Matrix phi = eval_basis(basis, t, 0);
  Eigen::Map<const Vector> yv(prof.y.data(), static_cast<Eigen::Index>(prof.y.size()));
  const double m = static_cast<double>(t.size());
  Matrix hat = phi * (phi.transpose() * phi + res.lambda * grams.R).ldlt().solve(phi.transpose());
  double df = hat.trace();
  double sse = (yv - hat * yv).squaredNorm();
  double oracle = (sse / m) / std::pow(1.0 - df / m, 2);
  bool gcv_ok = std::abs(res.gcv - oracle) <= 1e-10 * std::max(1.0, oracle);
  report(10, df_ok && gcv_ok,
         "smoother: heavy-penalty df " + fmt(heavy.df) + " (want 2 +/- 0.01), GCV oracle gap " +
             fmt(std::abs(res.gcv - oracle) * 1e12) + "e-12");
}

// 11: generator suite
void criterion_11() {
  const double rho = 0.125;
  double at_zero = bessel_corr(2.404825557695773 * rho, rho, 0.0);
  bool zero_ok = std::abs(at_zero) <= 1e-9;

  GeneratorModel model = build_generator();
  ScenarioSpec ic = scenario_table(1, 0);

  // IC pointwise mean band at 5000 draws (first channel)
  const int n = 5000;
  std::vector<double> acc(model.n_obs_points, 0.0);
  for (int i = 0; i < n; ++i) {
    auto rng = unit_rng(1100, static_cast<uint64_t>(i));
    auto unit = draw_unit(model, ic, rng);
    for (int c = 0; c < model.n_obs_points; ++c) acc[c] += unit[0].y[c];
  }
  bool band_ok = true;
  for (int c = 0; c < model.n_obs_points; ++c) {
    double var = model.sigma_e * model.sigma_e;
    for (int i = 0; i < model.n_eigen; ++i)
      var += model.sigma * model.sigma * model.eigenvalues[i] * model.psi_obs[i](0, c) *
             model.psi_obs[i](0, c);
    if (std::abs(acc[c] / n - mean_m(model.obs_grid[c])) > 5.0 * std::sqrt(var / n))
      band_ok = false;
  }

  // model-implied cross-channel covariance decays with channel separation
  bool decay_ok = true;
  const int M = static_cast<int>(model.grid.size());
  auto avg_cov = [&](int l, int j) {
    double s = 0.0;
    for (int i = 0; i < model.n_eigen; ++i)
      for (int g = 0; g < M; ++g)
        s += model.quad_weights[g] * model.eigenvalues[i] * model.eigenfunctions[i](l, g) *
             model.eigenfunctions[i](j, g);
    return s;
  };
  double prev = avg_cov(0, 0);
  for (int d = 1; d < model.p; ++d) {
    double cur = avg_cov(0, d);
    if (!(cur < prev) || cur <= 0.0) decay_ok = false;
    prev = cur;
  }

  // bit-exact seed determinism
  bool det_ok = true;
  auto r1 = unit_rng(9, 3), r2 = unit_rng(9, 3);
  auto u1 = draw_unit(model, ic, r1), u2 = draw_unit(model, ic, r2);
  for (int l = 0; l < model.p; ++l)
    for (int c = 0; c < model.n_obs_points; ++c)
      if (u1[l].y[c] != u2[l].y[c]) det_ok = false;

  report(11, zero_ok && band_ok && decay_ok && det_ok,
         "generator: correlation zero " + fmt(std::abs(at_zero) * 1e10) +
             "e-10, mean band " + std::string(band_ok ? "ok" : "violated") +
             ", cross-channel decay " + std::string(decay_ok ? "ok" : "violated") +
             ", determinism " + std::string(det_ok ? "bit-exact" : "violated"));
}

}  // namespace

int main() {
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();

  McSettings cfg;
  McResults res = run_replica(cfg);
  std::printf("# selected adaptive parameters in last run: lambda=%g k=%g\n",
              res.last_theta.lambda, res.last_theta.k);
  criteria_1_to_4(res);

  std::printf("%s\n", g_failures == 0 ? "ALL CRITERIA PASSED" : "CRITERIA FAILED");
  return g_failures == 0 ? 0 : 1;
}
