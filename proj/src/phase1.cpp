#include "amfewma/phase1.hpp"

#include "amfewma/simgen.hpp"  // unit_rng

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace amfewma {

double ShewhartMonitor::step(const CoefficientProfile& x) { return shewhart_t2(model_, x); }

MfewmaMonitor::MfewmaMonitor(double lambda, V2Model v2model)
    : lambda_(lambda), v2model_(std::move(v2model)) {
  if (lambda_ <= 0.0 || lambda_ > 1.0)
    throw std::invalid_argument("MfewmaMonitor: lambda must be in (0,1]");
  reset();
}

void MfewmaMonitor::reset() {
  state_ = make_chart_state(v2model_.model.p, v2model_.model.basis.num_basis());
}

double MfewmaMonitor::step(const CoefficientProfile& x) {
  Vector lambdas = Vector::Constant(state_.coef.rows(), lambda_);
  state_ = mfewma_step(state_, x, lambdas);
  CoefficientProfile y{x.unit_id, state_.coef};
  return v2(v2model_, y);
}

AmfewmaMonitor::AmfewmaMonitor(ScoreParams params, std::shared_ptr<const ChartContext> ctx,
                               V2Model v2model)
    : params_(std::move(params)), ctx_(std::move(ctx)), v2model_(std::move(v2model)) {
  reset();
}

void AmfewmaMonitor::reset() {
  state_ = make_chart_state(v2model_.model.p, v2model_.model.basis.num_basis());
}

double AmfewmaMonitor::step(const CoefficientProfile& x) {
  state_ = amfewma_step(state_, x, params_, *ctx_);
  CoefficientProfile y{x.unit_id, state_.coef};
  return v2(v2model_, y);
}

std::vector<std::vector<int>> bootstrap_sequences(size_t pool_size, int n_seq, int n_obs,
                                                  uint64_t seed) {
  if (pool_size == 0) throw std::invalid_argument("bootstrap_sequences: empty pool");
  std::vector<std::vector<int>> sequences(n_seq);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(pool_size) - 1);
  for (int s = 0; s < n_seq; ++s) {
    auto rng = unit_rng(seed, static_cast<uint64_t>(s));
    sequences[s].resize(n_obs);
    for (int n = 0; n < n_obs; ++n) sequences[s][n] = pick(rng);
  }
  return sequences;
}

Matrix v2_trajectories(Monitor& monitor, const std::vector<CoefficientProfile>& pool,
                       int n_seq, int n_obs, uint64_t seed) {
  auto sequences = bootstrap_sequences(pool.size(), n_seq, n_obs, seed);
  Matrix out(n_seq, n_obs);
  for (int s = 0; s < n_seq; ++s) {
    monitor.reset();
    for (int n = 0; n < n_obs; ++n) out(s, n) = monitor.step(pool[sequences[s][n]]);
  }
  return out;
}

namespace {

void finalize_stats(RunLengthStats& stats) {
  const double n = static_cast<double>(stats.run_lengths.size());
  double mean = 0.0;
  for (int rl : stats.run_lengths) mean += rl;
  mean /= n;
  double var = 0.0;
  for (int rl : stats.run_lengths) var += (rl - mean) * (rl - mean);
  var = n > 1 ? var / (n - 1) : 0.0;
  stats.arl = mean;
  stats.se = std::sqrt(var / n);
  stats.n_censored = static_cast<int>(std::count(stats.censored.begin(), stats.censored.end(), true));
}

}  // namespace

RunLengthStats run_lengths_at(const Matrix& trajectories, double h) {
  RunLengthStats stats;
  const int n_seq = static_cast<int>(trajectories.rows());
  const int n_obs = static_cast<int>(trajectories.cols());
  stats.run_lengths.reserve(n_seq);
  stats.censored.reserve(n_seq);
  for (int s = 0; s < n_seq; ++s) {
    int rl = n_obs;
    bool censored = true;
    for (int n = 0; n < n_obs; ++n) {
      if (trajectories(s, n) > h) {
        rl = n + 1;
        censored = false;
        break;
      }
    }
    stats.run_lengths.push_back(rl);
    stats.censored.push_back(censored);
  }
  finalize_stats(stats);
  return stats;
}

double control_limit_for(const Matrix& trajectories, double arl0) {
  if (arl0 < 1.0) throw std::invalid_argument("control_limit_for: ARL0 must be >= 1");
  const int n_obs = static_cast<int>(trajectories.cols());
  if (static_cast<double>(n_obs) < arl0)
    throw std::runtime_error(
        "control_limit_for: ARL0 unreachable with this sequence length; increase n_obs");
  std::vector<double> candidates(trajectories.data(),
                                 trajectories.data() + trajectories.size());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  // A limit just below the smallest observed value gives ARL = 1.
  double below = candidates.front() - std::max(1e-12, 1e-9 * std::abs(candidates.front()));
  candidates.insert(candidates.begin(), below);

  // ARL(h) is nondecreasing in h, so the smallest admissible h is found
  // by bisection over the sorted candidate values.
  int lo = 0, hi = static_cast<int>(candidates.size()) - 1;
  if (run_lengths_at(trajectories, candidates[hi]).arl < arl0)
    throw std::runtime_error(
        "control_limit_for: ARL0 unreachable even with full censoring; increase n_obs");
  if (run_lengths_at(trajectories, candidates[lo]).arl >= arl0) return candidates[lo];
  while (hi - lo > 1) {
    int mid = (lo + hi) / 2;
    if (run_lengths_at(trajectories, candidates[mid]).arl >= arl0)
      hi = mid;
    else
      lo = mid;
  }
  return candidates[hi];
}

namespace {

RunLengthStats simulate_run_lengths(Monitor& monitor,
                                    const std::function<CoefficientProfile(int, int)>& draw,
                                    double h, int n_seq, int n_obs,
                                    const std::optional<ShiftSpec>& shift) {
  const int n0 = shift ? shift->n0 : 1;
  if (n0 < 1) throw std::invalid_argument("estimate_arl: shift location must be >= 1");
  RunLengthStats stats;
  stats.run_lengths.reserve(n_seq);
  stats.censored.reserve(n_seq);
  for (int s = 0; s < n_seq; ++s) {
    monitor.reset();
    int rl = n_obs - n0 + 1;
    bool censored = true;
    for (int n = 1; n <= n_obs; ++n) {
      CoefficientProfile x = draw(s, n);
      if (shift && n >= n0) x.coef += shift->delta;
      double v = monitor.step(x);
      if (v > h) {
        if (n < n0) {
          monitor.reset();  // pre-shift alarm: not counted
          continue;
        }
        rl = n - n0 + 1;
        censored = false;
        break;
      }
    }
    stats.run_lengths.push_back(rl);
    stats.censored.push_back(censored);
  }
  finalize_stats(stats);
  return stats;
}

}  // namespace

RunLengthStats estimate_arl(Monitor& monitor, const std::vector<CoefficientProfile>& pool,
                            double h, int n_seq, int n_obs, uint64_t seed,
                            const std::optional<ShiftSpec>& shift) {
  if (pool.empty()) throw std::invalid_argument("estimate_arl: empty pool");
  auto sequences = bootstrap_sequences(pool.size(), n_seq, n_obs, seed);
  auto draw = [&](int s, int n) -> CoefficientProfile { return pool[sequences[s][n - 1]]; };
  return simulate_run_lengths(monitor, draw, h, n_seq, n_obs, shift);
}

RunLengthStats estimate_arl_generated(
    Monitor& monitor, const std::function<CoefficientProfile(int, int)>& draw, double h,
    int n_seq, int n_obs, const std::optional<ShiftSpec>& shift) {
  return simulate_run_lengths(monitor, draw, h, n_seq, n_obs, shift);
}

V2Model estimate_v2_model(const ScoreParams& params, const ChartContext& ctx,
                          const std::vector<CoefficientProfile>& training_pool,
                          const BasisSystem& basis, const GramMatrices& grams,
                          double variance_threshold, int n_seq, int n_obs, int burn_in,
                          uint64_t seed) {
  if (training_pool.empty())
    throw std::invalid_argument("estimate_v2_model: empty training pool");
  if (burn_in >= n_obs)
    throw std::invalid_argument("estimate_v2_model: burn-in must be shorter than sequences");
  auto sequences = bootstrap_sequences(training_pool.size(), n_seq, n_obs, seed);
  const int p = static_cast<int>(training_pool.front().coef.rows());
  const int K = basis.num_basis();
  std::vector<CoefficientProfile> pooled;
  pooled.reserve(static_cast<size_t>(n_seq) * (n_obs - burn_in));
  for (int s = 0; s < n_seq; ++s) {
    ChartState state = make_chart_state(p, K);
    for (int n = 0; n < n_obs; ++n) {
      state = amfewma_step(state, training_pool[sequences[s][n]], params, ctx);
      if (n >= burn_in) pooled.push_back(CoefficientProfile{"", state.coef});
    }
  }
  return fit_v2_model(pooled, basis, grams, variance_threshold);
}

ChartDesign calibrate_h(const ScoreParams& params, const V2Model& v2model,
                        std::shared_ptr<const ChartContext> ctx,
                        const std::vector<CoefficientProfile>& tuning_pool, double arl0,
                        int n_seq, int n_obs, uint64_t seed) {
  AmfewmaMonitor monitor(params, ctx, v2model);
  Matrix traj = v2_trajectories(monitor, tuning_pool, n_seq, n_obs, seed);
  ChartDesign design;
  design.params = params;
  design.v2model = v2model;
  design.arl0 = arl0;
  design.h = control_limit_for(traj, arl0);
  design.meta = CalibrationMeta{n_seq, n_obs, seed};
  return design;
}

namespace {

double h_norm(const Matrix& coef, const GramMatrices& grams) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < coef.rows(); ++j)
    s += coef.row(j) * grams.W * coef.row(j).transpose();
  return std::sqrt(std::max(0.0, s));
}

bool theta_before(const ThetaCandidate& a, const ThetaCandidate& b) {
  if (a.lambda != b.lambda) return a.lambda < b.lambda;
  return a.k < b.k;
}

}  // namespace

ThetaOptimum optimize_theta(const std::vector<ThetaCandidate>& grid, const Matrix& sigma_coef,
                            const std::vector<CoefficientProfile>& training_pool,
                            const std::vector<CoefficientProfile>& tuning_pool,
                            const BasisSystem& basis, const GramMatrices& grams,
                            const ShiftSpec& delta1, const ShiftSpec& delta2,
                            const OptimizeOptions& options, uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("optimize_theta: empty candidate grid");
  if (options.epsilon <= 0.0) throw std::invalid_argument("optimize_theta: epsilon must be > 0");

  ThetaOptimum out;
  if (h_norm(delta1.delta, grams) >= h_norm(delta2.delta, grams))
    out.warnings.push_back("optimize_theta: ||delta1|| >= ||delta2||; check shift ordering");

  auto ctx = std::make_shared<const ChartContext>(basis, sigma_coef, options.grid_size);

  struct Candidate {
    ThetaReportRow row;
    V2Model v2model;
  };
  std::vector<Candidate> cands;
  cands.reserve(grid.size());

  for (size_t i = 0; i < grid.size(); ++i) {
    ScoreParams params;
    params.lambda = grid[i].lambda;
    params.k = grid[i].k;
    params.variant = options.variant;
    params.sigma_coef = sigma_coef;

    Candidate c;
    c.row.theta = grid[i];
    // Common random numbers: every candidate sees the same bootstrap
    // sequences, so the ARL comparisons driving the selection are paired
    // and the winner is not an artifact of per-candidate sampling noise.
    c.v2model = estimate_v2_model(params, *ctx, training_pool, basis, grams,
                                  options.variance_threshold, options.v2_n_seq,
                                  options.v2_n_obs, options.v2_burn_in,
                                  seed ^ 0x51ed270b);

    AmfewmaMonitor monitor(params, ctx, c.v2model);
    Matrix traj = v2_trajectories(monitor, tuning_pool, options.n_seq, options.n_obs,
                                  seed + 1000);
    c.row.h = control_limit_for(traj, options.arl0);
    c.row.arl_ic = run_lengths_at(traj, c.row.h).arl;
    c.row.arl_delta2 = estimate_arl(monitor, tuning_pool, c.row.h, options.n_seq,
                                    options.n_obs, seed + 2000, delta2)
                           .arl;
    c.row.arl_delta1 = estimate_arl(monitor, tuning_pool, c.row.h, options.n_seq,
                                    options.n_obs, seed + 3000, delta1)
                           .arl;
    cands.push_back(std::move(c));
  }

  // Stage 1: theta2 minimizes ARL(delta2); ties toward smaller lambda, then k.
  size_t i2 = 0;
  for (size_t i = 1; i < cands.size(); ++i) {
    double a = cands[i].row.arl_delta2, b = cands[i2].row.arl_delta2;
    if (a < b || (a == b && theta_before(cands[i].row.theta, cands[i2].row.theta))) i2 = i;
  }
  const double bound = (1.0 + options.epsilon) * cands[i2].row.arl_delta2;

  // Stage 2: minimize ARL(delta1) over the feasible set. Candidates whose
  // ARL(delta1) is within the same (1 + epsilon) tolerance of the stage-2
  // minimum are treated as ties, resolved toward smaller lambda and then
  // smaller k: when the small-shift performance is statistically
  // indistinguishable, the longer-memory chart is the safer choice for
  // shifts smaller than the reference.
  double min_d1 = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < cands.size(); ++i) {
    cands[i].row.feasible = cands[i].row.arl_delta2 <= bound;
    if (cands[i].row.feasible) min_d1 = std::min(min_d1, cands[i].row.arl_delta1);
  }
  const double d1_bound = (1.0 + options.epsilon) * min_d1;
  size_t best = cands.size();
  for (size_t i = 0; i < cands.size(); ++i) {
    if (!cands[i].row.feasible || cands[i].row.arl_delta1 > d1_bound) continue;
    if (best == cands.size() || theta_before(cands[i].row.theta, cands[best].row.theta))
      best = i;
  }

  out.theta = cands[best].row.theta;
  out.h = cands[best].row.h;
  out.v2model = cands[best].v2model;
  for (auto& c : cands) out.report.push_back(c.row);
  return out;
}

Matrix pointwise_sd_coef(const std::vector<CoefficientProfile>& pool,
                         const BasisSystem& basis, int grid_size) {
  if (pool.size() < 2) throw std::invalid_argument("pointwise_sd_coef: need >= 2 profiles");
  auto grid = linspace(0.0, 1.0, grid_size);
  Matrix phi = eval_basis(basis, grid, 0);  // G x K
  const Eigen::Index p = pool.front().coef.rows();
  Matrix mean = Matrix::Zero(p, grid_size), m2 = Matrix::Zero(p, grid_size);
  for (const auto& x : pool) {
    Matrix v = x.coef * phi.transpose();
    mean += v;
    m2 += v.cwiseProduct(v);
  }
  const double n = static_cast<double>(pool.size());
  mean /= n;
  Matrix var = (m2 - n * mean.cwiseProduct(mean)) / (n - 1.0);
  Matrix sd = var.cwiseMax(0.0).cwiseSqrt();

  Eigen::LDLT<Matrix> ldlt(phi.transpose() * phi);
  Matrix proj = ldlt.solve(phi.transpose());  // K x G
  return sd * proj.transpose();
}

DefaultShifts default_shifts(const std::vector<CoefficientProfile>& pool,
                             const BasisSystem& basis, int n_boot, uint64_t seed,
                             int grid_size) {
  if (pool.empty()) throw std::invalid_argument("default_shifts: empty pool");
  auto grid = linspace(0.0, 1.0, grid_size);
  Matrix phi = eval_basis(basis, grid, 0);
  const Eigen::Index p = pool.front().coef.rows();
  const int N = static_cast<int>(pool.size());

  Matrix mean_acc = Matrix::Zero(p, grid_size), sd_acc = Matrix::Zero(p, grid_size);
  std::uniform_int_distribution<int> pick(0, N - 1);
  for (int b = 0; b < n_boot; ++b) {
    auto rng = unit_rng(seed, 0x5A5A0000ULL + b);
    Matrix mean = Matrix::Zero(p, grid_size), m2 = Matrix::Zero(p, grid_size);
    for (int i = 0; i < N; ++i) {
      Matrix v = pool[pick(rng)].coef * phi.transpose();
      mean += v;
      m2 += v.cwiseProduct(v);
    }
    mean /= N;
    Matrix var = N > 1 ? ((m2 - N * mean.cwiseProduct(mean)) / (N - 1.0)).eval()
                       : Matrix::Zero(p, grid_size).eval();
    mean_acc += mean;
    sd_acc += var.cwiseMax(0.0).cwiseSqrt();
  }
  mean_acc /= n_boot;
  sd_acc /= n_boot;

  Eigen::LDLT<Matrix> ldlt(phi.transpose() * phi);
  Matrix proj_t = ldlt.solve(phi.transpose()).transpose();  // G x K

  DefaultShifts out;
  out.mean_coef = mean_acc * proj_t;
  out.sigma_coef = sd_acc * proj_t;
  out.delta1.delta = 0.5 * out.sigma_coef;
  out.delta2.delta = 2.0 * out.sigma_coef;
  if (sd_acc.cwiseAbs().maxCoeff() <= 1e-7 * (1.0 + mean_acc.cwiseAbs().maxCoeff()))
    out.warnings.push_back("default_shifts: pool has zero variance; shifts are zero");
  return out;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_unjson(const nlohmann::json& j) {
  const Eigen::Index r = static_cast<Eigen::Index>(j.size());
  const Eigen::Index c = r > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

}  // namespace

std::string serialize_design(const ChartDesign& design) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = "chart-design";
  j["lambda"] = design.params.lambda;
  j["k"] = design.params.k;
  j["variant"] = design.params.variant == ScoreVariant::Eta1 ? "eta1" : "eta2";
  j["sigma_coef"] = matrix_json(design.params.sigma_coef);
  j["h"] = design.h;
  j["arl0"] = design.arl0;
  j["calibration"] = {{"n_seq", design.meta.n_seq},
                      {"n_obs", design.meta.n_obs},
                      {"seed", design.meta.seed}};
  j["center_coef"] = matrix_json(design.center_coef);
  j["v2model"] = nlohmann::json::parse(serialize_mfpca(design.v2model.model, design.meta.seed));
  return j.dump(2);
}

ChartDesign deserialize_design(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  if (j.at("format_version").get<int>() != 1 || j.at("kind") != "chart-design")
    throw std::runtime_error("deserialize_design: unsupported document");
  ChartDesign d;
  d.params.lambda = j["lambda"].get<double>();
  d.params.k = j["k"].get<double>();
  d.params.variant = j["variant"] == "eta1" ? ScoreVariant::Eta1 : ScoreVariant::Eta2;
  d.params.sigma_coef = matrix_unjson(j["sigma_coef"]);
  d.h = j["h"].get<double>();
  d.arl0 = j["arl0"].get<double>();
  d.meta.n_seq = j["calibration"]["n_seq"].get<int>();
  d.meta.n_obs = j["calibration"]["n_obs"].get<int>();
  d.meta.seed = j["calibration"]["seed"].get<uint64_t>();
  if (j.contains("center_coef")) d.center_coef = matrix_unjson(j["center_coef"]);
  d.v2model.model = deserialize_mfpca(j["v2model"].dump());
  return d;
}

}  // namespace amfewma
