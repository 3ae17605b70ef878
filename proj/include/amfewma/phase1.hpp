#pragma once

#include "amfewma/charts.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace amfewma {

/// Mean-shift description: delta added (in coefficient space) to every
/// observation with index >= n0.
struct ShiftSpec {
  Matrix delta;  // p x K
  int n0 = 1;
};

struct RunLengthStats {
  std::vector<int> run_lengths;
  std::vector<bool> censored;
  double arl = 0.0;
  double se = 0.0;
  int n_censored = 0;
};

struct CalibrationMeta {
  int n_seq = 0;
  int n_obs = 0;
  uint64_t seed = 0;
};

/// A single monitored stream: reset-able state plus a per-observation
/// monitoring statistic. Observations arrive already mean-centered.
class Monitor {
 public:
  virtual ~Monitor() = default;
  virtual void reset() = 0;
  virtual double step(const CoefficientProfile& x) = 0;
  virtual std::unique_ptr<Monitor> clone() const = 0;
};

class ShewhartMonitor final : public Monitor {
 public:
  explicit ShewhartMonitor(MFPCAModel model) : model_(std::move(model)) {}
  void reset() override {}
  double step(const CoefficientProfile& x) override;
  std::unique_ptr<Monitor> clone() const override {
    return std::make_unique<ShewhartMonitor>(*this);
  }

 private:
  MFPCAModel model_;
};

class MfewmaMonitor final : public Monitor {
 public:
  MfewmaMonitor(double lambda, V2Model v2model);
  void reset() override;
  double step(const CoefficientProfile& x) override;
  std::unique_ptr<Monitor> clone() const override {
    return std::make_unique<MfewmaMonitor>(*this);
  }

 private:
  double lambda_;
  V2Model v2model_;
  ChartState state_;
};

class AmfewmaMonitor final : public Monitor {
 public:
  AmfewmaMonitor(ScoreParams params, std::shared_ptr<const ChartContext> ctx, V2Model v2model);
  void reset() override;
  double step(const CoefficientProfile& x) override;
  std::unique_ptr<Monitor> clone() const override {
    return std::make_unique<AmfewmaMonitor>(*this);
  }

 private:
  ScoreParams params_;
  std::shared_ptr<const ChartContext> ctx_;
  V2Model v2model_;
  ChartState state_;
};

/// i.i.d.-with-replacement bootstrap index sequences; deterministic given seed.
std::vector<std::vector<int>> bootstrap_sequences(size_t pool_size, int n_seq, int n_obs,
                                                  uint64_t seed);

/// Per-sequence V^2 trajectories from bootstrap resampling of `pool`
/// (no resets, no shift); used for control-limit search.
Matrix v2_trajectories(Monitor& monitor, const std::vector<CoefficientProfile>& pool,
                       int n_seq, int n_obs, uint64_t seed);

/// ARL(h) from stored trajectories: RL = first index with V^2 > h,
/// censored at n_obs.
RunLengthStats run_lengths_at(const Matrix& trajectories, double h);

/// Smallest h (over the empirical V^2 range) whose estimated IC ARL
/// reaches arl0. Throws when even full censoring cannot reach arl0.
double control_limit_for(const Matrix& trajectories, double arl0);

/// Run-length simulation against a fixed limit. Without a shift, RL counts
/// from the first observation. With a shift at n0, alarms strictly before
/// n0 reset the chart state and are not counted; RL = signal index - n0 + 1.
RunLengthStats estimate_arl(Monitor& monitor, const std::vector<CoefficientProfile>& pool,
                            double h, int n_seq, int n_obs, uint64_t seed,
                            const std::optional<ShiftSpec>& shift = {});

/// Same convention, but observations come from a caller-supplied generator
/// (sequence index, observation index) -> profile.
RunLengthStats estimate_arl_generated(
    Monitor& monitor, const std::function<CoefficientProfile(int, int)>& draw, double h,
    int n_seq, int n_obs, const std::optional<ShiftSpec>& shift = {});

/// Chart design produced by calibration. center_coef is the Phase-I
/// training mean; monitoring subtracts it from incoming observations.
struct ChartDesign {
  ScoreParams params;
  double h = 0.0;
  V2Model v2model;
  double arl0 = 20.0;
  CalibrationMeta meta;
  Matrix center_coef;
};

/// Pool AMFEWMA statistics over bootstrap sequences from the training set
/// (burn-in discarded) and fit the V^2 covariance model to the pool.
V2Model estimate_v2_model(const ScoreParams& params, const ChartContext& ctx,
                          const std::vector<CoefficientProfile>& training_pool,
                          const BasisSystem& basis, const GramMatrices& grams,
                          double variance_threshold, int n_seq, int n_obs, int burn_in,
                          uint64_t seed);

ChartDesign calibrate_h(const ScoreParams& params, const V2Model& v2model,
                        std::shared_ptr<const ChartContext> ctx,
                        const std::vector<CoefficientProfile>& tuning_pool, double arl0,
                        int n_seq, int n_obs, uint64_t seed);

struct ThetaCandidate {
  double lambda = 0.0;
  double k = 0.0;
};

struct ThetaReportRow {
  ThetaCandidate theta;
  double h = 0.0;
  double arl_ic = 0.0;
  double arl_delta1 = 0.0;
  double arl_delta2 = 0.0;
  bool feasible = false;
};

struct ThetaOptimum {
  ThetaCandidate theta;
  double h = 0.0;
  V2Model v2model;
  std::vector<ThetaReportRow> report;
  std::vector<std::string> warnings;
};

struct OptimizeOptions {
  double epsilon = 0.05;
  double arl0 = 20.0;
  double variance_threshold = 0.9;
  int n_seq = 200;
  int n_obs = 150;
  int v2_n_seq = 50;
  int v2_n_obs = 100;
  int v2_burn_in = 50;
  ScoreVariant variant = ScoreVariant::Eta1;
  int grid_size = 100;
};

/// Two-stage constrained grid search for theta = (lambda, k): minimize
/// ARL(delta1) subject to ARL(delta2) within (1+epsilon) of its minimum,
/// with per-theta control limits holding the IC ARL at arl0. All
/// candidates are evaluated on common random numbers, and stage-2
/// near-ties (within the same tolerance) resolve toward smaller lambda,
/// then smaller k.
ThetaOptimum optimize_theta(const std::vector<ThetaCandidate>& grid, const Matrix& sigma_coef,
                            const std::vector<CoefficientProfile>& training_pool,
                            const std::vector<CoefficientProfile>& tuning_pool,
                            const BasisSystem& basis, const GramMatrices& grams,
                            const ShiftSpec& delta1, const ShiftSpec& delta2,
                            const OptimizeOptions& options, uint64_t seed);

/// Bootstrap estimates of the pointwise mean and sd of the pool; shifts
/// returned as coefficient matrices 0.5*sigma-hat and 2*sigma-hat.
struct DefaultShifts {
  ShiftSpec delta1;
  ShiftSpec delta2;
  Matrix mean_coef;
  Matrix sigma_coef;
  std::vector<std::string> warnings;
};

DefaultShifts default_shifts(const std::vector<CoefficientProfile>& pool,
                             const BasisSystem& basis, int n_boot, uint64_t seed,
                             int grid_size = 100);

/// Pointwise standard-deviation function of a pool, as basis coefficients.
Matrix pointwise_sd_coef(const std::vector<CoefficientProfile>& pool,
                         const BasisSystem& basis, int grid_size = 100);

std::string serialize_design(const ChartDesign& design);
ChartDesign deserialize_design(const std::string& json_text);

}  // namespace amfewma
