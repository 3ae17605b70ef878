#pragma once

#include "amfewma/basis.hpp"
#include "amfewma/mfpca.hpp"

#include <vector>

namespace amfewma {

enum class ScoreVariant { Eta1, Eta2 };

/// Piecewise-linear score: lambda*e inside the band |e| <= c, shrunk
/// identity outside.
double eta1(double e, double c, double lambda);

/// Smooth polynomial score, identity outside the band.
double eta2(double e, double c, double lambda);

/// eta(e)/e, with the continuous limit lambda at e = 0.
double adaptive_weight(double e, double c, double lambda, ScoreVariant variant);

/// Adaptive chart parameters. sigma_coef holds the pointwise standard
/// deviation function of the observations as basis coefficients (p x K);
/// the band is C_j(t) = k * sigma_j(t).
struct ScoreParams {
  double lambda = 0.2;
  double k = 3.0;
  ScoreVariant variant = ScoreVariant::Eta1;
  Matrix sigma_coef;
};

/// Precomputed evaluation-grid machinery for the nonlinear recursion:
/// basis values on G equispaced points and the unpenalized least-squares
/// projection back to coefficients.
struct ChartContext {
  BasisSystem basis;
  std::vector<double> grid;
  Matrix phi_grid;   // G x K
  Matrix proj;       // K x G, (Phi'Phi)^{-1} Phi'
  Matrix sigma_grid; // p x G, sigma_j evaluated on the grid

  ChartContext() = default;
  ChartContext(const BasisSystem& basis_in, const Matrix& sigma_coef, int grid_size = 100);
};

struct ChartState {
  Matrix coef;  // p x K, current statistic Y_n
  long n = 0;
};

ChartState make_chart_state(int p, int K);

/// One AMFEWMA update: pointwise adaptive weights on the evaluation grid,
/// re-expressed in coefficient space by unpenalized least squares.
ChartState amfewma_step(const ChartState& state, const CoefficientProfile& x,
                        const ScoreParams& params, const ChartContext& ctx);

/// One linear MFEWMA update, exact in coefficient space.
ChartState mfewma_step(const ChartState& state, const CoefficientProfile& x,
                       const Vector& lambdas);

/// MFPCA of the chart statistic's asymptotic distribution; feeds V^2.
struct V2Model {
  MFPCAModel model;
};

/// V^2 = sum_l xi_l^2 / rho_l with xi_l = <psi_l, y>_H (uncentered:
/// the chart operates on mean-centered data, so the IC target is zero).
double v2(const V2Model& model, const CoefficientProfile& y);

/// Hotelling T^2 of an observation against the Phase-I MFPCA (centered).
double shewhart_t2(const MFPCAModel& model, const CoefficientProfile& x);

/// Pool chart-statistic profiles from bootstrap sequences (burn-in
/// discarded) and fit MFPCA to the pool. `step` advances the recursion.
V2Model fit_v2_model(const std::vector<CoefficientProfile>& pooled_statistics,
                     const BasisSystem& basis, const GramMatrices& grams,
                     double variance_threshold);

}  // namespace amfewma
