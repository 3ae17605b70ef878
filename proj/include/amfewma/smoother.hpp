#pragma once

#include "amfewma/basis.hpp"

#include <map>
#include <string>
#include <vector>

namespace amfewma {

/// Raw (t_i, y_i) observations for one channel of one unit.
struct DiscreteProfile {
  std::string unit_id;
  int channel = 1;  // 1-based
  std::vector<double> t;
  std::vector<double> y;
};

struct PenalizedFit {
  Vector coef;
  double df = 0.0;   // trace of the hat matrix
  double sse = 0.0;
};

struct GcvResult {
  double lambda = 0.0;
  Vector coef;
  double df = 0.0;
  double sse = 0.0;
  double gcv = 0.0;
};

/// 25 log-spaced candidates in [1e-8, 1e4].
std::vector<double> default_lambda_grid();

/// Roughness-penalized least squares: c = (Phi'Phi + lambda R)^{-1} Phi' y.
PenalizedFit fit_penalized(const DiscreteProfile& profile, const BasisSystem& basis,
                           const GramMatrices& grams, double lambda_s);

/// Grid minimization of GCV(lambda) = (sse/m) / (1 - df/m)^2, ties toward
/// the larger (smoother) lambda.
GcvResult gcv_select(const DiscreteProfile& profile, const BasisSystem& basis,
                     const GramMatrices& grams, const std::vector<double>& lambda_grid);

/// Independent per-channel GCV fits assembled into a p x K coefficient matrix.
/// `channels` must contain channel indices 1..p exactly once.
CoefficientProfile smooth_unit(const std::vector<DiscreteProfile>& channels,
                               const BasisSystem& basis, const GramMatrices& grams,
                               const std::vector<double>& lambda_grid);

/// Precomputed per-lambda smoother matrices for one fixed observation grid.
/// Makes bulk GCV smoothing of equally-sampled profiles cheap.
class SmootherCache {
 public:
  SmootherCache(const std::vector<double>& obs_grid, const BasisSystem& basis,
                const GramMatrices& grams, const std::vector<double>& lambda_grid);

  GcvResult fit(std::span<const double> y) const;
  CoefficientProfile smooth(const std::vector<DiscreteProfile>& channels) const;
  const std::vector<double>& obs_grid() const { return grid_; }

 private:
  std::vector<double> grid_;
  std::vector<double> lambdas_;
  Matrix phi_;                     // m x K
  std::vector<Matrix> solvers_;    // per lambda, K x m
  std::vector<double> dfs_;
};

}  // namespace amfewma
