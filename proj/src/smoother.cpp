#include "amfewma/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amfewma {

std::vector<double> default_lambda_grid() {
  std::vector<double> grid(25);
  const double lo = std::log10(1e-8), hi = std::log10(1e4);
  for (int i = 0; i < 25; ++i) grid[i] = std::pow(10.0, lo + (hi - lo) * i / 24.0);
  return grid;
}

namespace {

void check_profile(const DiscreteProfile& profile, const BasisSystem& basis) {
  if (profile.t.size() != profile.y.size())
    throw std::invalid_argument("smoother: t and y lengths differ");
  if (static_cast<int>(profile.t.size()) < basis.order)
    throw std::invalid_argument("smoother: need at least `order` observation points");
  for (size_t i = 1; i < profile.t.size(); ++i)
    if (profile.t[i] <= profile.t[i - 1])
      throw std::invalid_argument("smoother: observation points must be strictly increasing");
}

struct NormalEq {
  Matrix phi;     // m x K
  Matrix phitphi; // K x K
  Vector phity;
};

NormalEq normal_equations(const DiscreteProfile& profile, const BasisSystem& basis) {
  NormalEq eq;
  eq.phi = eval_basis(basis, profile.t, 0);
  eq.phitphi = eq.phi.transpose() * eq.phi;
  Eigen::Map<const Vector> y(profile.y.data(), static_cast<Eigen::Index>(profile.y.size()));
  eq.phity = eq.phi.transpose() * y;
  return eq;
}

PenalizedFit solve_fit(const NormalEq& eq, const Matrix& R, double lambda_s,
                       std::span<const double> yv) {
  const Eigen::Index K = eq.phitphi.rows();
  Matrix A = eq.phitphi + lambda_s * R;
  Eigen::LDLT<Matrix> ldlt(A);
  // Scale the rank test by the data term, not by A: with a huge penalty the
  // pivots in the penalty's null space stay at the data scale and the system
  // is still perfectly solvable there.
  const double data_scale = std::max(1.0, eq.phitphi.diagonal().maxCoeff());
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() < 1e-12 * data_scale)
    throw std::runtime_error(
        "fit_penalized: singular normal equations (too few points for an unpenalized fit)");
  PenalizedFit out;
  out.coef = ldlt.solve(eq.phity);
  out.df = ldlt.solve(eq.phitphi).trace();
  Eigen::Map<const Vector> y(yv.data(), static_cast<Eigen::Index>(yv.size()));
  out.sse = (y - eq.phi * out.coef).squaredNorm();
  (void)K;
  return out;
}

}  // namespace

PenalizedFit fit_penalized(const DiscreteProfile& profile, const BasisSystem& basis,
                           const GramMatrices& grams, double lambda_s) {
  check_profile(profile, basis);
  if (lambda_s < 0.0) throw std::invalid_argument("fit_penalized: lambda_s must be >= 0");
  NormalEq eq = normal_equations(profile, basis);
  return solve_fit(eq, grams.R, lambda_s, profile.y);
}

GcvResult gcv_select(const DiscreteProfile& profile, const BasisSystem& basis,
                     const GramMatrices& grams, const std::vector<double>& lambda_grid) {
  check_profile(profile, basis);
  if (lambda_grid.empty()) throw std::invalid_argument("gcv_select: empty lambda grid");
  NormalEq eq = normal_equations(profile, basis);
  const double m = static_cast<double>(profile.y.size());

  std::vector<double> sorted = lambda_grid;
  std::sort(sorted.begin(), sorted.end());

  GcvResult best;
  bool found = false;
  for (double lambda : sorted) {
    PenalizedFit fit = solve_fit(eq, grams.R, lambda, profile.y);
    if (fit.df >= m) continue;  // saturated fit, GCV undefined
    double gcv = (fit.sse / m) / ((1.0 - fit.df / m) * (1.0 - fit.df / m));
    if (!found || gcv <= best.gcv) {  // <= breaks ties toward larger lambda
      best.lambda = lambda;
      best.coef = fit.coef;
      best.df = fit.df;
      best.sse = fit.sse;
      best.gcv = gcv;
      found = true;
    }
  }
  if (!found)
    throw std::runtime_error("gcv_select: fit saturated (df >= m) at every grid point");
  return best;
}

CoefficientProfile smooth_unit(const std::vector<DiscreteProfile>& channels,
                               const BasisSystem& basis, const GramMatrices& grams,
                               const std::vector<double>& lambda_grid) {
  if (channels.empty()) throw std::invalid_argument("smooth_unit: no channels");
  const int p = static_cast<int>(channels.size());
  const int K = basis.num_basis();
  CoefficientProfile out;
  out.unit_id = channels.front().unit_id;
  out.coef = Matrix::Zero(p, K);
  std::vector<bool> seen(p, false);
  for (const auto& ch : channels) {
    if (ch.channel < 1 || ch.channel > p || seen[ch.channel - 1])
      throw std::invalid_argument("smooth_unit: channels must be 1..p, each exactly once; bad channel " +
                                  std::to_string(ch.channel));
    seen[ch.channel - 1] = true;
    GcvResult fit = gcv_select(ch, basis, grams, lambda_grid);
    out.coef.row(ch.channel - 1) = fit.coef.transpose();
  }
  for (int j = 0; j < p; ++j)
    if (!seen[j])
      throw std::invalid_argument("smooth_unit: missing channel " + std::to_string(j + 1));
  return out;
}

SmootherCache::SmootherCache(const std::vector<double>& obs_grid, const BasisSystem& basis,
                             const GramMatrices& grams, const std::vector<double>& lambda_grid)
    : grid_(obs_grid), lambdas_(lambda_grid) {
  std::sort(lambdas_.begin(), lambdas_.end());
  phi_ = eval_basis(basis, grid_, 0);
  Matrix phitphi = phi_.transpose() * phi_;
  const double m = static_cast<double>(grid_.size());
  for (double lambda : lambdas_) {
    Matrix A = phitphi + lambda * grams.R;
    Eigen::LDLT<Matrix> ldlt(A);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("SmootherCache: singular normal equations");
    solvers_.push_back(ldlt.solve(phi_.transpose()));
    double df = ldlt.solve(phitphi).trace();
    dfs_.push_back(df);
    if (df >= m)
      throw std::runtime_error("SmootherCache: fit saturated (df >= m) at lambda grid point");
  }
}

GcvResult SmootherCache::fit(std::span<const double> y) const {
  if (y.size() != grid_.size())
    throw std::invalid_argument("SmootherCache::fit: value count does not match grid");
  Eigen::Map<const Vector> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  const double m = static_cast<double>(y.size());
  GcvResult best;
  bool found = false;
  for (size_t i = 0; i < lambdas_.size(); ++i) {
    Vector coef = solvers_[i] * yv;
    double sse = (yv - phi_ * coef).squaredNorm();
    double denom = 1.0 - dfs_[i] / m;
    double gcv = (sse / m) / (denom * denom);
    if (!found || gcv <= best.gcv) {
      best.lambda = lambdas_[i];
      best.coef = std::move(coef);
      best.df = dfs_[i];
      best.sse = sse;
      best.gcv = gcv;
      found = true;
    }
  }
  return best;
}

CoefficientProfile SmootherCache::smooth(const std::vector<DiscreteProfile>& channels) const {
  const int p = static_cast<int>(channels.size());
  CoefficientProfile out;
  out.unit_id = channels.empty() ? std::string() : channels.front().unit_id;
  out.coef = Matrix::Zero(p, solvers_.front().rows());
  for (const auto& ch : channels) {
    if (ch.channel < 1 || ch.channel > p)
      throw std::invalid_argument("SmootherCache::smooth: bad channel index");
    out.coef.row(ch.channel - 1) = fit(ch.y).coef.transpose();
  }
  return out;
}

}  // namespace amfewma
