#include "amfewma/charts.hpp"

#include <cmath>
#include <stdexcept>

namespace amfewma {

double eta1(double e, double c, double lambda) {
  if (e < -c) return e + (1.0 - lambda) * c;
  if (e > c) return e - (1.0 - lambda) * c;
  return lambda * e;
}

double eta2(double e, double c, double lambda) {
  if (std::abs(e) <= c) {
    double r = e / c;
    double u = 1.0 - r * r;
    return e * (1.0 - (1.0 - lambda) * u * u);
  }
  return e;
}

double adaptive_weight(double e, double c, double lambda, ScoreVariant variant) {
  if (e == 0.0) return lambda;
  double s = variant == ScoreVariant::Eta1 ? eta1(e, c, lambda) : eta2(e, c, lambda);
  return s / e;
}

ChartContext::ChartContext(const BasisSystem& basis_in, const Matrix& sigma_coef,
                           int grid_size)
    : basis(basis_in), grid(linspace(0.0, 1.0, grid_size)) {
  phi_grid = eval_basis(basis, grid, 0);
  Matrix ptp = phi_grid.transpose() * phi_grid;
  Eigen::LDLT<Matrix> ldlt(ptp);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("ChartContext: grid design matrix is rank deficient");
  proj = ldlt.solve(phi_grid.transpose());
  sigma_grid = sigma_coef * phi_grid.transpose();  // p x G
}

ChartState make_chart_state(int p, int K) {
  ChartState s;
  s.coef = Matrix::Zero(p, K);
  s.n = 0;
  return s;
}

ChartState amfewma_step(const ChartState& state, const CoefficientProfile& x,
                        const ScoreParams& params, const ChartContext& ctx) {
  if (x.coef.rows() != state.coef.rows() || x.coef.cols() != state.coef.cols())
    throw std::invalid_argument("amfewma_step: shape mismatch");
  const Eigen::Index p = state.coef.rows();
  const Eigen::Index G = static_cast<Eigen::Index>(ctx.grid.size());

  Matrix y_grid = state.coef * ctx.phi_grid.transpose();  // p x G
  Matrix e_grid = x.coef * ctx.phi_grid.transpose() - y_grid;
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index g = 0; g < G; ++g) {
      double c = params.k * ctx.sigma_grid(j, g);
      double w = c > 0.0 ? adaptive_weight(e_grid(j, g), c, params.lambda, params.variant)
                         : 1.0;  // degenerate band: Shewhart behavior
      y_grid(j, g) += w * e_grid(j, g);
    }
  }
  ChartState out;
  out.coef = y_grid * ctx.proj.transpose();  // unpenalized LSQ back to the basis
  out.n = state.n + 1;
  return out;
}

ChartState mfewma_step(const ChartState& state, const CoefficientProfile& x,
                       const Vector& lambdas) {
  if (x.coef.rows() != state.coef.rows() || x.coef.cols() != state.coef.cols())
    throw std::invalid_argument("mfewma_step: shape mismatch");
  if (lambdas.size() != state.coef.rows())
    throw std::invalid_argument("mfewma_step: one weight per channel required");
  for (Eigen::Index j = 0; j < lambdas.size(); ++j)
    if (lambdas[j] <= 0.0 || lambdas[j] > 1.0)
      throw std::invalid_argument("mfewma_step: weights must lie in (0,1]");
  ChartState out;
  out.coef = state.coef;
  for (Eigen::Index j = 0; j < state.coef.rows(); ++j)
    out.coef.row(j) = (1.0 - lambdas[j]) * state.coef.row(j) + lambdas[j] * x.coef.row(j);
  out.n = state.n + 1;
  return out;
}

namespace {

double quadratic_form(const MFPCAModel& m, const Matrix& centered) {
  double rho_max = m.eigenvalues.size() > 0 ? m.eigenvalues.maxCoeff() : 0.0;
  if (rho_max <= 0.0)
    throw std::runtime_error("v2: degenerate covariance (all eigenvalues negligible)");
  const double floor = 1e-12 * rho_max;
  double total = 0.0;
  for (int l = 0; l < m.L; ++l) {
    if (m.eigenvalues[l] < floor) continue;
    double xi = 0.0;
    for (int j = 0; j < m.p; ++j)
      xi += centered.row(j) * m.grams.W * m.eigenfunctions[l].row(j).transpose();
    total += xi * xi / m.eigenvalues[l];
  }
  return total;
}

}  // namespace

double v2(const V2Model& model, const CoefficientProfile& y) {
  if (y.coef.rows() != model.model.p || y.coef.cols() != model.model.basis.num_basis())
    throw std::invalid_argument("v2: shape mismatch");
  return quadratic_form(model.model, y.coef);
}

double shewhart_t2(const MFPCAModel& model, const CoefficientProfile& x) {
  if (x.coef.rows() != model.p || x.coef.cols() != model.basis.num_basis())
    throw std::invalid_argument("shewhart_t2: shape mismatch");
  return quadratic_form(model, x.coef - model.mean);
}

V2Model fit_v2_model(const std::vector<CoefficientProfile>& pooled_statistics,
                     const BasisSystem& basis, const GramMatrices& grams,
                     double variance_threshold) {
  V2Model out;
  out.model = fit_mfpca(pooled_statistics, basis, grams, variance_threshold);
  return out;
}

}  // namespace amfewma
