#include "amfewma/simgen.hpp"

#include <cmath>
#include <stdexcept>

namespace amfewma {

double bessel_corr(double z, double rho, double nu) {
  if (rho <= 0.0) throw std::invalid_argument("bessel_corr: rho must be positive");
  const double x = std::abs(z) / rho;
  const double q = -x * x / 4.0;
  double term = std::pow(x / 2.0, nu) / std::tgamma(nu + 1.0);
  double sum = term;
  for (int j = 1; j < 1000; ++j) {
    term *= q / (j * (nu + j));
    sum += term;
    if (std::abs(term) < 1e-16) break;
  }
  return sum;
}

GeneratorModel build_generator(int p, int n_eigen, int grid_size, double rho, double nu) {
  if (grid_size < 2 * n_eigen)
    throw std::invalid_argument("build_generator: grid must have at least 2*L* points");
  GeneratorModel model;
  model.p = p;
  model.n_eigen = n_eigen;
  model.rho = rho;
  model.nu = nu;
  model.grid = linspace(0.0, 1.0, grid_size);
  const int M = grid_size;

  model.quad_weights.assign(M, 0.0);
  for (int i = 0; i + 1 < M; ++i) {
    double half = 0.5 * (model.grid[i + 1] - model.grid[i]);
    model.quad_weights[i] += half;
    model.quad_weights[i + 1] += half;
  }

  // Common within-channel kernel, eigendecomposed with symmetrized
  // quadrature weighting: B = D^{1/2} K D^{1/2}.
  Matrix kernel(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j)
      kernel(i, j) = bessel_corr(model.grid[i] - model.grid[j], rho, nu);

  Vector sqw(M), inv_sqw(M);
  for (int i = 0; i < M; ++i) {
    sqw[i] = std::sqrt(model.quad_weights[i]);
    inv_sqw[i] = 1.0 / sqw[i];
  }
  Matrix b_single = sqw.asDiagonal() * kernel * sqw.asDiagonal();
  b_single = 0.5 * (b_single + b_single.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es1(b_single);
  if (es1.info() != Eigen::Success)
    throw std::runtime_error("build_generator: kernel eigendecomposition failed");

  // theta_k tabulated on the grid, orthonormal under the quadrature weights.
  Matrix theta(M, M);
  Vector eta(M);
  for (int i = 0; i < M; ++i) {
    eta[i] = es1.eigenvalues()[M - 1 - i];
    theta.col(i) = inv_sqw.asDiagonal() * es1.eigenvectors().col(M - 1 - i);
  }

  // Assemble the stacked p-channel operator with 1/(1+|l-j|) coupling.
  Matrix big = Matrix::Zero(p * M, p * M);
  for (int l = 0; l < p; ++l) {
    for (int j = 0; j < p; ++j) {
      double factor = 1.0 / (1.0 + std::abs(l - j));
      Matrix block = Matrix::Zero(M, M);
      for (int k = 0; k < M; ++k) {
        if (eta[k] <= 0.0) continue;
        block.noalias() += (factor * eta[k]) * theta.col(k) * theta.col(k).transpose();
      }
      big.block(l * M, j * M, M, M) =
          sqw.asDiagonal() * block * sqw.asDiagonal();
    }
  }
  big = 0.5 * (big + big.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(big);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("build_generator: stacked eigendecomposition failed");
  double max_ev = es.eigenvalues().maxCoeff();
  if (es.eigenvalues().minCoeff() < -1e-8 * max_ev)
    throw std::runtime_error("build_generator: assembled operator is not PSD");

  model.eigenvalues = Vector(n_eigen);
  model.eigenfunctions.reserve(n_eigen);
  const int dim = p * M;
  for (int i = 0; i < n_eigen; ++i) {
    model.eigenvalues[i] = std::max(es.eigenvalues()[dim - 1 - i], 0.0);
    Vector u = es.eigenvectors().col(dim - 1 - i);
    Matrix psi(p, M);
    for (int l = 0; l < p; ++l)
      psi.row(l) = (inv_sqw.asDiagonal() * u.segment(l * M, M)).transpose();
    model.eigenfunctions.push_back(psi);
  }

  model.obs_grid = linspace(0.0, 1.0, model.n_obs_points);
  model.psi_obs.reserve(n_eigen);
  for (int i = 0; i < n_eigen; ++i) {
    Matrix po(p, model.n_obs_points);
    for (int c = 0; c < model.n_obs_points; ++c) {
      double t = model.obs_grid[c];
      // linear interpolation on the quadrature grid
      int seg = std::min<int>(static_cast<int>(t * (M - 1)), M - 2);
      double t0 = model.grid[seg], t1 = model.grid[seg + 1];
      double a = (t - t0) / (t1 - t0);
      for (int l = 0; l < p; ++l)
        po(l, c) = (1.0 - a) * model.eigenfunctions[i](l, seg) +
                   a * model.eigenfunctions[i](l, seg + 1);
    }
    model.psi_obs.push_back(po);
  }
  return model;
}

double mean_m(double t) {
  return 0.2074 + 0.3117 * std::exp(-371.4 * t) + 0.5284 * (1.0 - std::exp(0.8217 * t)) -
         423.3 * (1.0 + std::tanh(-26.15 * (t + 0.1715)));
}

double contamination_ce(double t, double m_e) {
  return std::min(0.0, -2.0 * m_e * (t - 0.5));
}

double warp_h(double t, double m_p, bool as_printed) {
  const double slope_mid = (0.55 - m_p) / 0.55;
  const double slope_hi = (0.4 + m_p) / 0.4;
  if (t <= 0.05) return t;
  if (t <= 0.6) {
    if (as_printed) return slope_mid * t - (1.0 + slope_mid) * 0.05;
    return 0.05 + slope_mid * (t - 0.05);
  }
  return slope_hi * t + 1.0 - slope_hi;
}

double contamination_cp(double t, double m_p, bool as_printed) {
  if (as_printed) {
    // literal composite: warped-mean difference plus the linear drift term
    double h = warp_h(t, m_p, true);
    return mean_m(h) - mean_m(t) - (m_p / 20.0) * t;
  }
  // Default: the linear drift term only. The warped-mean difference is an
  // order of magnitude larger than the drift term under this mean function
  // and overwhelms the process noise at every severity level, which is
  // inconsistent with the phase-shift scenario being the *milder* of the
  // two contamination types; the drift term alone reproduces that ordering.
  return -(m_p / 20.0) * t;
}

ScenarioSpec scenario_table(int scenario, int severity) {
  static const double table_me[7] = {0.0, 0.0019, 0.0038, 0.0056, 0.0075, 0.0094, 0.0112};
  static const double table_mp[7] = {0.0, 0.025, 0.050, 0.075, 0.100, 0.125, 0.150};
  if (scenario != 1 && scenario != 2)
    throw std::invalid_argument("scenario_table: scenario must be 1 or 2");
  if (severity < 0 || severity > 6)
    throw std::invalid_argument("scenario_table: severity level must be in 0..6");
  ScenarioSpec spec;
  spec.scenario = scenario;
  spec.severity = severity;
  if (scenario == 1) {
    spec.b_e = 1;
    spec.m_e = table_me[severity];
  } else {
    spec.b_p = 1;
    spec.m_p = table_mp[severity];
  }
  return spec;
}

std::mt19937_64 unit_rng(uint64_t seed, uint64_t unit_index) {
  // splitmix64 over (seed, index) so unit streams are independent and
  // reproducible regardless of draw order.
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (unit_index + 1);
  auto mix = [](uint64_t v) {
    v += 0x9e3779b97f4a7c15ULL;
    v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
    v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
    return v ^ (v >> 31);
  };
  return std::mt19937_64(mix(mix(z)));
}

std::vector<DiscreteProfile> draw_unit(const GeneratorModel& model, const ScenarioSpec& spec,
                                       std::mt19937_64& rng, bool as_printed) {
  std::normal_distribution<double> std_normal(0.0, 1.0);
  Vector xi(model.n_eigen);
  for (int i = 0; i < model.n_eigen; ++i)
    xi[i] = std_normal(rng) * std::sqrt(model.eigenvalues[i]);

  std::vector<DiscreteProfile> unit(model.p);
  for (int l = 0; l < model.p; ++l) {
    DiscreteProfile& ch = unit[l];
    ch.channel = l + 1;
    ch.t = model.obs_grid;
    ch.y.resize(model.n_obs_points);
    for (int c = 0; c < model.n_obs_points; ++c) {
      double t = model.obs_grid[c];
      double v = mean_m(t);
      for (int i = 0; i < model.n_eigen; ++i)
        v += model.sigma * xi[i] * model.psi_obs[i](l, c);
      v += model.sigma_e * std_normal(rng);
      if (spec.b_e) v += contamination_ce(t, spec.m_e);
      if (spec.b_p) v += contamination_cp(t, spec.m_p, as_printed);
      ch.y[c] = v;
    }
  }
  return unit;
}

}  // namespace amfewma
