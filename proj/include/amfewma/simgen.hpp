#pragma once

#include "amfewma/smoother.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace amfewma {

/// Karhunen-Loeve machinery for the synthetic multichannel process:
/// Bessel-kernel correlation within channels, 1/(1+|l-j|) cross-channel
/// coupling, eigenpairs tabulated on a quadrature grid.
struct GeneratorModel {
  int p = 5;
  int n_eigen = 10;          // retained eigenpairs L*
  double sigma = 0.002;      // process scale
  double sigma_e = 0.005;    // measurement noise sd
  int n_obs_points = 25;
  double rho = 0.125;        // Bessel correlation scale
  double nu = 0.0;

  std::vector<double> grid;            // quadrature grid
  std::vector<double> quad_weights;    // trapezoid weights
  Vector eigenvalues;                  // n_eigen, non-increasing
  std::vector<Matrix> eigenfunctions;  // n_eigen entries, p x |grid|
  std::vector<double> obs_grid;        // n_obs_points equispaced on [0,1]
  std::vector<Matrix> psi_obs;         // eigenfunctions interpolated to obs_grid
};

struct ScenarioSpec {
  int scenario = 1;
  int severity = 0;  // SL in 0..6
  double m_e = 0.0;
  double m_p = 0.0;
  int b_e = 0;
  int b_p = 0;
};

/// Series form of the order-nu Bessel correlation of the first kind at |z|/rho.
double bessel_corr(double z, double rho, double nu);

GeneratorModel build_generator(int p = 5, int n_eigen = 10, int grid_size = 200,
                               double rho = 0.125, double nu = 0.0);

/// Four-term DRC-shaped mean function.
double mean_m(double t);

/// Expulsion contamination: ramps the tail down after t = 0.5.
double contamination_ce(double t, double m_e);

/// Peak-time phase-shift contamination. `as_printed` keeps the literal
/// (discontinuous) middle branch of the time warp instead of the
/// continuity-corrected one.
double contamination_cp(double t, double m_p, bool as_printed = false);

/// Warped time used by contamination_cp.
double warp_h(double t, double m_p, bool as_printed = false);

ScenarioSpec scenario_table(int scenario, int severity);

/// One unit: p channels sampled at the 25-point grid.
std::vector<DiscreteProfile> draw_unit(const GeneratorModel& model, const ScenarioSpec& spec,
                                       std::mt19937_64& rng, bool as_printed = false);

/// Deterministic per-unit RNG substream.
std::mt19937_64 unit_rng(uint64_t seed, uint64_t unit_index);

}  // namespace amfewma
