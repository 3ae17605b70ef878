#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

namespace amfewma {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// B-spline basis on [0,1] with clamped boundary knots of multiplicity
/// `order` and equispaced interior breakpoints.
struct BasisSystem {
  int order = 4;                           // polynomial order q (degree q-1)
  std::vector<double> interior;            // interior breakpoints in (0,1)
  double t_min = 0.0;
  double t_max = 1.0;
  std::vector<double> knots;               // full clamped knot vector, size K + order

  int num_basis() const { return static_cast<int>(knots.size()) - order; }

  bool same_as(const BasisSystem& other) const {
    return order == other.order && knots == other.knots;
  }
};

/// Gram matrix W of the basis functions and roughness matrix R of their
/// d-th derivatives, both K x K.
struct GramMatrices {
  Matrix W;
  Matrix R;
  int deriv_order = 2;
};

/// One smoothed multivariate functional observation: p channels expressed
/// as rows of basis coefficients over a shared BasisSystem.
struct CoefficientProfile {
  std::string unit_id;
  Matrix coef;  // p x K
};

BasisSystem build_basis(int order, int n_basis);

/// Basis (or derivative) design matrix: row i = (phi_1^(d)(t_i), ..., phi_K^(d)(t_i)).
Matrix eval_basis(const BasisSystem& basis, std::span<const double> grid, int deriv = 0);

GramMatrices gram_matrices(const BasisSystem& basis, int d = 2);

/// Inner product of H: sum over channels of a_j^T W b_j.
double inner_product(const CoefficientProfile& a, const CoefficientProfile& b,
                     const GramMatrices& grams);

/// Gauss-Legendre nodes/weights on [-1,1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Equispaced grid of n points spanning [a,b] inclusive.
std::vector<double> linspace(double a, double b, int n);

}  // namespace amfewma
