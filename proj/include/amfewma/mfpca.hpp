#pragma once

#include "amfewma/basis.hpp"

#include <span>
#include <string>
#include <vector>

namespace amfewma {

/// Multivariate functional PCA over basis coefficients.
struct MFPCAModel {
  BasisSystem basis;
  GramMatrices grams;
  int p = 0;
  Matrix mean;                         // p x K
  Vector eigenvalues;                  // all retained, sorted non-increasing, >= 0
  std::vector<Matrix> eigenfunctions;  // b_l coefficient matrices, p x K each
  int L = 0;                           // retained component count
  Vector cumulative_variance;          // fraction explained by first l components
  Matrix w_sqrt;                       // pK x pK, cached
  Matrix w_inv_sqrt;
};

/// Eigendecompose the sample covariance of W^{1/2}(c_i - cbar); retain the
/// smallest L whose cumulative explained variance reaches `variance_threshold`.
MFPCAModel fit_mfpca(std::span<const CoefficientProfile> sample, const BasisSystem& basis,
                     const GramMatrices& grams, double variance_threshold);

/// Centered scores xi_l = <psi_l, x - mu>_H for l = 1..L.
Vector project(const MFPCAModel& model, const CoefficientProfile& x);

/// mean + sum_l xi_l b_l.
CoefficientProfile reconstruct(const MFPCAModel& model, const Vector& scores);

/// Block-diagonal stacking of the per-channel Gram W.
Matrix block_diag_w(const Matrix& W, int p);

std::string serialize_mfpca(const MFPCAModel& model, uint64_t seed);
MFPCAModel deserialize_mfpca(const std::string& json_text);

}  // namespace amfewma
