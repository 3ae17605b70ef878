#include "amfewma/mfpca.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace amfewma {

Matrix block_diag_w(const Matrix& W, int p) {
  const Eigen::Index K = W.rows();
  Matrix out = Matrix::Zero(p * K, p * K);
  for (int j = 0; j < p; ++j) out.block(j * K, j * K, K, K) = W;
  return out;
}

namespace {

// Symmetric square root with tiny negative eigenvalues clamped to zero.
void sqrt_factors(const Matrix& W, Matrix& w_sqrt, Matrix& w_inv_sqrt) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(W);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("mfpca: eigendecomposition of W failed");
  Vector d = es.eigenvalues();
  Vector ds = d, dis = d;
  const double floor = 1e-14 * d.maxCoeff();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    double v = std::max(d[i], 0.0);
    ds[i] = std::sqrt(v);
    dis[i] = v > floor ? 1.0 / std::sqrt(v) : 0.0;
  }
  w_sqrt = es.eigenvectors() * ds.asDiagonal() * es.eigenvectors().transpose();
  w_inv_sqrt = es.eigenvectors() * dis.asDiagonal() * es.eigenvectors().transpose();
}

Vector stack(const Matrix& coef) {
  const Eigen::Index p = coef.rows(), K = coef.cols();
  Vector v(p * K);
  for (Eigen::Index j = 0; j < p; ++j) v.segment(j * K, K) = coef.row(j).transpose();
  return v;
}

Matrix unstack(const Vector& v, int p, int K) {
  Matrix coef(p, K);
  for (int j = 0; j < p; ++j) coef.row(j) = v.segment(j * K, K).transpose();
  return coef;
}

}  // namespace

MFPCAModel fit_mfpca(std::span<const CoefficientProfile> sample, const BasisSystem& basis,
                     const GramMatrices& grams, double variance_threshold) {
  if (sample.size() < 2) throw std::invalid_argument("fit_mfpca: need at least 2 profiles");
  if (variance_threshold <= 0.0 || variance_threshold > 1.0)
    throw std::invalid_argument("fit_mfpca: variance threshold must be in (0,1]");
  const int p = static_cast<int>(sample.front().coef.rows());
  const int K = basis.num_basis();
  const Eigen::Index N = static_cast<Eigen::Index>(sample.size());

  MFPCAModel model;
  model.basis = basis;
  model.grams = grams;
  model.p = p;
  model.mean = Matrix::Zero(p, K);
  for (const auto& x : sample) {
    if (x.coef.rows() != p || x.coef.cols() != K)
      throw std::invalid_argument("fit_mfpca: inconsistent profile shapes");
    if (!x.coef.allFinite()) throw std::invalid_argument("fit_mfpca: non-finite coefficients");
    model.mean += x.coef;
  }
  model.mean /= static_cast<double>(N);

  Matrix w_block = block_diag_w(grams.W, p);
  sqrt_factors(w_block, model.w_sqrt, model.w_inv_sqrt);

  Matrix S = Matrix::Zero(p * K, p * K);
  for (const auto& x : sample) {
    Vector v = model.w_sqrt * stack(x.coef - model.mean);
    S.noalias() += v * v.transpose();
  }
  S /= static_cast<double>(N - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("fit_mfpca: eigendecomposition failed");

  const Eigen::Index dim = S.rows();
  Vector rho(dim);
  Matrix U(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {  // descending order
    rho[i] = std::max(es.eigenvalues()[dim - 1 - i], 0.0);
    U.col(i) = es.eigenvectors().col(dim - 1 - i);
  }

  const double total = rho.sum();
  model.cumulative_variance = Vector::Zero(dim);
  double cum = 0.0;
  int L = 1;
  for (Eigen::Index i = 0; i < dim; ++i) {
    cum += rho[i];
    model.cumulative_variance[i] = total > 0.0 ? cum / total : 1.0;
    if (total > 0.0 && model.cumulative_variance[i] < variance_threshold - 1e-12)
      L = static_cast<int>(i) + 2;
  }
  if (total == 0.0) L = 1;  // degenerate sample, keep one component by convention
  L = std::min<int>(L, static_cast<int>(dim));

  model.L = L;
  model.eigenvalues = rho.head(L);
  model.eigenfunctions.reserve(L);
  for (int l = 0; l < L; ++l) {
    Vector b = model.w_inv_sqrt * U.col(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      if (std::abs(b[i]) > 1e-9) {
        if (b[i] < 0.0) b = -b;
        break;
      }
    }
    model.eigenfunctions.push_back(unstack(b, p, K));
  }
  return model;
}

Vector project(const MFPCAModel& model, const CoefficientProfile& x) {
  if (x.coef.rows() != model.p || x.coef.cols() != model.basis.num_basis())
    throw std::invalid_argument("project: basis/shape mismatch");
  Matrix centered = x.coef - model.mean;
  Vector scores(model.L);
  for (int l = 0; l < model.L; ++l) {
    double s = 0.0;
    for (int j = 0; j < model.p; ++j)
      s += centered.row(j) * model.grams.W * model.eigenfunctions[l].row(j).transpose();
    scores[l] = s;
  }
  return scores;
}

CoefficientProfile reconstruct(const MFPCAModel& model, const Vector& scores) {
  if (scores.size() != model.L)
    throw std::invalid_argument("reconstruct: score length does not match L");
  CoefficientProfile out;
  out.coef = model.mean;
  for (int l = 0; l < model.L; ++l) out.coef += scores[l] * model.eigenfunctions[l];
  return out;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index r = static_cast<Eigen::Index>(j.size());
  const Eigen::Index c = r > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

}  // namespace

std::string serialize_mfpca(const MFPCAModel& model, uint64_t seed) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = "mfpca-model";
  j["seed"] = seed;
  j["basis"] = {{"order", model.basis.order}, {"n_basis", model.basis.num_basis()}};
  j["p"] = model.p;
  j["L"] = model.L;
  j["mean"] = matrix_to_json(model.mean);
  j["eigenvalues"] = std::vector<double>(model.eigenvalues.data(),
                                         model.eigenvalues.data() + model.eigenvalues.size());
  nlohmann::json efs = nlohmann::json::array();
  for (const auto& b : model.eigenfunctions) efs.push_back(matrix_to_json(b));
  j["eigenfunctions"] = efs;
  j["cumulative_variance"] = std::vector<double>(
      model.cumulative_variance.data(),
      model.cumulative_variance.data() + model.cumulative_variance.size());
  return j.dump(2);
}

MFPCAModel deserialize_mfpca(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  if (j.at("format_version").get<int>() != 1 || j.at("kind") != "mfpca-model")
    throw std::runtime_error("deserialize_mfpca: unsupported document");
  MFPCAModel model;
  model.basis = build_basis(j["basis"]["order"].get<int>(), j["basis"]["n_basis"].get<int>());
  model.grams = gram_matrices(model.basis, 2);
  model.p = j["p"].get<int>();
  model.L = j["L"].get<int>();
  model.mean = matrix_from_json(j["mean"]);
  auto ev = j["eigenvalues"].get<std::vector<double>>();
  model.eigenvalues = Eigen::Map<Vector>(ev.data(), static_cast<Eigen::Index>(ev.size()));
  for (const auto& e : j["eigenfunctions"]) model.eigenfunctions.push_back(matrix_from_json(e));
  auto cv = j["cumulative_variance"].get<std::vector<double>>();
  model.cumulative_variance = Eigen::Map<Vector>(cv.data(), static_cast<Eigen::Index>(cv.size()));
  Matrix w_block = block_diag_w(model.grams.W, model.p);
  sqrt_factors(w_block, model.w_sqrt, model.w_inv_sqrt);
  return model;
}

}  // namespace amfewma
