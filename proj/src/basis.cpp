#include "amfewma/basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amfewma {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (int i = 0; i < n; ++i) out[i] = a + (b - a) * i / (n - 1);
  return out;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Chebyshev-based initial guess, refined by Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

BasisSystem build_basis(int order, int n_basis) {
  if (order < 2) throw std::invalid_argument("build_basis: order must be >= 2");
  if (n_basis < order)
    throw std::invalid_argument("build_basis: n_basis must be >= order");
  BasisSystem b;
  b.order = order;
  int n_interior = n_basis - order;
  b.interior.resize(n_interior);
  for (int j = 0; j < n_interior; ++j)
    b.interior[j] = static_cast<double>(j + 1) / (n_interior + 1);
  b.knots.reserve(n_basis + order);
  b.knots.insert(b.knots.end(), order, b.t_min);
  b.knots.insert(b.knots.end(), b.interior.begin(), b.interior.end());
  b.knots.insert(b.knots.end(), order, b.t_max);
  return b;
}

namespace {

// Nonzero B-spline values/derivatives at x (the triangular scheme of
// de Boor; derivative part follows The NURBS Book, A2.3).
void basis_funs_deriv(const std::vector<double>& knots, int q, double x, int deriv,
                      int& first, std::vector<double>& out) {
  const int n_k = static_cast<int>(knots.size());
  const int K = n_k - q;
  double lo = knots[q - 1], hi = knots[n_k - q];
  if (x < lo) x = lo;
  if (x > hi) x = hi;
  int i;
  if (x >= hi) {
    i = n_k - q - 1;
  } else {
    i = static_cast<int>(
            std::upper_bound(knots.begin() + q - 1, knots.begin() + n_k - q, x) -
            knots.begin()) -
        1;
  }
  first = i - q + 1;
  (void)K;

  std::vector<double> left(q), right(q);
  std::vector<std::vector<double>> ndu(q, std::vector<double>(q));
  ndu[0][0] = 1.0;
  for (int j = 1; j < q; ++j) {
    left[j] = x - knots[i + 1 - j];
    right[j] = knots[i + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }
  out.assign(q, 0.0);
  if (deriv == 0) {
    for (int j = 0; j < q; ++j) out[j] = ndu[j][q - 1];
    return;
  }
  std::vector<std::vector<double>> ders(deriv + 1, std::vector<double>(q, 0.0));
  for (int j = 0; j < q; ++j) ders[0][j] = ndu[j][q - 1];
  for (int r = 0; r <= q - 1; ++r) {
    int s1 = 0, s2 = 1;
    std::vector<std::vector<double>> a(2, std::vector<double>(q, 0.0));
    a[0][0] = 1.0;
    for (int d = 1; d <= deriv; ++d) {
      double dv = 0.0;
      int rk = r - d, pk = q - 1 - d;
      if (r >= d) {
        double den = ndu[pk + 1][rk];
        a[s2][0] = (den == 0.0) ? 0.0 : a[s1][0] / den;
        dv = a[s2][0] * ndu[rk][pk];
      }
      for (int j = std::max(0, -rk); j <= std::min(d - 1, q - 1 - r); ++j) {
        if (j == 0 && r >= d) continue;
        double den = ndu[pk + 1][rk + j];
        a[s2][j] = (den == 0.0) ? 0.0 : (a[s1][j] - (j > 0 ? a[s1][j - 1] : 0.0)) / den;
        dv += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        double den = ndu[pk + 1][r];
        a[s2][d] = (den == 0.0) ? 0.0 : -a[s1][d - 1] / den;
        dv += a[s2][d] * ndu[r][pk];
      }
      ders[d][r] = dv;
      std::swap(s1, s2);
    }
  }
  double factor = static_cast<double>(q - 1);
  for (int d = 1; d <= deriv; ++d) {
    for (int j = 0; j < q; ++j) ders[d][j] *= factor;
    factor *= (q - 1 - d);
  }
  for (int j = 0; j < q; ++j) out[j] = ders[deriv][j];
}

}  // namespace

Matrix eval_basis(const BasisSystem& basis, std::span<const double> grid, int deriv) {
  const int K = basis.num_basis();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(grid.size()), K);
  std::vector<double> vals;
  const double eps = 1e-12;
  for (size_t r = 0; r < grid.size(); ++r) {
    double t = grid[r];
    if (t < basis.t_min - eps || t > basis.t_max + eps)
      throw std::invalid_argument("eval_basis: point outside domain");
    int first = 0;
    basis_funs_deriv(basis.knots, basis.order, t, deriv, first, vals);
    for (int j = 0; j < basis.order; ++j) {
      int col = first + j;
      if (col >= 0 && col < K) out(static_cast<Eigen::Index>(r), col) = vals[j];
    }
  }
  return out;
}

GramMatrices gram_matrices(const BasisSystem& basis, int d) {
  if (d >= basis.order)
    throw std::invalid_argument("gram_matrices: derivative order must be < spline order");
  const int K = basis.num_basis();
  GramMatrices g;
  g.deriv_order = d;
  g.W = Matrix::Zero(K, K);
  g.R = Matrix::Zero(K, K);

  // Knot spans with positive length; q+d Gauss-Legendre nodes are exact
  // for the piecewise-polynomial integrands.
  std::vector<double> nodes, weights;
  gauss_legendre(basis.order + d, nodes, weights);

  std::vector<double> breaks;
  breaks.push_back(basis.t_min);
  breaks.insert(breaks.end(), basis.interior.begin(), basis.interior.end());
  breaks.push_back(basis.t_max);

  std::vector<double> pts;
  for (size_t s = 0; s + 1 < breaks.size(); ++s) {
    double a = breaks[s], b = breaks[s + 1];
    double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    pts.clear();
    for (double x : nodes) pts.push_back(mid + half * x);
    Matrix phi = eval_basis(basis, pts, 0);
    Matrix phid = eval_basis(basis, pts, d);
    for (size_t i = 0; i < nodes.size(); ++i) {
      double w = weights[i] * half;
      g.W.noalias() += w * phi.row(i).transpose() * phi.row(i);
      g.R.noalias() += w * phid.row(i).transpose() * phid.row(i);
    }
  }
  // Symmetrize away roundoff.
  g.W = 0.5 * (g.W + g.W.transpose()).eval();
  g.R = 0.5 * (g.R + g.R.transpose()).eval();
  return g;
}

double inner_product(const CoefficientProfile& a, const CoefficientProfile& b,
                     const GramMatrices& grams) {
  if (a.coef.rows() != b.coef.rows() || a.coef.cols() != b.coef.cols() ||
      a.coef.cols() != grams.W.rows())
    throw std::invalid_argument("inner_product: dimension mismatch");
  double total = 0.0;
  for (Eigen::Index j = 0; j < a.coef.rows(); ++j)
    total += a.coef.row(j) * grams.W * b.coef.row(j).transpose();
  return total;
}

}  // namespace amfewma
