#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "xxz/errors.hpp"

namespace xxz {

using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using Cplx = std::complex<double>;

// Gauss-Legendre rule on [-1, 1] computed by the Golub-Welsch algorithm: the
// nodes are eigenvalues of the symmetric tridiagonal Jacobi matrix with zero
// diagonal and off-diagonal b_k = k / sqrt(4k^2 - 1); the weights are
// 2 * (first eigenvector component)^2.
struct GaussLegendre {
  Vec x;
  Vec w;
};

inline GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw validation_error("gauss_legendre: need n >= 1");
  if (n == 1) {
    GaussLegendre gl;
    gl.x = Vec::Zero(1);
    gl.w = Vec::Constant(1, 2.0);
    return gl;
  }
  Vec diag = Vec::Zero(n);
  Vec sub(n - 1);
  for (int k = 1; k < n; ++k) sub[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<Mat> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw numerical_error("gauss_legendre: eigensolver failed");
  GaussLegendre gl;
  gl.x = es.eigenvalues();
  gl.w = Vec(n);
  for (int j = 0; j < n; ++j) {
    const double v0 = es.eigenvectors()(0, j);
    gl.w[j] = 2.0 * v0 * v0;
  }
  return gl;
}

// Generalized Gauss-Laguerre rule for weight x^alpha e^{-x} on [0, inf),
// alpha > -1. Jacobi matrix: a_k = 2k + alpha + 1, b_k = sqrt(k (k + alpha));
// weights normalized to mu_0 = Gamma(alpha + 1).
inline GaussLegendre gauss_laguerre(int n, double alpha) {
  if (n < 1) throw validation_error("gauss_laguerre: need n >= 1");
  if (!(alpha > -1.0)) throw validation_error("gauss_laguerre: need alpha > -1");
  Vec diag(n), sub(std::max(0, n - 1));
  for (int k = 0; k < n; ++k) diag[k] = 2.0 * k + alpha + 1.0;
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(k * (k + alpha));
  Eigen::SelfAdjointEigenSolver<Mat> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw numerical_error("gauss_laguerre: eigensolver failed");
  GaussLegendre gl;
  gl.x = es.eigenvalues();
  gl.w = Vec(n);
  const double mu0 = std::tgamma(alpha + 1.0);
  for (int j = 0; j < n; ++j) {
    const double v0 = es.eigenvectors()(0, j);
    gl.w[j] = mu0 * v0 * v0;
  }
  return gl;
}

// Affine map of a [-1,1] rule to [a,b].
struct PanelRule {
  Vec x;
  Vec w;
};

inline PanelRule scaled_rule(const GaussLegendre& gl, double a, double b) {
  PanelRule r;
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  r.x = (gl.x.array() * half + mid).matrix();
  r.w = gl.w * half;
  return r;
}

// Barycentric weights for the Gauss-Legendre nodes (Wang-Xiang formula):
// lambda_j = (-1)^j sqrt((1 - x_j^2) w_j); any common scaling cancels in the
// barycentric ratio.
inline Vec barycentric_weights(const GaussLegendre& gl) {
  const int n = static_cast<int>(gl.x.size());
  Vec lam(n);
  for (int j = 0; j < n; ++j) {
    const double s = (j % 2 == 0) ? 1.0 : -1.0;
    lam[j] = s * std::sqrt((1.0 - gl.x[j] * gl.x[j]) * gl.w[j]);
  }
  return lam;
}

// Barycentric interpolation at t given nodes x, weights lam, values f.
// Exact at the nodes (returns the stored value).
template <class Scalar>
Scalar barycentric_eval(const Vec& x, const Vec& lam, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& f,
                        double t) {
  const int n = static_cast<int>(x.size());
  Scalar num = Scalar(0);
  double den = 0.0;
  for (int j = 0; j < n; ++j) {
    const double d = t - x[j];
    if (std::abs(d) < 1e-300) return f[j];
    const double c = lam[j] / d;
    num += c * f[j];
    den += c;
  }
  return num / den;
}

// Chebyshev machinery on [-1,1]: coefficients from values at the n+1
// Chebyshev-Lobatto points x_k = cos(pi k / n), and Clenshaw evaluation.
inline Vec chebyshev_lobatto(int n) {
  Vec x(n + 1);
  for (int k = 0; k <= n; ++k) x[k] = std::cos(M_PI * k / n);
  return x;
}

inline Vec chebyshev_coeffs_from_lobatto(const Vec& values) {
  const int n = static_cast<int>(values.size()) - 1;
  Vec c = Vec::Zero(n + 1);
  for (int j = 0; j <= n; ++j) {
    double acc = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double vk = values[k];
      const double fac = (k == 0 || k == n) ? 0.5 : 1.0;
      acc += fac * vk * std::cos(M_PI * j * k / n);
    }
    c[j] = 2.0 * acc / n;
    if (j == 0 || j == n) c[j] *= 0.5;
  }
  return c;
}

inline double chebyshev_eval(const Vec& c, double t) {
  // Clenshaw recurrence for sum c_j T_j(t), t in [-1,1].
  double b1 = 0.0, b2 = 0.0;
  for (int j = static_cast<int>(c.size()) - 1; j >= 1; --j) {
    const double b0 = 2.0 * t * b1 - b2 + c[j];
    b2 = b1;
    b1 = b0;
  }
  return t * b1 - b2 + c[0];
}

// Adaptive Gauss-Kronrod integration of a complex-valued function of a real
// variable over [a, b].
template <class F>
Cplx integrate_line(F&& f, double a, double b, double tol = 1e-12) {
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  Cplx val = gauss_kronrod<double, 31>::integrate(std::forward<F>(f), a, b, 12, tol, &err);
  if (!std::isfinite(val.real()) || !std::isfinite(val.imag()))
    throw numerical_error("integrate_line: non-finite result");
  return val;
}

// Graded panel boundaries for [a, b] when integrand features live at scale
// `scale` near one or both endpoints: panel lengths grow geometrically away
// from the refined ends. Returns ordered breakpoints including a and b.
inline std::vector<double> graded_panels(double a, double b, double scale, bool refine_left,
                                         bool refine_right) {
  std::vector<double> pts;
  pts.push_back(a);
  const double len = b - a;
  if (len <= 0) throw validation_error("graded_panels: need a < b");
  std::vector<double> left, right;
  if (refine_left) {
    for (double d = 2.0 * scale; d < 0.45 * len; d *= 3.0) left.push_back(a + d);
  }
  if (refine_right) {
    for (double d = 2.0 * scale; d < 0.45 * len; d *= 3.0) right.push_back(b - d);
  }
  for (double p : left) pts.push_back(p);
  for (auto it = right.rbegin(); it != right.rend(); ++it) pts.push_back(*it);
  pts.push_back(b);
  return pts;
}

} // namespace xxz
