#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <tuple>
#include <vector>

#include "xxz/errors.hpp"
#include "xxz/params.hpp"
#include "xxz/quadrature.hpp"

namespace xxz {

// Reduce an angle to the principal strip [0, pi): all kernel/phase functions
// are pi-periodic in their angle argument.
inline double hat_eta(double eta) { return eta - pi * std::floor(eta / pi); }

// Even kernel K(lambda|eta) = sin(2 eta) / (2 pi sinh(lambda + i eta) sinh(lambda - i eta)).
// The product of sinh factors equals sinh^2(lambda) + sin^2(eta) for complex
// lambda as well, so a single formula serves both scalar types.
inline double kernel_K(double lam, double eta) {
  const double sh = std::sinh(lam);
  return std::sin(2.0 * eta) / (2.0 * pi * (sh * sh + std::pow(std::sin(eta), 2)));
}

inline Cplx kernel_K(Cplx lam, double eta) {
  const Cplx sh = std::sinh(lam);
  const Cplx den = 2.0 * pi * (sh * sh + std::pow(std::sin(eta), 2));
  if (std::abs(den) < 1e-12) throw numerical_error("kernel_K: evaluation at a kernel pole");
  return std::sin(2.0 * eta) / den;
}

// d/dlambda of K.
inline double kernel_Kp(double lam, double eta) {
  const double s = std::pow(std::sinh(lam), 2) + std::pow(std::sin(eta), 2);
  return -std::sin(2.0 * eta) * std::sinh(2.0 * lam) / (2.0 * pi * s * s);
}

inline Cplx kernel_Kp(Cplx lam, double eta) {
  const Cplx s = std::sinh(lam) * std::sinh(lam) + std::pow(std::sin(eta), 2);
  return -std::sin(2.0 * eta) * std::sinh(2.0 * lam) / (2.0 * pi * s * s);
}

// Bound-state kernel K_r = K(.|zeta (r+1)/2) + K(.|zeta (r-1)/2); the r = 1
// case keeps only the first term (the second angle degenerates to 0 where K
// vanishes identically).
template <class T>
T kernel_Kr(T lam, int r, double zeta) {
  T v = kernel_K(lam, zeta * (r + 1) / 2.0);
  if (r >= 2) v += kernel_K(lam, zeta * (r - 1) / 2.0);
  return v;
}

// Bare phase on the real axis: theta(lambda|eta) = 2 atan(cot(hat eta) tanh lambda).
inline double bare_theta_real(double lam, double eta) {
  const double he = hat_eta(eta);
  if (he < 1e-12) throw validation_error("bare_theta_real: eta is a multiple of pi");
  return 2.0 * std::atan(std::cos(he) / std::sin(he) * std::tanh(lam));
}

// Complex bare phase theta(lambda|eta) = 2 pi * integral of K over the
// two-leg path [0, i Im lambda] followed by [i Im lambda, lambda]. Kernel
// poles sit on the imaginary axis at ordinates {hat eta + k pi, pi - hat eta + k pi};
// the vertical leg detours around them by left semicircles. The integrand is
// regulated by the symmetric average of +-eps_avoid argument shifts, whose
// bias is O(eps^2) and which commutes with lambda -> -conj(lambda); when the
// path passes within 1e-3 of a pole the value is additionally
// Richardson-extrapolated in eps_avoid (two evaluations, eps and eps/2).
//
// Batched evaluation: theta_line(Y, re, eta) returns theta(re_j + i Y | eta)
// for many real parts at a fixed height. The vertical-leg integral is computed
// once per (Y, eta, eps) and cached; the horizontal leg accumulates
// incrementally over the sorted real parts.
class ThetaEvaluator {
public:
  explicit ThetaEvaluator(double eps_avoid = 1e-8) : eps0_(eps_avoid) {}

  CVec theta_line(double Y, const Vec& re, double eta) {
    const double he = hat_eta(eta);
    const int n = static_cast<int>(re.size());
    CVec out(n);
    if (std::abs(std::sin(2.0 * he)) < 1e-14 && he > 1e-12) {
      // eta = pi/2 mod pi: the kernel vanishes identically and so does theta.
      out.setZero();
      return out;
    }
    if (he < 1e-12) throw validation_error("theta_line: eta is a multiple of pi");
    if (std::abs(Y) < 1e-14) {
      for (int j = 0; j < n; ++j) out[j] = bare_theta_real(re[j], eta);
      return out;
    }
    for (int k = 0; k < 6; ++k) {
      const double ray = (k % 2 == 0) ? he + (k / 2) * pi : pi - he + (k / 2) * pi;
      if (std::abs(std::abs(Y) - ray) < 1e-9)
        throw validation_error("theta_line: Im(lambda) lies on a kernel pole ray");
    }
    const bool close = path_near_pole(Y, he);
    CVec v1 = line_at_eps(Y, re, eta, he, eps0_);
    if (!close) return v1;
    CVec v2 = line_at_eps(Y, re, eta, he, 0.5 * eps0_);
    return 2.0 * v2 - v1;
  }

  Cplx theta(Cplx lam, double eta) {
    Vec re(1);
    re[0] = lam.real();
    return theta_line(lam.imag(), re, eta)[0];
  }

  // theta_r = theta(.|zeta (r+1)/2) + theta(.|zeta (r-1)/2); r = 1 keeps only
  // the first term. (The eta -> 0 limit of theta is a step of size pi, not 0,
  // so the generic two-term formula must not be used at r = 1.)
  CVec theta_r_line(double Y, const Vec& re, int r, double zeta) {
    CVec v = theta_line(Y, re, zeta * (r + 1) / 2.0);
    if (r >= 2) v += theta_line(Y, re, zeta * (r - 1) / 2.0);
    return v;
  }

  Cplx theta_r(Cplx lam, int r, double zeta) {
    Vec re(1);
    re[0] = lam.real();
    return theta_r_line(lam.imag(), re, r, zeta)[0];
  }

private:
  double eps0_;
  // Vertical-leg integral cache keyed by (Y, eta, eps).
  std::map<std::tuple<double, double, double>, Cplx> vcache_;

  static std::vector<double> pole_ordinates(double he, double upto) {
    std::vector<double> ords;
    for (double base : {he, pi - he}) {
      for (double y = base; y < upto; y += pi) ords.push_back(y);
    }
    std::sort(ords.begin(), ords.end());
    return ords;
  }

  // Integral of dz/z along the straight segment from ap to bp, with the
  // branch followed continuously (principal logs corrected for a crossing of
  // the negative real axis).
  static Cplx log_diff(Cplx ap, Cplx bp) {
    Cplx d = std::log(bp) - std::log(ap);
    const double ia = ap.imag(), ib = bp.imag();
    if (ia < 0.0 && ib >= 0.0) {
      const double t = -ia / (ib - ia);
      if (ap.real() + t * (bp.real() - ap.real()) < 0.0) d -= Cplx(0.0, 2.0 * pi);
    } else if (ia >= 0.0 && ib < 0.0) {
      const double t = ia / (ia - ib);
      if (ap.real() + t * (bp.real() - ap.real()) < 0.0) d += Cplx(0.0, 2.0 * pi);
    }
    return d;
  }

  // Integrate the symmetrized regulated kernel (K(mu - eps) + K(mu + eps))/2
  // along the straight segment [a, b]. The symmetric average keeps the
  // regulator bias at O(eps^2) and commutes exactly with the reflection
  // lambda -> -conj(lambda), so dressed quantities stay odd/even to machine
  // precision. Kernel poles within reach of the segment are removed by exact
  // residue subtraction and reinstated through closed-form logarithms, which
  // keeps the quadrature smooth no matter how close the segment comes to a
  // pole.
  Cplx straight(Cplx a, Cplx b, double eta, double he, double eps) const {
    const Cplx dir = b - a;
    const double len = std::abs(dir);
    if (len < 1e-15) return Cplx(0.0, 0.0);
    struct Pole {
      Cplx z, R;
    };
    std::vector<Pole> nearby;
    const double lo = std::min(a.imag(), b.imag()) - 0.6;
    const double hi = std::max(a.imag(), b.imag()) + 0.6;
    // The two ordinate families {he + k pi} and {pi - he + k pi} over all
    // integer k already cover the negative ordinates.
    for (double base : {he, pi - he}) {
      for (int k = -4; k <= 4; ++k) {
        const double y = base + k * pi;
        if (y < lo || y > hi) continue;
        const Cplx res = std::sin(2.0 * he) / (2.0 * pi * std::sinh(2.0 * Cplx(0.0, y)));
        for (double se : {eps, -eps}) {
          const Cplx zp(se, y);
          double t = ((zp - a) * std::conj(dir)).real() / (len * len);
          t = std::clamp(t, 0.0, 1.0);
          if (std::abs(a + t * dir - zp) > 0.05) continue;
          nearby.push_back({zp, 0.5 * res});
        }
      }
    }
    Cplx total = integrate_line(
        [&](double t) {
          const Cplx mu = a + t * dir;
          Cplx v = 0.5 * (kernel_K(mu - eps, eta) + kernel_K(mu + eps, eta));
          for (const auto& p : nearby) v -= p.R / (mu - p.z);
          return v * dir;
        },
        0.0, 1.0);
    for (const auto& p : nearby) total += p.R * log_diff(a - p.z, b - p.z);
    return total;
  }

  // True when either the detour arcs or the horizontal leg come within 1e-3
  // of a kernel pole, which makes the eps shift matter at the 1e-8 scale.
  static bool path_near_pole(double Y, double he) {
    const double aY = std::abs(Y);
    double rho = 0.2;
    auto ords = pole_ordinates(he, aY - 1e-12);
    for (double y : ords)
      if (rho > std::min(y, aY - y) * 0.9) rho = std::min(y, aY - y) * 0.5;
    if (!ords.empty() && rho < 1e-3) return true;
    for (double base : {he, pi - he})
      for (double y = base; y < aY + pi; y += pi)
        if (std::abs(aY - y) < 1e-3) return true;
    return false;
  }

  Cplx vertical(double Y, double eta, double he, double eps) {
    const auto key = std::make_tuple(Y, eta, eps);
    auto it = vcache_.find(key);
    if (it != vcache_.end()) return it->second;

    const double aY = std::abs(Y);
    const double sgn = (Y > 0) ? 1.0 : -1.0;
    auto ords = pole_ordinates(he, aY - 1e-12);
    double rho = 0.2;
    for (double y : ords)
      if (rho > std::min(y, aY - y) * 0.9) rho = std::min(y, aY - y) * 0.5;

    Cplx total(0.0, 0.0);
    double prev = 0.0;
    auto seg = [&](double t0, double t1) {
      if (t1 - t0 < 1e-15) return;
      total += straight(Cplx(0.0, sgn * t0), Cplx(0.0, sgn * t1), eta, he, eps);
    };
    for (double y : ords) {
      seg(prev, y - rho);
      // Left semicircle around i*sgn*y, swept from angle -pi/2 through -pi to
      // -3pi/2 (mirrored for Y < 0 by the sgn factor in the parametrization).
      const Cplx c(0.0, sgn * y);
      total += integrate_line(
          [&](double phi) {
            const Cplx e = std::exp(Cplx(0.0, sgn * phi));
            const Cplx mu = c + rho * e;
            const Cplx dmu = Cplx(0.0, sgn) * rho * e;
            return 0.5 * (kernel_K(mu - eps, eta) + kernel_K(mu + eps, eta)) * dmu;
          },
          -0.5 * pi, -1.5 * pi);
      prev = y + rho;
    }
    seg(prev, aY);
    vcache_.emplace(key, total);
    return total;
  }

  CVec line_at_eps(double Y, const Vec& re, double eta, double he, double eps) {
    const Cplx vert = vertical(Y, eta, he, eps);
    const int n = static_cast<int>(re.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return re[a] < re[b]; });

    auto horiz = [&](double a, double b) -> Cplx {
      if (std::abs(b - a) < 1e-15) return Cplx(0.0, 0.0);
      return straight(Cplx(a, Y), Cplx(b, Y), eta, he, eps);
    };

    // Accumulate H(b) = int_0^b K(s + iY - eps) ds incrementally over the
    // sorted real parts, sweeping right from 0 and left from 0.
    CVec H(n);
    int first_pos = 0;
    while (first_pos < n && re[idx[first_pos]] < 0.0) ++first_pos;
    double anchor = 0.0;
    Cplx acc(0.0, 0.0);
    for (int k = first_pos; k < n; ++k) {
      const double b = re[idx[k]];
      acc += horiz(anchor, b);
      anchor = b;
      H[idx[k]] = acc;
    }
    anchor = 0.0;
    acc = Cplx(0.0, 0.0);
    for (int k = first_pos - 1; k >= 0; --k) {
      const double b = re[idx[k]];
      acc += horiz(anchor, b);
      anchor = b;
      H[idx[k]] = acc;
    }
    CVec out(n);
    for (int j = 0; j < n; ++j) out[j] = 2.0 * pi * (vert + H[j]);
    return out;
  }
};

// Convenience wrappers for one-off real-axis evaluations.
inline double bare_theta_r_real(double lam, int r, double zeta) {
  double v = bare_theta_real(lam, zeta * (r + 1) / 2.0);
  if (r >= 2) v += bare_theta_real(lam, zeta * (r - 1) / 2.0);
  return v;
}

} // namespace xxz
