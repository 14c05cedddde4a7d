#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <vector>

#include "xxz/errors.hpp"
#include "xxz/params.hpp"

namespace xxz {

// Classification outcome for an r-string bound state.
struct StringSpec {
  int r = 0;
  bool exists = false;
  bool degenerate = false;       // a strict inequality hit an exact zero
  int delta = 0;                 // parity: string center line is s_r*R + i*delta*pi/2
  int kappa = 0;                 // floor((r-1) zeta / pi); meaningful for zeta < pi/2
  double s_r = 0.0;              // orientation sign of p_r' on the line (attached by the dressed layer)
  std::vector<int> uncovered;    // k-indices not covered by any w_p window (zeta < pi/2)
};

enum class StringStatus { allowed, forbidden, degenerate };

// zeta in (pi/2, pi): the r-string with parity s exists iff
// (-1)^s sin(k zeta) sin((r-k) zeta) > 0 for every k = 1..r-1.
inline StringStatus string_status_high(double zeta, int r, int s) {
  for (int k = 1; k < r; ++k) {
    const double f = std::sin(k * zeta) * std::sin((r - k) * zeta);
    if (std::abs(f) < 1e-12) return StringStatus::degenerate;
    if (((s % 2 == 0) ? f : -f) <= 0.0) return StringStatus::forbidden;
  }
  return StringStatus::allowed;
}

inline bool string_exists_high(double zeta, int r, int s) {
  const auto st = string_status_high(zeta, r, s);
  if (st == StringStatus::degenerate)
    throw numerical_error("string_exists_high: degenerate zero factor (rational zeta/pi edge)");
  return st == StringStatus::allowed;
}

// zeta in (0, pi/2): conditions indexed by windows w_p; k ranges over
// [w_p+1, w_{p+1}-1] intersected with [1, r-2]. r = 2 has a vacuous
// constraint set and always exists.
inline StringSpec string_exists_low(double zeta, int r) {
  StringSpec sp;
  sp.r = r;
  sp.kappa = static_cast<int>(std::floor((r - 1) * zeta / pi));
  sp.delta = ((sp.kappa % 2) + 2) % 2;
  if (r == 2) {
    sp.exists = true;
    return sp;
  }
  std::set<int> covered;
  bool ok = true;
  const double a = pi * zeta / (pi - zeta);
  for (int p = 0;; ++p) {
    auto w_of = [&](int pp) {
      return static_cast<int>(
          std::floor((pp - sp.kappa / 2.0 + (r - 1) * zeta / (2.0 * pi)) * pi / zeta));
    };
    const int w_p = w_of(p);
    const int w_p1 = w_of(p + 1);
    if (w_p > r - 2 && p > sp.kappa + 2) break;
    for (int k = std::max(w_p + 1, 1); k <= std::min(w_p1 - 1, r - 2); ++k) {
      covered.insert(k);
      const double f = std::sin(a * (k - p));
      const double g = std::sin(a * (r - k + p - sp.kappa - 1));
      if (std::abs(f * g) < 1e-12) {
        sp.degenerate = true;
        sp.exists = false;
        return sp;
      }
      if (((sp.kappa % 2 == 0) ? f * g : -f * g) <= 0.0) ok = false;
    }
    if (p > r + 4) break;
  }
  for (int k = 1; k <= r - 2; ++k)
    if (!covered.count(k)) sp.uncovered.push_back(k);
  sp.exists = ok;
  return sp;
}

// Regime dispatch for a single r. zeta = pi/2 exactly is the free-fermion
// point where no bound states are admitted.
inline StringSpec classify_string(double zeta, int r) {
  if (r < 2) throw validation_error("classify_string: r must be >= 2");
  if (std::abs(zeta - pi / 2) < 1e-14) {
    StringSpec sp;
    sp.r = r;
    return sp;
  }
  if (zeta < pi / 2) return string_exists_low(zeta, r);
  StringSpec sp;
  sp.r = r;
  for (int s : {0, 1}) {
    const auto st = string_status_high(zeta, r, s);
    if (st == StringStatus::degenerate) {
      sp.degenerate = true;
      sp.exists = false;
      return sp;
    }
    if (st == StringStatus::allowed) {
      sp.exists = true;
      sp.delta = s;
      return sp;
    }
  }
  return sp;
}

inline std::vector<StringSpec> allowed_strings(double zeta, int r_max_scan) {
  if (r_max_scan < 2) throw validation_error("allowed_strings: r_max_scan must be >= 2");
  std::vector<StringSpec> out;
  for (int r = 2; r <= r_max_scan; ++r) {
    StringSpec sp = classify_string(zeta, r);
    if (sp.exists) out.push_back(sp);
  }
  return out;
}

// Integer branch constants entering the r-string dressed momentum.
inline int ell_r(int r, double zeta) {
  return 1 - r + 2 * static_cast<int>(std::floor(r * zeta / (2.0 * pi)));
}

inline int m_r(int r, double zeta) {
  int m = 2 - r - (r == 1 ? 1 : 0);
  for (int sigma : {+1, -1})
    m += 2 * static_cast<int>(std::floor((r + sigma) * zeta / (2.0 * pi)));
  return m;
}

// Sign constant sgn(pi + 2 pi floor((r+sigma) zeta / 2 pi) - (r+sigma) zeta),
// with an exact-zero argument mapped to 0. Shared by the momentum indicator
// term and by the cut-jump shift below.
inline double branch_sign(int r, int sigma, double zeta) {
  const double arg = pi + 2.0 * pi * std::floor((r + sigma) * zeta / (2.0 * pi)) - (r + sigma) * zeta;
  if (std::abs(arg) < 1e-14) return 0.0;
  return arg > 0 ? 1.0 : -1.0;
}

// Umklapp shift picked up when a string rapidity crosses the momentum cut:
// u_r^sigma = -branch_sign(r, sigma, zeta) * (1 - delta_{sigma,-} delta_{r,1}).
inline int u_r_sigma(int r, int sigma, double zeta) {
  if (sigma < 0 && r == 1) return 0;
  const double s = branch_sign(r, sigma, zeta);
  return static_cast<int>(-s);
}

} // namespace xxz
