#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <utility>
#include <vector>

#include "xxz/dressed.hpp"
#include "xxz/errors.hpp"
#include "xxz/params.hpp"
#include "xxz/strings.hpp"

namespace xxz {

// Macroscopic excitation content: holes in the Fermi zone, r-string rapidities
// (r = 1 are the particles), Umklapp integers, and the operator pseudo-spin.
struct ExcitationY {
  CVec holes;
  std::map<int, CVec> strings;
  int ell_plus = 0;
  int ell_minus = 0;
  Operator op = Operator::sigma_z;

  int n_h() const { return static_cast<int>(holes.size()); }
  int n_r(int r) const {
    auto it = strings.find(r);
    return it == strings.end() ? 0 : static_cast<int>(it->second.size());
  }
  int string_content() const {
    int s = 0;
    for (const auto& [r, nu] : strings) s += r * static_cast<int>(nu.size());
    return s;
  }
  int ell(int upsilon) const { return upsilon > 0 ? ell_plus : ell_minus; }

  // n_h = ell_+ + ell_- + sum_r r n_r must hold for a physical descriptor.
  void validate() const {
    if (n_h() != ell_plus + ell_minus + string_content())
      throw validation_error("ExcitationY: hole count does not balance Umklapp and string content");
    for (const auto& [r, nu] : strings) {
      (void)nu;
      if (r < 1) throw validation_error("ExcitationY: string index r must be >= 1");
    }
  }
};

// The shift exponent omega -> theta(omega|Y): dressed-phase sums over the
// excitation content plus the operator-charge term. Solving the phase
// equations once per rapidity makes repeated omega evaluations cheap.
class ShiftFunction {
public:
  ShiftFunction(const ThermoState& st, const ExcitationY& Y) : st_(&st) {
    Y.validate();
    sgam_half_ = 0.5 * pseudo_spin(Y.op);
    for (int a = 0; a < Y.n_h(); ++a)
      terms_.push_back({1, Y.holes[a], +1.0, st.phi_solve(1, Y.holes[a])});
    for (const auto& [r, nu] : Y.strings)
      for (int a = 0; a < nu.size(); ++a) terms_.push_back({r, nu[a], -1.0, st.phi_solve(r, nu[a])});
    const double q = st.grid.q;
    if (Y.ell_plus != 0)
      terms_.push_back({1, Cplx(q, 0.0), -static_cast<double>(Y.ell_plus), st.phi_solve(1, Cplx(q, 0.0))});
    if (Y.ell_minus != 0)
      terms_.push_back({1, Cplx(-q, 0.0), -static_cast<double>(Y.ell_minus), st.phi_solve(1, Cplx(-q, 0.0))});
  }

  Cplx operator()(Cplx omega) const {
    Cplx v = sgam_half_ * st_->eval_Z(omega);
    for (const auto& t : terms_) v += t.weight * st_->phi_at(omega, t.r, t.mu, t.sol);
    return v;
  }

private:
  struct Term {
    int r;
    Cplx mu;
    double weight;
    CVec sol;
  };
  const ThermoState* st_;
  double sgam_half_ = 0.0;
  std::vector<Term> terms_;
};

inline Cplx excitation_energy(const ThermoState& st, const ExcitationY& Y) {
  Y.validate();
  Cplx e{};
  for (const auto& [r, nu] : Y.strings)
    for (int a = 0; a < nu.size(); ++a) e += st.eps_r(nu[a], r);
  for (int a = 0; a < Y.n_h(); ++a) e -= st.eval_eps1(Y.holes[a]);
  return e;
}

// Massive part of the momentum; with_umklapp adds the Fermi-momentum term
// sum_upsilon upsilon ell_upsilon p_F.
inline Cplx excitation_momentum(const ThermoState& st, const ExcitationY& Y,
                                bool with_umklapp = false) {
  Y.validate();
  Cplx p{};
  for (const auto& [r, nu] : Y.strings)
    for (int a = 0; a < nu.size(); ++a) p += st.p_r(nu[a], r);
  for (int a = 0; a < Y.n_h(); ++a) p -= st.p_r(Y.holes[a], 1);
  if (with_umklapp) p += static_cast<double>(Y.ell_plus - Y.ell_minus) * st.fermi.p_F;
  return p;
}

// U(Y, v) with u_r(lambda, v) = p_r(lambda) - eps_r(lambda)/v; the ray
// velocity v = m/t must be nonzero (the static case goes through the
// momentum-only phase).
inline Cplx reduced_U(const ThermoState& st, const ExcitationY& Y, double v) {
  if (v == 0.0) throw validation_error("reduced_U: zero ray velocity");
  Y.validate();
  Cplx u{};
  for (const auto& [r, nu] : Y.strings)
    for (int a = 0; a < nu.size(); ++a) u += st.p_r(nu[a], r) - st.eps_r(nu[a], r) / v;
  for (int a = 0; a < Y.n_h(); ++a)
    u -= st.p_r(Y.holes[a], 1) - st.eval_eps1(Y.holes[a]) / v;
  u += static_cast<double>(Y.ell_plus - Y.ell_minus) * st.fermi.p_F;
  return u;
}

struct CriticalExponents {
  Cplx theta_plus, theta_minus;
  Cplx Delta_plus, Delta_minus;
};

inline CriticalExponents critical_exponents(const ThermoState& st, const ExcitationY& Y,
                                            const ShiftFunction& shift) {
  const double q = st.grid.q;
  CriticalExponents ce;
  ce.theta_plus = shift(Cplx(q, 0.0)) - static_cast<double>(Y.ell_plus);
  ce.theta_minus = shift(Cplx(-q, 0.0)) + static_cast<double>(Y.ell_minus);
  ce.Delta_plus = ce.theta_plus * ce.theta_plus;
  ce.Delta_minus = ce.theta_minus * ce.theta_minus;
  return ce;
}

inline CriticalExponents critical_exponents(const ThermoState& st, const ExcitationY& Y) {
  return critical_exponents(st, Y, ShiftFunction(st, Y));
}

// Singular prefactor of the form-factor density: Fermi-endpoint powers with
// excitation-dependent exponents, Umklapp powers, Vandermonde products over
// holes and particles, and the squared particle-hole cross denominator. All
// complex powers take the principal branch factor by factor.
inline Cplx singular_D(const ThermoState& st, const ExcitationY& Y, const ShiftFunction& shift) {
  Y.validate();
  const double q = st.grid.q;
  const CVec empty(0);
  auto it1 = Y.strings.find(1);
  const CVec& nu = (it1 == Y.strings.end()) ? empty : it1->second;
  const CVec& mu = Y.holes;
  const int n1 = static_cast<int>(nu.size());
  const int nh = static_cast<int>(mu.size());

  auto guard = [&](Cplx denom, const char* what) {
    if (std::abs(denom) < 1e-13)
      throw numerical_error(std::string("singular_D: coincidence with ") + what);
  };

  Cplx D(1.0, 0.0);
  for (int a = 0; a < n1; ++a) {
    guard(nu[a] - q, "a particle at +q");
    D *= std::pow((nu[a] + q) / (nu[a] - q), 2.0 * shift(nu[a]));
  }
  for (int a = 0; a < nh; ++a) {
    guard(mu[a] + q, "a hole at -q");
    D *= std::pow((mu[a] - q) / (mu[a] + q), 2.0 * shift(mu[a]));
  }
  for (int upsilon : {+1, -1}) {
    const int l = Y.ell(upsilon);
    if (l == 0) continue;
    Cplx ratio(1.0, 0.0);
    for (int a = 0; a < n1; ++a) ratio *= nu[a] - upsilon * q;
    for (int a = 0; a < nh; ++a) {
      guard(mu[a] - upsilon * q, "a hole at a Fermi endpoint");
      ratio /= mu[a] - upsilon * q;
    }
    D *= std::pow(ratio, 2.0 * l);
  }
  for (int a = 0; a < nh; ++a)
    for (int b = 0; b < nh; ++b)
      if (a != b) D *= mu[a] - mu[b];
  for (int a = 0; a < n1; ++a)
    for (int b = 0; b < n1; ++b)
      if (a != b) D *= nu[a] - nu[b];
  for (int a = 0; a < n1; ++a)
    for (int b = 0; b < nh; ++b) {
      guard(nu[a] - mu[b], "a particle-hole collision");
      D /= (nu[a] - mu[b]) * (nu[a] - mu[b]);
    }
  return D;
}

inline Cplx singular_D(const ThermoState& st, const ExcitationY& Y) {
  return singular_D(st, Y, ShiftFunction(st, Y));
}

// Vandermonde product over ordered pairs of each bound-state family r >= 2;
// multiplies the regular density in the full form-factor decomposition.
inline Cplx string_vandermonde(const ExcitationY& Y) {
  Cplx v(1.0, 0.0);
  for (const auto& [r, nu] : Y.strings) {
    if (r < 2) continue;
    const int m = static_cast<int>(nu.size());
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        if (a != b) v *= nu[a] - nu[b];
  }
  return v;
}

// Companion descriptor across the string-momentum cut: crossing the cut ray
// attached to an s-string with orientation sigma shifts the Umklapp integers
// by ell_upsilon -> ell_upsilon + upsilon u_s^sigma.
inline ExcitationY jump_shifted_Y(const ExcitationY& Y, int s, int sigma, double zeta) {
  ExcitationY out = Y;
  const int u = u_r_sigma(s, sigma, zeta);
  out.ell_plus += u;
  out.ell_minus -= u;
  return out;
}

} // namespace xxz
