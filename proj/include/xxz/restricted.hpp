#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "xxz/errors.hpp"
#include "xxz/excitations.hpp"
#include "xxz/params.hpp"
#include "xxz/quadrature.hpp"

namespace xxz {

// ---------------------------------------------------------------------------
// Barnes G function, log-scaled.
// ---------------------------------------------------------------------------

// Magnitude-and-sign representation of a real number x = sign * exp(log).
// A zero is encoded as {-inf, 0}.
struct LogSigned {
  double log = 0.0;
  double sign = 1.0;

  double value() const { return sign * std::exp(log); }
};

// Sign of Gamma(x) for real non-pole x: positive on (0, inf), alternating on
// the negative intervals (-n-1, -n).
inline double gamma_sign(double x) {
  if (x > 0.0) return 1.0;
  const long n = static_cast<long>(std::floor(-x));
  return (n % 2 == 0) ? -1.0 : 1.0;
}

namespace detail {

inline constexpr double zeta_prime_m1 = -0.16542114370045092;
inline constexpr double ln_2pi = 1.8378770664093453;

// ln G(z + 1) from the large-argument asymptotic series; accurate to full
// double precision for z >= 19. The series coefficients are
// B_{2k+2} / (2k (2k+1) (2k+2)) paired with increasing powers of 1/z^2.
inline double ln_barnes_G_asym(double zp1) {
  static constexpr double coef[] = {
      (-1.0 / 30.0) / 8.0,        (1.0 / 42.0) / 24.0,       (-1.0 / 30.0) / 48.0,
      (5.0 / 66.0) / 80.0,        (-691.0 / 2730.0) / 120.0, (7.0 / 6.0) / 168.0,
      (-3617.0 / 510.0) / 224.0,  (43867.0 / 798.0) / 288.0};
  const double z = zp1 - 1.0;
  const double lz = std::log(z);
  double s = (z * z / 2.0 - 1.0 / 12.0) * lz - 0.75 * z * z + 0.5 * z * ln_2pi + zeta_prime_m1;
  const double zz = z * z;
  double p = 1.0;
  for (double c : coef) {
    p *= zz;
    s += c / p;
  }
  return s;
}

} // namespace detail

// ln |G(z)| and the sign of G(z) for real z. The functional equation
// G(z+1) = Gamma(z) G(z) walks the argument up to the asymptotic regime; the
// zeros of G at nonpositive integers come out as {-inf, 0}.
inline LogSigned ln_barnes_G(double z) {
  if (!std::isfinite(z)) throw validation_error("ln_barnes_G: argument must be finite");
  if (z <= 0.0 && z == std::floor(z)) return {-std::numeric_limits<double>::infinity(), 0.0};
  const int n = std::max(0, static_cast<int>(std::ceil(20.0 - z)));
  double acc = 0.0;
  double sgn = 1.0;
  for (int j = 0; j < n; ++j) {
    acc += std::lgamma(z + j);
    sgn *= gamma_sign(z + j);
  }
  return {detail::ln_barnes_G_asym(z + n) - acc, sgn};
}

inline double barnes_G(double z) { return ln_barnes_G(z).value(); }

// G^2(1 + nu - ell) / G^2(1 + nu): the normalization carried by every
// restricted sum in the sector with particle-hole imbalance ell. The squares
// make the ratio sign-free.
inline double barnes_G_ratio(double nu, int ell) {
  const LogSigned a = ln_barnes_G(1.0 + nu - ell);
  const LogSigned b = ln_barnes_G(1.0 + nu);
  return std::exp(2.0 * (a.log - b.log));
}

// ---------------------------------------------------------------------------
// Discrete particle-hole configurations and their density.
// ---------------------------------------------------------------------------

// A configuration of massless-mode integers: strictly increasing nonnegative
// particle labels p_a and hole labels h_a.
struct DiscreteZ {
  std::vector<int> particles;
  std::vector<int> holes;

  int ell() const { return static_cast<int>(particles.size()) - static_cast<int>(holes.size()); }

  // Level of the configuration: sum of p_a plus sum of (h_a + 1). The phase
  // attached to a configuration in the restricted sum is e^{i theta J}.
  int level() const {
    int j = 0;
    for (int p : particles) j += p;
    for (int h : holes) j += h + 1;
    return j;
  }

  void validate() const {
    auto check = [](const std::vector<int>& v, const char* what) {
      for (std::size_t a = 0; a < v.size(); ++a) {
        if (v[a] < 0)
          throw validation_error(fmt::format("DiscreteZ: {} labels must be nonnegative", what));
        if (a > 0 && v[a] <= v[a - 1])
          throw validation_error(fmt::format("DiscreteZ: {} labels must strictly increase", what));
      }
    };
    check(particles, "particle");
    check(holes, "hole");
  }
};

// Density of a single discrete configuration:
//   (sin(pi nu)/pi)^{2 n_h} * Vdm^2(p) * Vdm^2(h) / prod (p_a + h_b + 1)^2
//   * prod Gamma^2(1+p_a+nu)/Gamma^2(1+p_a) * prod Gamma^2(1+h_a-nu)/Gamma^2(1+h_a).
// Accumulated in log space; every factor is squared so the result is >= 0.
inline double R_density(const DiscreteZ& Z, double nu) {
  Z.validate();
  const auto& P = Z.particles;
  const auto& H = Z.holes;
  const bool integer_nu = std::abs(nu - std::round(nu)) < 1e-12;
  const long n = static_cast<long>(std::llround(nu));
  double s = 0.0;
  for (std::size_t a = 0; a < P.size(); ++a)
    for (std::size_t b = a + 1; b < P.size(); ++b)
      s += 2.0 * std::log(std::abs(double(P[a] - P[b])));
  for (std::size_t a = 0; a < H.size(); ++a)
    for (std::size_t b = a + 1; b < H.size(); ++b)
      s += 2.0 * std::log(std::abs(double(H[a] - H[b])));
  for (int p : P)
    for (int h : H) s -= 2.0 * std::log(double(p + h + 1));
  for (int p : P) {
    if (integer_nu && 1 + p + n <= 0)
      throw numerical_error("R_density: Gamma pole at a nonpositive integer particle argument");
    s += 2.0 * (std::lgamma(1.0 + p + nu) - std::lgamma(1.0 + p));
  }
  if (integer_nu) {
    // (sin(pi nu)/pi)^2 Gamma^2(1+h-nu) -> 1/Gamma^2(nu-h) as nu -> integer:
    // zero for h >= nu, finite for h < nu.
    for (int h : H) {
      if (h >= n) return 0.0;
      s -= 2.0 * (std::lgamma(double(n - h)) + std::lgamma(1.0 + h));
    }
  } else {
    for (int h : H) s += 2.0 * (std::lgamma(1.0 + h - nu) - std::lgamma(1.0 + h));
    if (!H.empty())
      s += 2.0 * double(H.size()) * std::log(std::abs(std::sin(pi * nu)) / pi);
  }
  return std::exp(s);
}

// ---------------------------------------------------------------------------
// Level-resolved enumeration.
// ---------------------------------------------------------------------------

namespace detail {

// All strictly decreasing nonnegative integer n-tuples with sum <= budget,
// together with their sums. The empty tuple is the sole 0-tuple.
struct TupleSet {
  std::vector<std::vector<int>> rows;
  std::vector<int> sums;
};

inline TupleSet distinct_tuples(int n, int budget) {
  TupleSet out;
  if (budget < n * (n - 1) / 2) return out;
  if (n == 0) {
    out.rows.emplace_back();
    out.sums.push_back(0);
    return out;
  }
  std::vector<int> prefix;
  auto rec = [&](auto&& self, int k, int rem, int hi) -> void {
    if (k == 0) {
      out.rows.push_back(prefix);
      out.sums.push_back(std::accumulate(prefix.begin(), prefix.end(), 0));
      return;
    }
    const int lo_rest = (k - 1) * (k - 2) / 2; // least possible sum of the k-1 smaller parts
    for (int v = std::min(hi - 1, rem - lo_rest); v >= k - 1; --v) {
      prefix.push_back(v);
      self(self, k - 1, rem - v, v);
      prefix.pop_back();
    }
  };
  rec(rec, n, budget, budget + 1);
  return out;
}

// Log-density pieces split by species so that one enumeration serves several
// values of nu. `lg1p[k] = lgamma(1+k)` is shared; the nu-dependent tables are
// built per call.
inline Vec particle_parts(const TupleSet& P, double nu, const Vec& lg1p) {
  const int m = static_cast<int>(P.rows.size());
  Vec s = Vec::Zero(m);
  for (int i = 0; i < m; ++i) {
    const auto& row = P.rows[i];
    double acc = 0.0;
    for (std::size_t a = 0; a < row.size(); ++a)
      for (std::size_t b = a + 1; b < row.size(); ++b)
        acc += 2.0 * std::log(double(row[a] - row[b]));
    for (int p : row) acc += 2.0 * (std::lgamma(1.0 + p + nu) - lg1p[p]);
    s[i] = acc;
  }
  return s;
}

inline Vec hole_parts(const TupleSet& H, double nu, const Vec& lg1p) {
  const int m = static_cast<int>(H.rows.size());
  const double ln_sin = std::log(std::abs(std::sin(pi * nu)) / pi);
  Vec s = Vec::Zero(m);
  for (int i = 0; i < m; ++i) {
    const auto& row = H.rows[i];
    double acc = 0.0;
    for (std::size_t a = 0; a < row.size(); ++a)
      for (std::size_t b = a + 1; b < row.size(); ++b)
        acc += 2.0 * std::log(double(row[a] - row[b]));
    for (int h : row) acc += 2.0 * (std::lgamma(1.0 + h - nu) - lg1p[h]);
    if (!row.empty()) acc += 2.0 * double(row.size()) * ln_sin;
    s[i] = acc;
  }
  return s;
}

} // namespace detail

// S_J(nu) for J = 0..Jmax in the sector n_p - n_h = ell: the sum of R_density
// over all configurations at level J. Several nu values share one enumeration.
// Configurations are visited blocked by (n_h, sum p, sum h) in ascending order,
// so the reduction order is deterministic.
inline std::vector<Vec> shell_sums(int ell, int Jmax, const std::vector<double>& nus) {
  if (Jmax < 0) throw validation_error("shell_sums: Jmax must be nonnegative");
  std::vector<Vec> S(nus.size(), Vec::Zero(Jmax + 1));
  Vec lg1p(Jmax + 2);
  for (int k = 0; k <= Jmax + 1; ++k) lg1p[k] = std::lgamma(1.0 + k);
  Vec lnint(2 * Jmax + 3);
  for (int k = 1; k <= 2 * Jmax + 2; ++k) lnint[k] = std::log(double(k));

  for (int nh = 0;; ++nh) {
    const int np = nh + ell;
    if (np < 0) continue;
    const int base = np * (np - 1) / 2 + nh * (nh + 1) / 2;
    if (base > Jmax) break;
    const auto P = detail::distinct_tuples(np, Jmax - nh * (nh + 1) / 2);
    const auto H = detail::distinct_tuples(nh, Jmax - np * (np - 1) / 2 - nh);

    std::map<int, std::vector<int>> pgroups, hgroups;
    for (std::size_t i = 0; i < P.sums.size(); ++i) pgroups[P.sums[i]].push_back(int(i));
    for (std::size_t i = 0; i < H.sums.size(); ++i) hgroups[H.sums[i]].push_back(int(i));

    std::vector<Vec> pparts, hparts;
    pparts.reserve(nus.size());
    hparts.reserve(nus.size());
    for (double nu : nus) {
      pparts.push_back(detail::particle_parts(P, nu, lg1p));
      hparts.push_back(detail::hole_parts(H, nu, lg1p));
    }

    for (const auto& [s_p, ip] : pgroups) {
      for (const auto& [s_h, ih] : hgroups) {
        const int J = s_p + s_h + nh;
        if (J > Jmax) continue;
        for (int i : ip) {
          const auto& prow = P.rows[i];
          for (int j : ih) {
            const auto& hrow = H.rows[j];
            double cross = 0.0;
            for (int p : prow)
              for (int h : hrow) cross -= 2.0 * lnint[p + h + 1];
            for (std::size_t k = 0; k < nus.size(); ++k)
              S[k][J] += std::exp(pparts[k][i] + hparts[k][j] + cross);
          }
        }
      }
    }
  }
  return S;
}

// ---------------------------------------------------------------------------
// Tail-averaged evaluation of the phased level sum.
// ---------------------------------------------------------------------------

// Window length for averaging the partial sums of sum_J c_J e^{i theta J}:
// among W in [P, min(4P, (Jmax+1)/2)] with P = ceil(2 pi / theta), pick the
// one minimizing |sin(W theta / 2)| / W, which damps the residual oscillation
// of period 2 pi / theta the hardest.
inline int tuned_window(double theta, int Jmax) {
  const double th = std::abs(theta);
  if (!(th > 0.0)) throw validation_error("tuned_window: phase step must be nonzero");
  const int P = static_cast<int>(std::ceil(2.0 * pi / th));
  const int hi = std::min(4 * P, (Jmax + 1) / 2);
  if (P > hi)
    throw validation_error(
        fmt::format("tuned_window: cutoff {} too small for a tail window at phase {}", Jmax, theta));
  int best_w = P;
  double best = std::numeric_limits<double>::infinity();
  for (int W = P; W <= hi; ++W) {
    const double m = std::abs(std::sin(W * th / 2.0)) / W;
    if (m < best) {
      best = m;
      best_w = W;
    }
  }
  return best_w;
}

struct AveragedSum {
  Cplx averaged;  // tuned-window mean of the last partial sums
  Cplx plain;     // the raw partial sum at Jmax
  int window = 0;
};

inline AveragedSum averaged_sum(const Vec& coeffs, double theta, int Jmax) {
  if (coeffs.size() < Jmax + 1)
    throw validation_error("averaged_sum: coefficient table shorter than the cutoff");
  const int W = tuned_window(theta, Jmax);
  Cplx run = 0.0;
  Cplx acc = 0.0;
  for (int J = 0; J <= Jmax; ++J) {
    run += coeffs[J] * std::exp(Cplx(0.0, theta * J));
    if (J >= Jmax - W + 1) acc += run;
  }
  return {acc / double(W), run, W};
}

// ---------------------------------------------------------------------------
// The restricted-sum identity.
// ---------------------------------------------------------------------------

struct RestrictedSumConfig {
  double nu = 0.3;  // density parameter; non-integer unless probing nu = 0
  int ell = 0;      // particle-hole imbalance of the sector
  double L = 100.0; // chain length entering the (2 pi / L)^{nu^2} prefactor
  double x = 100.0; // phase numerator; the phase step is theta = x / L
  int p_cut = 60;   // largest admitted particle label
  int h_cut = 60;   // largest admitted hole label

  double theta() const { return x / L; }

  // Levels J <= min(p_cut, h_cut + 1) are complete under the box cutoffs, so
  // that is the usable level cutoff.
  int level_cutoff() const { return std::min(p_cut, h_cut + 1); }

  void validate() const {
    if (!(L > 0.0)) throw validation_error("restricted sum: L must be positive");
    if (p_cut < 0 || h_cut < 0) throw validation_error("restricted sum: cutoffs must be >= 0");
    const double r = nu - std::round(nu);
    if (nu != 0.0 && std::abs(r) < 1e-12)
      throw validation_error("restricted sum: nu must be non-integer (or exactly 0)");
  }
};

// Closed form: e^{i theta ell(ell-1)/2} ((2 pi / L)/(1 - e^{i theta}))^{nu^2},
// principal branch. The phase prefactor accounts for the lowest level
// J_min = ell(ell-1)/2 reachable in the sector.
inline Cplx restricted_sum_rhs(const RestrictedSumConfig& cfg) {
  cfg.validate();
  const double th = cfg.theta();
  const Cplx den = 1.0 - std::exp(Cplx(0.0, th));
  if (std::abs(den) < 1e-12)
    throw numerical_error("restricted_sum_rhs: phase step is a multiple of 2 pi; closed form diverges");
  const double jmin = 0.5 * double(cfg.ell) * double(cfg.ell - 1);
  return std::exp(Cplx(0.0, th * jmin)) *
         std::pow(Cplx(2.0 * pi / cfg.L, 0.0) / den, cfg.nu * cfg.nu);
}

struct RestrictedSumEval {
  Cplx lhs;       // tail-averaged enumeration
  Cplx plain;     // raw partial sum (diagnostic)
  Cplx rhs;       // closed form
  double rel_err; // |lhs - rhs| / |rhs|
  int window;     // tail-window length used
  int level_cutoff;
};

// Enumerates every configuration with p_a <= p_cut, h_a <= h_cut and
// n_p - n_h = ell up to the complete level cutoff, sums the phased densities
// with the Barnes normalization and the (2 pi / L)^{nu^2} prefactor, and
// tail-averages the partial sums to kill the truncation oscillation.
inline RestrictedSumEval restricted_sum_eval(const RestrictedSumConfig& cfg) {
  cfg.validate();
  const int Jmax = cfg.level_cutoff();
  const double nuR = cfg.nu - cfg.ell;
  const auto S = shell_sums(cfg.ell, Jmax, {nuR});
  const double pref =
      barnes_G_ratio(cfg.nu, cfg.ell) * std::pow(2.0 * pi / cfg.L, cfg.nu * cfg.nu);
  const auto avg = averaged_sum(S[0], cfg.theta(), Jmax);
  const Cplx lhs = pref * avg.averaged;
  const Cplx rhs = restricted_sum_rhs(cfg);
  return {lhs, pref * avg.plain, rhs, std::abs(lhs - rhs) / std::abs(rhs), avg.window, Jmax};
}

inline Cplx restricted_sum_lhs(const RestrictedSumConfig& cfg) {
  return restricted_sum_eval(cfg).lhs;
}

// ---------------------------------------------------------------------------
// Discrete form-factor leading factor and its large-distance closed form.
// ---------------------------------------------------------------------------

// Leading finite-size factor attached to the Fermi edge upsilon for a discrete
// configuration Z on top of the macroscopic excitation Y:
//   G^2(1 - u th - ell) / G^2(1 - u th) * R(Z | -u th - ell) * (2 pi / L)^{th^2},
// with th the edge shift exponent and u = upsilon. Derivative corrections are
// outside scope, so the factor is exact at zero derivative order.
inline double discrete_ff_leading(const ThermoState& st, const ExcitationY& Y, int ell,
                                  int upsilon, const DiscreteZ& Z, double L) {
  if (upsilon != 1 && upsilon != -1)
    throw validation_error("discrete_ff_leading: upsilon must be +1 or -1");
  if (!(L > 0.0)) throw validation_error("discrete_ff_leading: L must be positive");
  const CriticalExponents ce = critical_exponents(st, Y);
  const Cplx thc = upsilon > 0 ? ce.theta_plus : ce.theta_minus;
  if (std::abs(thc.imag()) > 1e-10)
    throw numerical_error("discrete_ff_leading: edge exponent has a nonreal part");
  const double th = thc.real();
  const double u = double(upsilon);
  const LogSigned a = ln_barnes_G(1.0 - u * th - ell);
  const LogSigned b = ln_barnes_G(1.0 - u * th);
  return std::exp(2.0 * (a.log - b.log)) * R_density(Z, -u * th - ell) *
         std::pow(2.0 * pi / L, th * th);
}

struct BLeadingResult {
  Cplx numeric;    // finite-L evaluation of the zero-channel leading factor
  Cplx closed;     // (-i m)^{-theta^2}, principal branch
  int window;      // tail-window length used by the enumeration
  bool regime_ok;  // delta |m| >= 1, the exponential-suppression regime
};

// Evaluates the all-zero channel of the light-cone factor at phase step
// 2 pi m / L through the restricted-sum identity and compares it against the
// closed-form power (-i m)^{-theta^2}; the two converge as L grows.
inline BLeadingResult B_leading_check(double m_ups, double delta, double theta_ups,
                                      double L = 800.0, int level_cut = 60) {
  if (m_ups == 0.0) throw validation_error("B_leading_check: m must be nonzero");
  const double th = 2.0 * pi * m_ups / L;
  const auto S = shell_sums(0, level_cut, {-theta_ups});
  const auto avg = averaged_sum(S[0], th, level_cut);
  const double t2 = theta_ups * theta_ups;
  const Cplx numeric = std::pow(2.0 * pi / L, t2) * avg.averaged;
  const Cplx closed = std::pow(Cplx(0.0, -m_ups), -t2);
  return {numeric, closed, avg.window, delta * std::abs(m_ups) >= 1.0};
}

} // namespace xxz
