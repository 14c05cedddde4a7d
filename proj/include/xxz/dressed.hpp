#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xxz/errors.hpp"
#include "xxz/kernels.hpp"
#include "xxz/params.hpp"
#include "xxz/quadrature.hpp"
#include "xxz/strings.hpp"

namespace xxz {

// Gauss-Legendre discretization of integrals over the Fermi zone [-q, q].
struct QuadGrid {
  int n = 0;
  double q = 0.0;
  Vec x, w;
};

struct FermiData {
  double q = 0.0;
  double p_F = 0.0;
  double v_F = 0.0;
};

// Chebyshev representation of a solved function on [-q, q]. Off-interval
// evaluation is delegated back to the solver (driving term minus quadrature
// of the stored interior solution), so this type only covers the interior.
struct DressedFn {
  std::string kind;
  int r = 1;
  double q = 0.0;
  Vec coef;

  double eval(double lam) const {
    if (std::abs(lam) > q * (1.0 + 1e-12))
      throw validation_error("DressedFn::eval: point outside [-q, q]");
    return chebyshev_eval(coef, std::clamp(lam / q, -1.0, 1.0));
  }

  // Resolution check: trailing coefficients must be negligible next to the
  // leading one.
  bool resolved(double rel = 1e-10) const {
    const double lead = coef.cwiseAbs().maxCoeff();
    const int n = static_cast<int>(coef.size());
    double tail = 0.0;
    for (int k = std::max(0, n - 3); k < n; ++k) tail = std::max(tail, std::abs(coef[k]));
    return tail < rel * lead;
  }
};

// Solved thermodynamic state: Fermi endpoint, Nystrom grid, and the grid
// values of epsilon_1, p_1', Z. All other dressed quantities evaluate through
// natural continuation of these three solutions.
class ThermoState {
public:
  ModelParams prm;
  int n = 0;
  QuadGrid grid;
  Mat A;
  Eigen::PartialPivLU<Mat> lu;
  Vec eps1, p1d, Zv;
  FermiData fermi;
  mutable ThetaEvaluator theta;

  explicit ThermoState(const ModelParams& p, int n_nodes = 128) : prm(p), n(n_nodes) {
    prm.validate();
    if (n < 32) throw validation_error("ThermoState: need at least 32 quadrature nodes");
    gl_ = gauss_legendre(n);
    const double q = find_fermi_q();
    build_grid(q);
    eps1 = lu.solve(driving_eps(grid.x));
    p1d = lu.solve((2.0 * pi * grid.x.unaryExpr([&](double t) {
                     return kernel_K(t, prm.zeta / 2.0);
                   })).eval());
    Zv = lu.solve(Vec::Ones(n).eval());
    if (std::abs(eval_eps1(grid.q)) > 1e-10 * (std::abs(prm.h) + prm.J))
      throw numerical_error("ThermoState: Fermi-point residual above tolerance");
    fermi.q = grid.q;
    fermi.p_F = p_r(Cplx(grid.q, 0.0), 1).real();
    fermi.v_F = eval_eps1_deriv(grid.q) / eval_p1d(grid.q);
    if (!(fermi.p_F > 0.0) || !(fermi.v_F > 0.0))
      throw numerical_error("ThermoState: Fermi momentum/velocity not positive");
  }

  // Rebuild from cached solution vectors (no solve, but refactor the system
  // matrix so phi solves still work).
  ThermoState(const ModelParams& p, int n_nodes, double q, Vec e1, Vec pd, Vec Z, FermiData fd)
      : prm(p), n(n_nodes), eps1(std::move(e1)), p1d(std::move(pd)), Zv(std::move(Z)), fermi(fd) {
    prm.validate();
    gl_ = gauss_legendre(n);
    build_grid(q);
  }

  // ---- driving terms -----------------------------------------------------
  template <class T>
  T driving_eps(T lam) const {
    return prm.h - 4.0 * pi * prm.J * std::sin(prm.zeta) * kernel_K(lam, prm.zeta / 2.0);
  }
  Vec driving_eps(const Vec& lam) const {
    return lam.unaryExpr([&](double t) { return driving_eps(t); });
  }

  // ---- natural continuation of the grid solutions ------------------------
  template <class T>
  T quad_K(T lam, const Vec& sol) const {
    T s{};
    for (int j = 0; j < n; ++j) s += grid.w[j] * kernel_K(lam - grid.x[j], prm.zeta) * sol[j];
    return s;
  }
  template <class T>
  Cplx quad_K(T lam, const CVec& sol) const {
    Cplx s{};
    for (int j = 0; j < n; ++j)
      s += grid.w[j] * kernel_K(Cplx(lam) - grid.x[j], prm.zeta) * sol[j];
    return s;
  }

  template <class T>
  T eval_eps1(T lam) const {
    return driving_eps(lam) - quad_K(lam, eps1);
  }
  template <class T>
  T eval_p1d(T lam) const {
    return 2.0 * pi * kernel_K(lam, prm.zeta / 2.0) - quad_K(lam, p1d);
  }
  template <class T>
  T eval_Z(T lam) const {
    return 1.0 - quad_K(lam, Zv);
  }
  template <class T>
  T eval_eps1_deriv(T lam) const {
    T s{};
    for (int j = 0; j < n; ++j) s += grid.w[j] * kernel_Kp(lam - grid.x[j], prm.zeta) * eps1[j];
    return -4.0 * pi * prm.J * std::sin(prm.zeta) * kernel_Kp(lam, prm.zeta / 2.0) - s;
  }

  // ---- r-string line functions -------------------------------------------
  template <class T>
  T eps_r(T lam, int r) const {
    T s{};
    for (int j = 0; j < n; ++j)
      s += grid.w[j] * kernel_Kr(lam - grid.x[j], r, prm.zeta) * eps1[j];
    return static_cast<double>(r) * prm.h -
           4.0 * pi * prm.J * std::sin(prm.zeta) * kernel_K(lam, r * prm.zeta / 2.0) - s;
  }
  template <class T>
  T p_r_deriv(T lam, int r) const {
    T s{};
    for (int j = 0; j < n; ++j)
      s += grid.w[j] * kernel_Kr(lam - grid.x[j], r, prm.zeta) * p1d[j];
    return 2.0 * pi * kernel_K(lam, r * prm.zeta / 2.0) - s;
  }

  // Dressed momentum p_r for any complex lambda (r = 1 included). Batched
  // variant evaluates many points at one height, sharing the bare-phase
  // vertical legs.
  CVec p_r_many(double Y, const Vec& re, int r) const {
    CVec t0 = theta.theta_line(Y, re, r * prm.zeta / 2.0);
    const int m = static_cast<int>(re.size());
    // theta_r(lam_i - x_j): all points share the height Y; flatten to one
    // sorted sweep per eta component.
    Vec flat(m * n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) flat[i * n + j] = re[i] - grid.x[j];
    CVec tr = theta.theta_r_line(Y, flat, r, prm.zeta);
    CVec out(m);
    for (int i = 0; i < m; ++i) {
      Cplx acc{};
      for (int j = 0; j < n; ++j) acc += grid.w[j] * tr[i * n + j] * p1d[j];
      out[i] = t0[i] - acc / (2.0 * pi) + pi * ell_r(r, prm.zeta) +
               fermi.p_F * m_r(r, prm.zeta) + indicator_term(Y, r);
    }
    return out;
  }

  Cplx p_r(Cplx lam, int r) const {
    Vec re(1);
    re[0] = lam.real();
    return p_r_many(lam.imag(), re, r)[0];
  }

  // Integral route for p_1 (cross-check): integrate the natural p_1' from 0.
  double p1_integral(double lam) const {
    const GaussLegendre g = gauss_legendre(200);
    double s = 0.0;
    for (int i = 0; i < 200; ++i) {
      const double t = (g.x[i] + 1.0) / 2.0 * lam;
      s += g.w[i] * lam / 2.0 * eval_p1d(t);
    }
    return s;
  }

  // ---- dressed phase -------------------------------------------------------
  // Solve lambda -> phi_r(lambda, mu) on the grid for fixed mu; complex mu
  // gives a complex right-hand side solved against the real LU factors.
  CVec phi_solve(int r, Cplx mu) const {
    Vec re(n);
    for (int i = 0; i < n; ++i) re[i] = grid.x[i] - mu.real();
    CVec rhs = theta.theta_r_line(-mu.imag(), re, r, prm.zeta) / (2.0 * pi);
    rhs.array() += 0.5 * m_r(r, prm.zeta);
    return solve_complex(rhs);
  }

  template <class T>
  Cplx phi_at(T lam, int r, Cplx mu, const CVec& sol) const {
    const Cplx th = theta.theta_r(Cplx(lam) - mu, r, prm.zeta);
    return th / (2.0 * pi) + 0.5 * m_r(r, prm.zeta) - quad_K(lam, sol);
  }

  CVec solve_complex(const CVec& rhs) const {
    const Vec xr = lu.solve(rhs.real().matrix().eval());
    const Vec xi = lu.solve(rhs.imag().matrix().eval());
    return xr + Cplx(0.0, 1.0) * xi;
  }

  // Orientation sign of p_r' along the string line i*delta*pi/2, sampled on
  // 64 points of [-5, 5]; verifies the sign is constant and the line values
  // are real.
  double string_sign(int r, int delta) const {
    const Cplx line(0.0, delta * pi / 2.0);
    double s0 = 0.0;
    for (int i = 0; i < 64; ++i) {
      const double t = -5.0 + 10.0 * i / 63.0;
      const Cplx v = p_r_deriv(t + line, r);
      if (std::abs(v.imag()) > 1e-9)
        throw numerical_error("string_sign: p_r' not real on the string line");
      const double s = v.real() > 0 ? 1.0 : -1.0;
      if (i == 32) s0 = s;
      if (std::abs(v.real()) < 1e-14)
        throw numerical_error("string_sign: p_r' vanishes on the string line");
    }
    for (int i = 0; i < 64; ++i) {
      const double t = -5.0 + 10.0 * i / 63.0;
      const Cplx v = p_r_deriv(t + line, r);
      if ((v.real() > 0 ? 1.0 : -1.0) != s0)
        throw numerical_error("string_sign: p_r' changes sign along the string line");
    }
    return s0;
  }

  std::vector<StringSpec> strings_with_signs(int r_max_scan) const {
    auto specs = allowed_strings(prm.zeta, r_max_scan);
    for (auto& sp : specs) sp.s_r = string_sign(sp.r, sp.delta);
    return specs;
  }

  // Chebyshev interior representation of a solved function.
  DressedFn chebyshev_fn(const std::string& kind, int r = 1, int npts = 64) const {
    Vec nodes = chebyshev_lobatto(npts);
    Vec vals(npts + 1);
    for (int k = 0; k <= npts; ++k) {
      const double lam = grid.q * nodes[k];
      if (kind == "epsilon_r") {
        if (r != 1)
          throw validation_error("chebyshev_fn: interior representation is for r = 1 only");
        vals[k] = eval_eps1(lam);
      } else if (kind == "momentum_deriv")
        vals[k] = eval_p1d(lam);
      else if (kind == "charge")
        vals[k] = eval_Z(lam);
      else if (kind == "momentum")
        vals[k] = p_r(Cplx(lam, 0.0), 1).real();
      else
        throw validation_error("chebyshev_fn: unknown kind '" + kind + "'");
    }
    DressedFn f;
    f.kind = kind;
    f.r = r;
    f.q = grid.q;
    f.coef = chebyshev_coeffs_from_lobatto(vals);
    return f;
  }

private:
  GaussLegendre gl_;

  void build_grid(double q) {
    grid.n = n;
    grid.q = q;
    grid.x = gl_.x * q;
    grid.w = gl_.w * q;
    A = Mat::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        A(i, j) += kernel_K(grid.x[i] - grid.x[j], prm.zeta) * grid.w[j];
    lu.compute(A);
  }

  // epsilon(Q|Q) as a function of the trial endpoint Q, each evaluation with
  // its own scaled grid and solve.
  double fermi_F(double Q) const {
    if (Q < 1e-12) return driving_eps(0.0);
    const Vec x = gl_.x * Q;
    const Vec w = gl_.w * Q;
    Mat M = Mat::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) += kernel_K(x[i] - x[j], prm.zeta) * w[j];
    const Vec eps = M.partialPivLu().solve(driving_eps(x));
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += w[j] * kernel_K(Q - x[j], prm.zeta) * eps[j];
    return driving_eps(Q) - s;
  }

  double find_fermi_q() const {
    double hi = 0.5;
    while (fermi_F(hi) < 0.0) {
      hi *= 2.0;
      if (hi > 50.0) throw numerical_error("find_fermi_q: no Fermi endpoint located");
    }
    double lo = 1e-8;
    double flo = fermi_F(lo), fhi = fermi_F(hi);
    if (flo >= 0.0) return lo;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
      // secant proposal, safeguarded by bisection
      double mid = lo + (hi - lo) * (-flo) / (fhi - flo);
      if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
      const double fm = fermi_F(mid);
      if (fm == 0.0) return mid;
      if (fm < 0.0) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
        fhi = fm;
      }
    }
    return 0.5 * (lo + hi);
  }

  // Branch-indicator term of the dressed momentum, constant along a given
  // horizontal line.
  double indicator_term(double Y, int r) const {
    double val = 0.0;
    for (int sigma : {+1, -1}) {
      if (r == 1 && sigma == -1) continue;
      const double he = hat_eta((r + sigma) * prm.zeta / 2.0);
      const double fmin = std::min(he, pi - he);
      const bool ind = (pi / 2.0 + 1e-12 >= std::abs(Y)) && (std::abs(Y) >= fmin - 1e-12);
      if (!ind) continue;
      const double sg = 1.0 - (2.0 / pi) * he;
      const double sgn = std::abs(sg) < 1e-14 ? 0.0 : (sg > 0 ? 1.0 : -1.0);
      val -= 2.0 * fermi.p_F * sgn;
    }
    return val;
  }
};

// ---------------------------------------------------------------- cache I/O
inline constexpr int cache_version = 1;

inline std::string cache_key(const ModelParams& p, int n) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "thermo_z%.12e_J%.12e_h%.12e_n%d.json", p.zeta, p.J, p.h, n);
  return std::string(buf);
}

inline void cache_store(const ThermoState& st, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw cache_error("cache_store: cannot create directory " + dir.string());
  nlohmann::json j;
  j["version"] = cache_version;
  j["kind"] = "thermo_state";
  j["params"] = {{"J", st.prm.J}, {"zeta", st.prm.zeta}, {"h", st.prm.h}};
  j["n"] = st.n;
  j["q"] = st.grid.q;
  j["p_F"] = st.fermi.p_F;
  j["v_F"] = st.fermi.v_F;
  auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  j["eps1"] = vec(st.eps1);
  j["p1d"] = vec(st.p1d);
  j["Z"] = vec(st.Zv);
  std::ofstream out(dir / cache_key(st.prm, st.n));
  if (!out) throw cache_error("cache_store: cannot open cache file for writing");
  out << j.dump();
}

inline std::optional<ThermoState> cache_load(const ModelParams& p, int n,
                                             const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path file = dir / cache_key(p, n);
  if (!fs::exists(file)) return std::nullopt;
  nlohmann::json j;
  try {
    std::ifstream in(file);
    in >> j;
  } catch (const std::exception& e) {
    throw cache_error(std::string("cache_load: unreadable cache file: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != cache_version)
      throw cache_error("cache_load: cache version mismatch");
    if (j.at("kind").get<std::string>() != "thermo_state")
      throw cache_error("cache_load: unexpected cache kind");
    const auto& pj = j.at("params");
    if (pj.at("J").get<double>() != p.J || pj.at("zeta").get<double>() != p.zeta ||
        pj.at("h").get<double>() != p.h || j.at("n").get<int>() != n)
      throw cache_error("cache_load: cache key does not match requested parameters");
    auto vec = [&](const char* name) {
      const auto v = j.at(name).get<std::vector<double>>();
      if (static_cast<int>(v.size()) != n) throw cache_error("cache_load: truncated array");
      return Eigen::Map<const Vec>(v.data(), v.size()).eval();
    };
    FermiData fd;
    fd.q = j.at("q").get<double>();
    fd.p_F = j.at("p_F").get<double>();
    fd.v_F = j.at("v_F").get<double>();
    return ThermoState(p, n, fd.q, vec("eps1"), vec("p1d"), vec("Z"), fd);
  } catch (const cache_error&) {
    throw;
  } catch (const std::exception& e) {
    throw cache_error(std::string("cache_load: malformed cache content: ") + e.what());
  }
}

} // namespace xxz
