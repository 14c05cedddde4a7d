#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "xxz/dressed.hpp"
#include "xxz/errors.hpp"
#include "xxz/excitations.hpp"
#include "xxz/kernels.hpp"
#include "xxz/params.hpp"
#include "xxz/quadrature.hpp"
#include "xxz/strings.hpp"

namespace xxz {

using CMat = Eigen::MatrixXcd;

// ---------------------------------------------------------------------------
// Configuration of the truncated two-point-function series
// ---------------------------------------------------------------------------

// Regular (non-singular) factor of the form-factor density. The full density
// splits into the bound-state Vandermonde, the endpoint-singular prefactor and
// this regular remainder; the default remainder is the constant 1, and any
// model for it can be installed as a callable on the excitation descriptor.
struct DensityPlugin {
  Operator op = Operator::sigma_z;
  std::function<Cplx(const ExcitationY&)> fn;

  bool trivial() const { return !fn; }
  Cplx operator()(const ExcitationY& Y) const { return fn ? fn(Y) : Cplx(1.0, 0.0); }
};

// Excitation-content multi-index of a single series summand: hole count,
// particle count, bound-state counts per kind, and the two Umklapp integers.
struct NConfig {
  int n_h = 0;
  int n_1 = 0;
  std::map<int, int> n_r;  // bound-state counts keyed by r >= 2
  int ell_plus = 0;
  int ell_minus = 0;

  int ell(int upsilon) const { return upsilon > 0 ? ell_plus : ell_minus; }
  int string_content() const {
    int s = n_1;
    for (const auto& [r, n] : n_r) s += r * n;
    return s;
  }
  int integration_count() const {
    int s = n_h + n_1;
    for (const auto& [r, n] : n_r) s += n;
    return s;
  }
  bool balanced() const { return n_h == ell_plus + ell_minus + string_content(); }

  std::string label() const {
    std::string s = "nh=" + std::to_string(n_h) + " n1=" + std::to_string(n_1);
    for (const auto& [r, n] : n_r) s += " n" + std::to_string(r) + "=" + std::to_string(n);
    s += " l+=" + std::to_string(ell_plus) + " l-=" + std::to_string(ell_minus);
    return s;
  }
};

struct SeriesConfig {
  int max_nh = 2;
  int max_n1 = 2;
  int max_nr = 1;          // per bound-state kind
  int n_string_kinds = 2;  // how many of the smallest allowed kinds participate
  int ell_max = 2;
  double delta = 0.02;     // endpoint detachment radius
  int nodes_per_panel = 12;
  double x_max = 8.0;      // truncation of the unbounded contour legs
  double im_t = 1e-3;      // largest imaginary shift of t for the i0+ limit
  double reparam = 0.0;    // panel reparametrization blend (0 = affine)
  bool estimate_error = false;
  DensityPlugin plugin;

  void validate(double q) const {
    if (max_nh < 0 || max_n1 < 0 || max_nr < 0 || n_string_kinds < 0 || ell_max < 0)
      throw validation_error("SeriesConfig: truncation maxima must be >= 0");
    if (!(delta > 0.0) || !(delta < 0.25 * q))
      throw validation_error("SeriesConfig: delta must lie in (0, q/4)");
    if (nodes_per_panel < 4)
      throw validation_error("SeriesConfig: need at least 4 nodes per panel");
    if (!(x_max > q + 1.0))
      throw validation_error("SeriesConfig: x_max must exceed q + 1");
    if (!(im_t > 0.0)) throw validation_error("SeriesConfig: im_t must be positive");
    if (!(reparam >= 0.0 && reparam < 1.0))
      throw validation_error("SeriesConfig: reparam must lie in [0, 1)");
  }
};

struct SeriesTerm {
  NConfig config;
  Cplx value{};
  double quadrature_error_estimate = 0.0;
};

struct CorrelatorResult {
  Cplx total{};
  std::vector<SeriesTerm> terms;
};

// ---------------------------------------------------------------------------
// Contours
// ---------------------------------------------------------------------------

// Half-plane into which the particle oscillatory factor decays at the Fermi
// endpoint upsilon*q: the sign of m p_1'(q) - t upsilon eps_1'(q). Particle
// arcs detach into this half-plane and hole arcs into the opposite one, so
// that both oscillatory factors keep modulus <= 1 along their contours.
struct EdgeSigns {
  int plus = +1;
  int minus = +1;
  int at(int upsilon) const { return upsilon > 0 ? plus : minus; }
};

inline EdgeSigns edge_signs(const ThermoState& st, double m, double t) {
  const double pd = st.eval_p1d(st.grid.q);
  const double ed = st.eval_eps1_deriv(st.grid.q);
  EdgeSigns signs;
  for (int upsilon : {+1, -1}) {
    const double a = m * pd - t * upsilon * ed;
    const double scale = std::abs(m) * pd + std::abs(t) * ed;
    if (std::abs(a) <= 1e-12 * scale || scale == 0.0)
      throw numerical_error("edge_signs: the ray velocity m/t sits on the Fermi light cone");
    (upsilon > 0 ? signs.plus : signs.minus) = a > 0 ? +1 : -1;
  }
  return signs;
}

// One smooth contour piece parametrized over u in [0, 1]: a straight segment
// or a circular arc of radius `rad` about `center`, with vertical direction
// flipped by `orient`.
struct Segment {
  enum class Kind { line, arc };
  Kind kind = Kind::line;
  Cplx a{}, b{};
  Cplx center{};
  double rad = 0.0;
  int orient = +1;
  double phi0 = 0.0, phi1 = 0.0;

  static Segment line(Cplx a, Cplx b) {
    Segment s;
    s.kind = Kind::line;
    s.a = a;
    s.b = b;
    return s;
  }
  static Segment arc(Cplx center, double rad, int orient, double phi0, double phi1) {
    Segment s;
    s.kind = Kind::arc;
    s.center = center;
    s.rad = rad;
    s.orient = orient;
    s.phi0 = phi0;
    s.phi1 = phi1;
    return s;
  }

  Cplx point(double u) const {
    if (kind == Kind::line) return a + u * (b - a);
    const double phi = phi0 + u * (phi1 - phi0);
    return center + rad * Cplx(std::cos(phi), orient * std::sin(phi));
  }
  Cplx deriv(double u) const {
    if (kind == Kind::line) return b - a;
    const double phi = phi0 + u * (phi1 - phi0);
    return rad * (phi1 - phi0) * Cplx(-std::sin(phi), orient * std::cos(phi));
  }
};

struct Contour {
  enum class Kind { hole, particle, string_line };
  Kind kind = Kind::hole;
  int r = 1;
  std::vector<Segment> segments;
};

struct ContourSet {
  EdgeSigns signs;
  double delta = 0.0;
  Contour hole;
  Contour particle;
  std::map<int, Contour> strings;
};

inline std::vector<double> uniform_panels(double a, double b, double max_len) {
  const int n = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / max_len)));
  std::vector<double> pts(n + 1);
  for (int i = 0; i <= n; ++i) pts[i] = a + (b - a) * i / n;
  return pts;
}

// Contour layout. Holes run over [-q, q] with both endpoints detached by a
// radius-delta quarter circle; particles start at the detached point near +q,
// follow the real axis out to +x_max, cross over to the line R + i pi/2
// (traversed right to left), and return along the real axis from -x_max to
// the detached point near -q. Bound states keep their exact straight lines
// s_r R + i delta_r pi/2. Unbounded legs are truncated at |Re| = x_max.
inline ContourSet build_contours(const ThermoState& st, const SeriesConfig& cfg, double m,
                                 double t, const std::vector<StringSpec>& specs) {
  cfg.validate(st.grid.q);
  const double q = st.grid.q, d = cfg.delta, X = cfg.x_max;
  ContourSet cs;
  cs.signs = edge_signs(st, m, t);
  cs.delta = d;

  auto add_lines = [](Contour& c, const std::vector<double>& pts, double height) {
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      c.segments.push_back(Segment::line(Cplx(pts[i], height), Cplx(pts[i + 1], height)));
  };

  cs.hole.kind = Contour::Kind::hole;
  cs.hole.segments.push_back(Segment::arc(Cplx(-q, 0.0), d, -cs.signs.minus, pi / 2, 0.0));
  add_lines(cs.hole, graded_panels(-q + d, q - d, d, true, true), 0.0);
  cs.hole.segments.push_back(Segment::arc(Cplx(q, 0.0), d, -cs.signs.plus, pi, pi / 2));

  cs.particle.kind = Contour::Kind::particle;
  cs.particle.segments.push_back(Segment::arc(Cplx(q, 0.0), d, cs.signs.plus, pi / 2, 0.0));
  add_lines(cs.particle, graded_panels(q + d, X, d, true, false), 0.0);
  add_lines(cs.particle, uniform_panels(X, -X, 2.0), pi / 2);
  add_lines(cs.particle, graded_panels(-X, -q - d, d, false, true), 0.0);
  cs.particle.segments.push_back(Segment::arc(Cplx(-q, 0.0), d, cs.signs.minus, pi, pi / 2));

  for (const auto& sp : specs) {
    Contour c;
    c.kind = Contour::Kind::string_line;
    c.r = sp.r;
    add_lines(c, uniform_panels(sp.s_r * -X, sp.s_r * X, 2.0), sp.delta * pi / 2.0);
    cs.strings[sp.r] = c;
  }
  return cs;
}

// Up to n_kinds of the smallest admissible bound-state kinds, skipping
// marginal kinds whose momentum is not strictly oriented along the line
// (exactly degenerate parities at rational zeta / pi).
inline std::vector<StringSpec> collect_string_kinds(const ThermoState& st, int n_kinds,
                                                    int r_max_scan = 12) {
  std::vector<StringSpec> out;
  for (int r = 2; r <= r_max_scan && static_cast<int>(out.size()) < n_kinds; ++r) {
    StringSpec sp = classify_string(st.prm.zeta, r);
    if (!sp.exists || sp.degenerate) continue;
    try {
      sp.s_r = st.string_sign(sp.r, sp.delta);
    } catch (const numerical_error&) {
      continue;
    }
    out.push_back(sp);
  }
  return out;
}

struct NodeSet {
  CVec z, w;
};

// Gauss-Legendre nodes per panel, optionally redistributed along each panel by
// the polynomial warp u -> (1-p)u + pu^2 with p in [0, 1). The warp is a
// low-degree change of variable with strictly positive derivative, so it
// preserves the Gauss accuracy of the rule; it changes only the node
// placement, never the contour, so evaluated integrals must be invariant.
inline NodeSet contour_nodes(const Contour& c, int nodes_per_panel, double reparam) {
  const GaussLegendre gl = gauss_legendre(nodes_per_panel);
  const int nseg = static_cast<int>(c.segments.size());
  NodeSet ns;
  ns.z.resize(nseg * nodes_per_panel);
  ns.w.resize(nseg * nodes_per_panel);
  const double p = reparam;
  int k = 0;
  for (const auto& seg : c.segments) {
    for (int i = 0; i < nodes_per_panel; ++i) {
      const double u = 0.5 * (gl.x[i] + 1.0);
      const double w = (1.0 - p) * u + p * u * u;
      const double wd = (1.0 - p) + 2.0 * p * u;
      ns.z[k] = seg.point(w);
      ns.w[k] = 0.5 * gl.w[i] * wd * seg.deriv(w);
      ++k;
    }
  }
  return ns;
}

// ---------------------------------------------------------------------------
// Series evaluator
// ---------------------------------------------------------------------------
//
// Each summand is a product over the chosen rapidity tuple of per-node factors
// and per-pair factors, so its logarithm splits into a constant, one sum over
// nodes and one sum over unordered pairs. All geometry-dependent pieces (the
// dressed phase between every pair of quadrature nodes, the endpoint powers,
// the dressed momenta/energies/charge on the nodes) are tabulated once per
// contour build; a (m, t)-pass then only rescales two rank-one matrices and
// re-exponentiates. Branch handling:
//   * integer powers (Vandermonde factors, cross denominator, Umklapp powers)
//     are exact for any branch of the logarithm once re-exponentiated;
//   * the particle endpoint power uses the principal log of (nu+q)/(nu-q),
//     whose value never crosses the negative real axis along the particle
//     contour;
//   * the hole endpoint power uses i pi + Log(q-mu) - Log(q+mu), the
//     determination that is continuous along the whole hole contour (on the
//     real core it equals the principal value taken from the upper side, the
//     same convention as singular_D at real descriptors);
//   * (-i m_upsilon)^{-theta^2} applies the -i rotation first and then the
//     principal log; the i0+ shift of t keeps -i m_upsilon in the right
//     half-plane, so the power is continuous across m_upsilon sign changes.
class SeriesEvaluator {
public:
  SeriesEvaluator(const ThermoState& st, SeriesConfig cfg, int m, double t)
      : st_(&st), cfg_(std::move(cfg)), m_(m), t_(t) {
    cfg_.validate(st.grid.q);
    specs_ = collect_string_kinds(st, cfg_.n_string_kinds, scan_rmax_);
    contours_ = build_contours(st, cfg_, static_cast<double>(m), t, specs_);
    build_nodes();
    build_tables();
    if (t_ == 0.0) {
      passes_.push_back(make_pass(Cplx(0.0, 0.0)));
    } else {
      for (double f : {1.0, 0.5, 0.25}) passes_.push_back(make_pass(Cplx(t_, -cfg_.im_t * f)));
    }
  }

  const ContourSet& contours() const { return contours_; }
  const std::vector<StringSpec>& string_kinds() const { return specs_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  int m() const { return m_; }
  double t() const { return t_; }

  // All admissible excitation contents within the truncation: hole count
  // balanced against Umklapp integers plus weighted string content.
  std::vector<NConfig> configs() const {
    std::vector<NConfig> out;
    std::vector<int> kinds;
    for (const auto& sp : specs_) kinds.push_back(sp.r);
    std::vector<int> counts(kinds.size(), 0);
    for (int nh = 0; nh <= cfg_.max_nh; ++nh) {
      for (int n1 = 0; n1 <= cfg_.max_n1; ++n1) {
        // odometer over bound-state counts
        std::fill(counts.begin(), counts.end(), 0);
        while (true) {
          int content = n1;
          for (std::size_t k = 0; k < kinds.size(); ++k) content += kinds[k] * counts[k];
          for (int lp = -cfg_.ell_max; lp <= cfg_.ell_max; ++lp) {
            const int lm = nh - content - lp;
            if (std::abs(lm) > cfg_.ell_max) continue;
            NConfig nc;
            nc.n_h = nh;
            nc.n_1 = n1;
            for (std::size_t k = 0; k < kinds.size(); ++k)
              if (counts[k] > 0) nc.n_r[kinds[k]] = counts[k];
            nc.ell_plus = lp;
            nc.ell_minus = lm;
            out.push_back(nc);
          }
          std::size_t k = 0;
          for (; k < counts.size(); ++k) {
            if (counts[k] < cfg_.max_nr) {
              ++counts[k];
              break;
            }
            counts[k] = 0;
          }
          if (k == counts.size()) break;
        }
      }
    }
    return out;
  }

  // One series summand, including species measures 1/(n! (2 pi)^n), the
  // Umklapp phase and the (-i m_upsilon) powers; the i0+ limit of t is taken
  // by quadratic extrapolation from three shrinking imaginary shifts.
  SeriesTerm term(const NConfig& nc) const {
    if (!nc.balanced())
      throw validation_error("evaluate_term: hole count does not balance the configuration");
    SeriesTerm out;
    out.config = nc;
    if (passes_.size() == 1) {
      out.value = config_value(nc, passes_[0]);
    } else {
      const Cplx f1 = config_value(nc, passes_[0]);
      const Cplx f2 = config_value(nc, passes_[1]);
      const Cplx f4 = config_value(nc, passes_[2]);
      out.value = (8.0 * f4 - 6.0 * f2 + f1) / 3.0;
    }
    if (!std::isfinite(out.value.real()) || !std::isfinite(out.value.imag()))
      throw numerical_error("evaluate_term: non-finite term value for " + nc.label());
    return out;
  }

  CorrelatorResult correlator() const {
    CorrelatorResult res;
    const int sg = pseudo_spin(cfg_.plugin.op);
    const double sign = (sg != 0 && (std::abs(m_) % 2) == 1) ? -1.0 : 1.0;
    for (const NConfig& nc : configs()) {
      SeriesTerm tm = term(nc);
      res.total += tm.value;
      res.terms.push_back(std::move(tm));
    }
    res.total *= sign;
    return res;
  }

  // Test access: global node list and the per-node oscillatory exponents.
  const CVec& nodes() const { return zs_; }
  const CVec& weights() const { return ws_; }
  Cplx node_momentum(int i) const { return p_[i]; }
  Cplx node_energy(int i) const { return e_[i]; }
  bool node_is_hole(int i) const { return blocks_[blk_of_[i]].hole; }
  int node_r(int i) const { return blocks_[blk_of_[i]].r; }

private:
  struct Block {
    int r = 1;
    bool hole = false;
    int offset = 0;
    int count = 0;
    double sgn() const { return hole ? 1.0 : -1.0; }
  };

  struct Pass {
    Cplx tc;
    Cplx Lp, Lm;  // principal Log(-i m_upsilon)
    CMat eP;      // exponentiated pairwise kernel
  };

  static constexpr int scan_rmax_ = 12;

  const ThermoState* st_;
  SeriesConfig cfg_;
  int m_;
  double t_;
  std::vector<StringSpec> specs_;
  ContourSet contours_;
  std::vector<Block> blocks_;
  std::vector<int> blk_of_;
  int N_ = 0;
  CVec zs_, ws_;
  CVec p_, e_, Zn_, ledge_;
  CMat phi_;         // phi_(t, s) = dressed phase of kind r_s at (z_t, z_s)
  CMat Kgeo_;        // geometry-only pairwise kernel (Vandermonde/cross/edge)
  CMat Mp_, Mm_;     // rank-one shift-exponent couplings, one per Fermi edge
  CVec fq_[2];       // dressed phase phi_1(z_t, upsilon q)
  CVec cq_[2];       // signed contribution of node s to the shift at upsilon q
  double Zq_[2] = {0.0, 0.0};
  Cplx phiqq_[2][2]; // phi_1(upsilon q, upsilon' q)
  std::vector<Pass> passes_;
  std::vector<std::string> warnings_;

  static int uidx(int upsilon) { return upsilon > 0 ? 0 : 1; }

  void build_nodes() {
    std::vector<std::pair<const Contour*, Block>> parts;
    Block bh;
    bh.r = 1;
    bh.hole = true;
    parts.push_back({&contours_.hole, bh});
    Block bp;
    bp.r = 1;
    parts.push_back({&contours_.particle, bp});
    for (const auto& [r, c] : contours_.strings) {
      Block bs;
      bs.r = r;
      parts.push_back({&c, bs});
    }
    std::vector<NodeSet> sets;
    int total = 0;
    for (auto& [c, b] : parts) {
      sets.push_back(contour_nodes(*c, cfg_.nodes_per_panel, cfg_.reparam));
      total += static_cast<int>(sets.back().z.size());
    }
    N_ = total;
    zs_.resize(N_);
    ws_.resize(N_);
    blk_of_.resize(N_);
    int off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      Block b = parts[k].second;
      b.offset = off;
      b.count = static_cast<int>(sets[k].z.size());
      zs_.segment(off, b.count) = sets[k].z;
      ws_.segment(off, b.count) = sets[k].w;
      for (int i = 0; i < b.count; ++i) blk_of_[off + i] = static_cast<int>(k);
      off += b.count;
      blocks_.push_back(b);
    }
    // proximity report: abscissae close to the endpoint singularities
    const double q = st_->grid.q;
    double dmin = 1e300;
    for (int i = 0; i < N_; ++i) {
      if (blocks_[blk_of_[i]].r != 1) continue;
      dmin = std::min(dmin, std::min(std::abs(zs_[i] - q), std::abs(zs_[i] + q)));
    }
    if (dmin < 1e-3)
      warnings_.push_back("abscissa within 1e-3 of a Fermi-endpoint singularity");
    double xmin = 1e300;
    const Block& H = blocks_[0];
    const Block& P = blocks_[1];
    for (int i = H.offset; i < H.offset + H.count; ++i)
      for (int j = P.offset; j < P.offset + P.count; ++j)
        xmin = std::min(xmin, std::abs(zs_[i] - zs_[j]));
    if (xmin < 1e-3)
      warnings_.push_back("abscissa within 1e-3 of a particle-hole collision");
  }

  void build_tables() {
    const double q = st_->grid.q;
    const double zeta = st_->prm.zeta;
    const int n = st_->n;

    p_.resize(N_);
    e_.resize(N_);
    ledge_.resize(N_);
    for (int i = 0; i < N_; ++i) {
      const Block& b = blocks_[blk_of_[i]];
      const Cplx z = zs_[i];
      p_[i] = st_->p_r(z, b.r);
      e_[i] = (b.r == 1) ? st_->eval_eps1(z) : st_->eps_r(z, b.r);
      if (b.hole)
        ledge_[i] = Cplx(0.0, pi) + std::log(Cplx(q) - z) - std::log(Cplx(q) + z);
      else if (b.r == 1)
        ledge_[i] = std::log((z + q) / (z - q));
      else
        ledge_[i] = Cplx(0.0, 0.0);
    }

    // shared Fermi-zone quadrature rows against the grid solutions
    CMat Km(N_, n);
    for (int i = 0; i < N_; ++i)
      for (int j = 0; j < n; ++j)
        Km(i, j) = st_->grid.w[j] * kernel_K(zs_[i] - st_->grid.x[j], zeta);
    Zn_ = CVec::Ones(N_) - Km * st_->Zv.cast<Cplx>();

    CMat Sol(n, N_);
    for (int s = 0; s < N_; ++s) Sol.col(s) = st_->phi_solve(blocks_[blk_of_[s]].r, zs_[s]);
    phi_ = -(Km * Sol);
    for (int tgt = 0; tgt < N_; ++tgt)
      for (int s = 0; s < N_; ++s) {
        const int r = blocks_[blk_of_[s]].r;
        phi_(tgt, s) += st_->theta.theta_r(zs_[tgt] - zs_[s], r, zeta) / (2.0 * pi) +
                        0.5 * m_r(r, zeta);
      }

    // edge data: sources and targets at the two Fermi endpoints
    CVec qsol[2];
    Eigen::RowVectorXcd Kq[2];
    for (int k = 0; k < 2; ++k) {
      const double uq = (k == 0 ? q : -q);
      qsol[k] = st_->phi_solve(1, Cplx(uq, 0.0));
      Kq[k].resize(n);
      for (int j = 0; j < n; ++j)
        Kq[k][j] = st_->grid.w[j] * kernel_K(Cplx(uq, 0.0) - st_->grid.x[j], zeta);
      Zq_[k] = 1.0 - (Kq[k] * st_->Zv.cast<Cplx>())(0, 0).real();
    }
    for (int k = 0; k < 2; ++k) {
      fq_[k] = -(Km * qsol[k]);
      for (int tgt = 0; tgt < N_; ++tgt) {
        const double uq = (k == 0 ? q : -q);
        fq_[k][tgt] += st_->theta.theta_r(zs_[tgt] - uq, 1, zeta) / (2.0 * pi) +
                       0.5 * m_r(1, zeta);
      }
      cq_[k] = -(Kq[k] * Sol).transpose();
      for (int s = 0; s < N_; ++s) {
        const int r = blocks_[blk_of_[s]].r;
        const double uq = (k == 0 ? q : -q);
        cq_[k][s] += st_->theta.theta_r(Cplx(uq, 0.0) - zs_[s], r, zeta) / (2.0 * pi) +
                     0.5 * m_r(r, zeta);
        cq_[k][s] *= blocks_[blk_of_[s]].sgn();
      }
      for (int kp = 0; kp < 2; ++kp) {
        const double uq = (k == 0 ? q : -q);
        const double uqp = (kp == 0 ? q : -q);
        phiqq_[k][kp] = st_->theta.theta_r(Cplx(uq - uqp, 0.0), 1, zeta) / (2.0 * pi) +
                        0.5 * m_r(1, zeta) - (Kq[k] * qsol[kp])(0, 0);
      }
    }
    // The kernel is even and the r = 1 winding constant vanishes in this
    // regime, so the endpoint constants obey Z(-q) = Z(q) and
    // phi(-q,-u q) = -phi(q,u q) exactly; enforcing the identities removes
    // the solver's residual asymmetry, which integer Umklapp charges would
    // otherwise amplify in the shift exponents.
    Zq_[0] = Zq_[1] = 0.5 * (Zq_[0] + Zq_[1]);
    const Cplx diag = 0.5 * (phiqq_[0][0] - phiqq_[1][1]);
    const Cplx off = 0.5 * (phiqq_[0][1] - phiqq_[1][0]);
    phiqq_[0][0] = diag;
    phiqq_[1][1] = -diag;
    phiqq_[0][1] = off;
    phiqq_[1][0] = -off;

    Mp_ = -2.0 * (cq_[0] * cq_[0].transpose());
    Mm_ = -2.0 * (cq_[1] * cq_[1].transpose());

    Kgeo_ = CMat::Zero(N_, N_);
    for (int a = 0; a < N_; ++a) {
      const Block& A = blocks_[blk_of_[a]];
      for (int b = a + 1; b < N_; ++b) {
        const Block& B = blocks_[blk_of_[b]];
        Cplx v{};
        if (blk_of_[a] == blk_of_[b]) {
          v = 2.0 * std::log(zs_[a] - zs_[b]) + Cplx(0.0, pi);
        } else if (A.hole && !B.hole && B.r == 1) {
          v = -2.0 * std::log(zs_[b] - zs_[a]);
        }
        v += 2.0 * (B.sgn() * phi_(a, b)) * ledge_[a] + 2.0 * (A.sgn() * phi_(b, a)) * ledge_[b];
        Kgeo_(a, b) = v;
        Kgeo_(b, a) = v;
      }
    }
  }

  Pass make_pass(Cplx tc) const {
    Pass ps;
    ps.tc = tc;
    const Cplx mup = +static_cast<double>(m_) - st_->fermi.v_F * tc;
    const Cplx mum = -static_cast<double>(m_) - st_->fermi.v_F * tc;
    ps.Lp = std::log(Cplx(0.0, -1.0) * mup);
    ps.Lm = std::log(Cplx(0.0, -1.0) * mum);
    CMat P = Kgeo_ + ps.Lp * Mp_ + ps.Lm * Mm_;
    ps.eP = P.array().exp();
    return ps;
  }

  Cplx config_value(const NConfig& nc, const Pass& ps) const {
    const double q = st_->grid.q;
    const double md = static_cast<double>(m_);
    const double sg2 = 0.5 * pseudo_spin(cfg_.plugin.op);
    const double lp = nc.ell_plus, lm = nc.ell_minus;

    // participating blocks with multiplicities
    std::vector<std::pair<const Block*, int>> use;
    if (nc.n_h > 0) use.push_back({&blocks_[0], nc.n_h});
    if (nc.n_1 > 0) use.push_back({&blocks_[1], nc.n_1});
    for (const auto& [r, cnt] : nc.n_r) {
      if (cnt == 0) continue;
      const Block* found = nullptr;
      for (std::size_t k = 2; k < blocks_.size(); ++k)
        if (blocks_[k].r == r) found = &blocks_[k];
      if (!found)
        throw validation_error("evaluate_term: bound-state kind r=" + std::to_string(r) +
                               " is not among the admitted kinds");
      use.push_back({found, cnt});
    }

    const Cplx C0p = sg2 * Zq_[0] - (lp * phiqq_[0][0] + lm * phiqq_[0][1]) - lp;
    const Cplx C0m = sg2 * Zq_[1] - (lp * phiqq_[1][0] + lm * phiqq_[1][1]) + lm;
    Cplx cst = Cplx(0.0, 1.0) * md * st_->fermi.p_F * (lp - lm) - ps.Lp * C0p * C0p -
               ps.Lm * C0m * C0m -
               static_cast<double>(nc.integration_count()) * std::log(2.0 * pi);

    CVec es = CVec::Zero(N_);
    for (const auto& [blk, mult] : use) {
      (void)mult;
      for (int i = blk->offset; i < blk->offset + blk->count; ++i) {
        const Cplx osc = blk->hole ? Cplx(0.0, 1.0) * (ps.tc * e_[i] - md * p_[i])
                                   : Cplx(0.0, 1.0) * (md * p_[i] - ps.tc * e_[i]);
        const Cplx base = sg2 * Zn_[i] - (lp * fq_[0][i] + lm * fq_[1][i]);
        const Cplx edge = 2.0 * (base + blk->sgn() * phi_(i, i)) * ledge_[i];
        Cplx uk{};
        if (blk->hole)
          uk = -2.0 * (lp * std::log(zs_[i] - q) + lm * std::log(zs_[i] + q));
        else if (blk->r == 1)
          uk = 2.0 * (lp * std::log(zs_[i] - q) + lm * std::log(zs_[i] + q));
        const Cplx cp = cq_[0][i], cm = cq_[1][i];
        const Cplx ms = -(ps.Lp * (2.0 * C0p * cp + cp * cp) + ps.Lm * (2.0 * C0m * cm + cm * cm));
        es[i] = ws_[i] * std::exp(osc + edge + uk + ms);
      }
    }

    return std::exp(cst) * tuple_sum(use, ps.eP, es, nc);
  }

  ExcitationY build_Y(const std::vector<int>& chosen, const NConfig& nc) const {
    ExcitationY Y;
    Y.op = cfg_.plugin.op;
    Y.ell_plus = nc.ell_plus;
    Y.ell_minus = nc.ell_minus;
    std::map<int, std::vector<Cplx>> bys;
    std::vector<Cplx> holes;
    for (int g : chosen) {
      const Block& b = blocks_[blk_of_[g]];
      if (b.hole)
        holes.push_back(zs_[g]);
      else
        bys[b.r].push_back(zs_[g]);
    }
    Y.holes = Eigen::Map<const CVec>(holes.data(), static_cast<int>(holes.size()));
    for (auto& [r, v] : bys)
      Y.strings[r] = Eigen::Map<const CVec>(v.data(), static_cast<int>(v.size()));
    return Y;
  }

  // Sum over strictly increasing node tuples per species of the product of
  // single-node factors and pairwise factors. Same-species coincidences carry
  // vanishing Vandermonde factors, so restricting to increasing tuples
  // implements the 1/n! symmetrization exactly. The largest block is visited
  // last so its pair loop can reuse cached row products.
  Cplx tuple_sum(const std::vector<std::pair<const Block*, int>>& use, const CMat& eP,
                 const CVec& es, const NConfig& nc) const {
    if (use.empty()) return Cplx(1.0, 0.0);
    std::vector<std::pair<const Block*, int>> ord(use);
    std::stable_sort(ord.begin(), ord.end(),
                     [](const auto& a, const auto& b) { return a.first->count < b.first->count; });
    const bool fast = cfg_.plugin.trivial();
    std::vector<int> chosen;
    std::vector<Cplx> row;
    Cplx total{};
    std::function<void(std::size_t, int, int, Cplx)> rec = [&](std::size_t lvl, int pos, int left,
                                                               Cplx prod) {
      if (left == 0) {
        if (lvl + 1 == ord.size()) {
          total += fast ? prod : prod * cfg_.plugin(build_Y(chosen, nc));
          return;
        }
        rec(lvl + 1, 0, ord[lvl + 1].second, prod);
        return;
      }
      const Block& B = *ord[lvl].first;
      if (fast && lvl + 1 == ord.size() && pos == 0 && (left == 1 || left == 2)) {
        const int off = B.offset, cnt = B.count;
        row.resize(cnt);
        for (int x = 0; x < cnt; ++x) {
          Cplx rv = es[off + x];
          for (int y : chosen) rv *= eP(y, off + x);
          row[x] = rv;
        }
        Cplx s{};
        if (left == 1) {
          for (int x = 0; x < cnt; ++x) s += row[x];
        } else {
          for (int x = 0; x < cnt; ++x)
            for (int y = x + 1; y < cnt; ++y) s += row[x] * row[y] * eP(off + x, off + y);
        }
        total += prod * s;
        return;
      }
      for (int x = pos; x <= B.count - left; ++x) {
        Cplx p2 = prod * es[B.offset + x];
        for (int y : chosen) p2 *= eP(y, B.offset + x);
        chosen.push_back(B.offset + x);
        rec(lvl, x + 1, left - 1, p2);
        chosen.pop_back();
      }
    };
    rec(0, 0, ord[0].second, Cplx(1.0, 0.0));
    return total;
  }
};

inline SeriesTerm evaluate_term(const ThermoState& st, const SeriesConfig& cfg, const NConfig& nc,
                                int m, double t) {
  SeriesEvaluator ev(st, cfg, m, t);
  SeriesTerm tm = ev.term(nc);
  if (cfg.estimate_error) {
    SeriesConfig coarse = cfg;
    coarse.nodes_per_panel = std::max(4, cfg.nodes_per_panel / 2);
    coarse.estimate_error = false;
    SeriesEvaluator ev2(st, coarse, m, t);
    tm.quadrature_error_estimate = std::abs(tm.value - ev2.term(nc).value);
  }
  return tm;
}

inline CorrelatorResult evaluate_correlator(const ThermoState& st, const SeriesConfig& cfg, int m,
                                            double t) {
  SeriesEvaluator ev(st, cfg, m, t);
  CorrelatorResult res = ev.correlator();
  if (cfg.estimate_error) {
    SeriesConfig coarse = cfg;
    coarse.nodes_per_panel = std::max(4, cfg.nodes_per_panel / 2);
    coarse.estimate_error = false;
    SeriesEvaluator ev2(st, coarse, m, t);
    for (auto& tm : res.terms)
      tm.quadrature_error_estimate = std::abs(tm.value - ev2.term(tm.config).value);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Momentum representation
// ---------------------------------------------------------------------------

// Rapidity content expressed through momenta: hole momenta in (-p_F, p_F),
// particle momenta on the shifted branch covering (p_F, 2pi - p_F - 2 p_F
// sgn(pi - 2 zeta)), bound-state momenta on their finite bands.
struct KState {
  std::vector<double> holes;
  std::vector<double> particles;
  std::map<int, std::vector<double>> strings;
  int ell_plus = 0;
  int ell_minus = 0;
  Operator op = Operator::sigma_z;
};

// Change of variables from rapidities to momenta along the series contours.
// The particle momentum is lifted to a single increasing branch: +2 pi on the
// shifted line R + i pi/2 and on the left real ray, plus the Umklapp
// re-indexing shift 2 p_F u_1^+ on the left ray. Inversion is per-leg
// safeguarded Newton; the transformed density divides by the signed momentum
// Jacobians and shifts the Umklapp integers of left-ray particles.
class MomentumRep {
public:
  enum class Leg { right, top, left };

  explicit MomentumRep(const ThermoState& st, std::vector<StringSpec> specs = {})
      : st_(&st), specs_(std::move(specs)) {
    q_ = st.grid.q;
    pF_ = st.fermi.p_F;
    zeta_ = st.prm.zeta;
    u1p_ = u_r_sigma(1, +1, zeta_);
    build_interior_tables();
    k_hi_ = -pF_ + 2.0 * pi + 2.0 * pF_ * u1p_;
    kR_ = phat1(xfar_, Leg::right);
    kTopR_ = phat1(xfar_, Leg::top);
    kTopL_ = phat1(-xfar_, Leg::top);
    kL_ = phat1(-xfar_, Leg::left);
    check_monotone();
    for (const auto& sp : specs_) {
      const double h = sp.delta * pi / 2.0;
      const double a = real_p(Cplx(sp.s_r * -xfar_, h), sp.r);
      const double b = real_p(Cplx(sp.s_r * xfar_, h), sp.r);
      if (!(b > a))
        throw numerical_error("momentum_rep: bound-state momentum not increasing along its line");
      bands_[sp.r] = {a, b};
      heights_[sp.r] = h;
      signs_[sp.r] = sp.s_r;
    }
  }

  std::pair<double, double> interval_hole() const { return {-pF_, pF_}; }
  std::pair<double, double> interval_particle() const { return {pF_, k_hi_}; }
  std::pair<double, double> interval_string(int r) const {
    auto it = bands_.find(r);
    if (it == bands_.end())
      throw validation_error("momentum_rep: no band for bound-state kind r=" + std::to_string(r));
    return it->second;
  }

  // Lifted particle momentum on the given leg, parametrized by the real
  // coordinate (right: lambda = x > q; top: lambda = x + i pi/2; left:
  // lambda = x < -q).
  double phat1(double x, Leg leg) const {
    const Cplx lam = (leg == Leg::top) ? Cplx(x, pi / 2.0) : Cplx(x, 0.0);
    double shift = 0.0;
    if (leg == Leg::top) shift = 2.0 * pi;
    if (leg == Leg::left) shift = 2.0 * pi + 2.0 * pF_ * u1p_;
    return real_p(lam, 1) + shift;
  }
  double phat1_deriv(double x, Leg leg) const {
    const Cplx lam = (leg == Leg::top) ? Cplx(x, pi / 2.0) : Cplx(x, 0.0);
    return st_->eval_p1d(lam).real();
  }

  double invert_hole(double k) const {
    if (!(k > -pF_ - 1e-12 && k < pF_ + 1e-12))
      throw validation_error("momentum_rep: hole momentum outside (-p_F, p_F)");
    auto f = [&](double lam) { return chebyshev_eval(p1c_, clampq(lam)) - k; };
    auto fd = [&](double lam) { return chebyshev_eval(p1dc_, clampq(lam)); };
    return solve_monotone(f, fd, -q_, q_);
  }

  std::pair<double, Leg> invert_particle(double k) const {
    if (!(k > pF_ - 1e-12 && k < k_hi_ + 1e-12))
      throw validation_error("momentum_rep: particle momentum outside the particle band");
    Leg leg;
    if (k <= 0.5 * (kR_ + kTopR_))
      leg = Leg::right;
    else if (k >= 0.5 * (kTopL_ + kL_))
      leg = Leg::left;
    else
      leg = Leg::top;
    double lo, hi;
    if (leg == Leg::right) {
      lo = q_ + 1e-10;
      hi = xfar_;
    } else if (leg == Leg::left) {
      lo = -xfar_;
      hi = -q_ - 1e-10;
    } else {
      lo = -xfar_;
      hi = xfar_;
    }
    auto f = [&](double x) { return phat1(x, leg) - k; };
    auto fd = [&](double x) { return phat1_deriv(x, leg); };
    return {solve_monotone(f, fd, lo, hi), leg};
  }

  double invert_string(double k, int r) const {
    const auto band = interval_string(r);
    if (!(k > band.first - 1e-12 && k < band.second + 1e-12))
      throw validation_error("momentum_rep: momentum outside the bound-state band");
    const double h = heights_.at(r);
    auto f = [&](double x) { return real_p(Cplx(x, h), r) - k; };
    auto fd = [&](double x) { return st_->p_r_deriv(Cplx(x, h), r).real(); };
    return solve_monotone(f, fd, -xfar_, xfar_);
  }

  // Dressed energy as a function of momentum: hole branch on (-p_F, p_F),
  // particle branch on the lifted band, bound states on their bands.
  double e1(double k) const {
    if (std::abs(k) <= pF_) return chebyshev_eval(e1c_, clampq(invert_hole(k)));
    const auto [x, leg] = invert_particle(k);
    const Cplx lam = (leg == Leg::top) ? Cplx(x, pi / 2.0) : Cplx(x, 0.0);
    return check_real(st_->eval_eps1(lam), "dressed energy");
  }
  double e1_deriv(double k) const {
    if (std::abs(k) <= pF_) {
      const double lam = invert_hole(k);
      return chebyshev_eval(e1dc_, clampq(lam)) / chebyshev_eval(p1dc_, clampq(lam));
    }
    const auto [x, leg] = invert_particle(k);
    const Cplx lam = (leg == Leg::top) ? Cplx(x, pi / 2.0) : Cplx(x, 0.0);
    return check_real(st_->eval_eps1_deriv(lam), "dressed energy slope") /
           check_real(st_->eval_p1d(lam), "momentum slope");
  }
  double e_r(double k, int r) const {
    if (r == 1) return e1(k);
    const double x = invert_string(k, r);
    return check_real(st_->eps_r(Cplx(x, heights_.at(r)), r), "bound-state energy");
  }
  double u_r(double k, double v, int r) const {
    if (v == 0.0) throw validation_error("momentum_rep: zero ray velocity");
    return k - e_r(k, r) / v;
  }

  // Transformed form-factor density: inverse momentum maps, Umklapp
  // re-indexing of left-ray particles, and division by the signed Jacobians.
  Cplx density(const KState& ks, const DensityPlugin& plugin) const {
    ExcitationY Y;
    Y.op = ks.op;
    Y.ell_plus = ks.ell_plus;
    Y.ell_minus = ks.ell_minus;
    Cplx jac(1.0, 0.0);
    Y.holes.resize(static_cast<int>(ks.holes.size()));
    for (std::size_t i = 0; i < ks.holes.size(); ++i) {
      const double lam = invert_hole(ks.holes[i]);
      Y.holes[static_cast<int>(i)] = lam;
      jac *= chebyshev_eval(p1dc_, clampq(lam));
    }
    int n_left = 0;
    if (!ks.particles.empty()) {
      CVec parts(static_cast<int>(ks.particles.size()));
      for (std::size_t i = 0; i < ks.particles.size(); ++i) {
        const auto [x, leg] = invert_particle(ks.particles[i]);
        const Cplx lam = (leg == Leg::top) ? Cplx(x, pi / 2.0) : Cplx(x, 0.0);
        if (leg == Leg::left) ++n_left;
        parts[static_cast<int>(i)] = lam;
        jac *= st_->eval_p1d(lam);
      }
      Y.strings[1] = parts;
    }
    for (const auto& [r, ks_r] : ks.strings) {
      CVec nus(static_cast<int>(ks_r.size()));
      for (std::size_t i = 0; i < ks_r.size(); ++i) {
        const double x = invert_string(ks_r[i], r);
        const Cplx lam(x, heights_.at(r));
        nus[static_cast<int>(i)] = lam;
        jac *= st_->p_r_deriv(lam, r);
      }
      Y.strings[r] = nus;
    }
    for (int j = 0; j < n_left; ++j) Y = jump_shifted_Y(Y, 1, +1, zeta_);
    Y.validate();
    const Cplx F = string_vandermonde(Y) * singular_D(*st_, Y) * plugin(Y);
    return F / jac;
  }

private:
  const ThermoState* st_;
  std::vector<StringSpec> specs_;
  double q_ = 0.0, pF_ = 0.0, zeta_ = 0.0;
  int u1p_ = 0;
  double k_hi_ = 0.0, kR_ = 0.0, kTopR_ = 0.0, kTopL_ = 0.0, kL_ = 0.0;
  static constexpr double xfar_ = 30.0;
  Vec p1c_, p1dc_, e1c_, e1dc_;
  std::map<int, std::pair<double, double>> bands_;
  std::map<int, double> heights_;
  std::map<int, double> signs_;

  double clampq(double lam) const { return std::clamp(lam / q_, -1.0, 1.0); }

  double real_p(Cplx lam, int r) const {
    return check_real(st_->p_r(lam, r), "dressed momentum");
  }

  static double check_real(Cplx v, const char* what) {
    if (std::abs(v.imag()) > 1e-8 * (1.0 + std::abs(v.real())))
      throw numerical_error(std::string("momentum_rep: ") + what +
                            " is not real along the contour");
    return v.real();
  }

  void build_interior_tables() {
    const int npts = 96;
    const Vec nodes = chebyshev_lobatto(npts);
    Vec vp(npts + 1), vpd(npts + 1), ve(npts + 1), ved(npts + 1);
    for (int k = 0; k <= npts; ++k) {
      const double lam = q_ * nodes[k];
      vp[k] = st_->p_r(Cplx(lam, 0.0), 1).real();
      vpd[k] = st_->eval_p1d(lam);
      ve[k] = st_->eval_eps1(lam);
      ved[k] = st_->eval_eps1_deriv(lam);
    }
    p1c_ = chebyshev_coeffs_from_lobatto(vp);
    p1dc_ = chebyshev_coeffs_from_lobatto(vpd);
    e1c_ = chebyshev_coeffs_from_lobatto(ve);
    e1dc_ = chebyshev_coeffs_from_lobatto(ved);
  }

  void check_monotone() const {
    // plateaus at rounding level are tolerated: far along each leg the
    // momentum approaches its limit to machine precision
    auto sample = [&](Leg leg, double lo, double hi, bool increasing) {
      double prev = 0.0;
      for (int i = 0; i <= 48; ++i) {
        const double x = lo + (hi - lo) * i / 48.0;
        const double k = phat1(x, leg);
        if (i > 0 && ((increasing && k < prev - 1e-12) || (!increasing && k > prev + 1e-12)))
          throw numerical_error("momentum_rep: dressed momentum not monotone along a leg");
        prev = k;
      }
    };
    sample(Leg::right, q_ + 1e-6, xfar_, true);
    sample(Leg::top, -xfar_, xfar_, false);  // k increases right to left
    sample(Leg::left, -xfar_, -q_ - 1e-6, true);
  }

  template <class F, class Fd>
  double solve_monotone(F&& f, Fd&& fd, double lo, double hi) const {
    double flo = f(lo), fhi = f(hi);
    if (flo > fhi) {
      std::swap(lo, hi);
      std::swap(flo, fhi);
    }
    if (flo > 0.0 || fhi < 0.0) {
      // target slightly outside the sampled range: clamp to the nearer end
      if (std::min(std::abs(flo), std::abs(fhi)) > 1e-6)
        throw numerical_error("momentum_rep: inversion target outside the covered band");
      return std::abs(flo) < std::abs(fhi) ? lo : hi;
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
      const double fx = f(x);
      if (fx > 0.0)
        hi = x;
      else
        lo = x;
      const double d = fd(x);
      double step = (d != 0.0) ? -fx / d : 0.0;
      double xn = x + step;
      if (!(xn > std::min(lo, hi) && xn < std::max(lo, hi))) xn = 0.5 * (lo + hi);
      if (std::abs(xn - x) < 1e-14 * (1.0 + std::abs(x))) return xn;
      x = xn;
    }
    return x;
  }
};

inline MomentumRep momentum_rep(const ThermoState& st, int n_string_kinds = 2,
                                int scan_rmax = 12) {
  return MomentumRep(st, collect_string_kinds(st, n_string_kinds, scan_rmax));
}

} // namespace xxz
