#include <cmath>

#include "common.hpp"
#include "doctest.h"
#include "xxz/excitations.hpp"

using namespace xxz;

namespace {
ExcitationY one_hole(double mu, int lp, int lm, Operator op = Operator::sigma_z) {
  ExcitationY Y;
  Y.holes = CVec(1);
  Y.holes[0] = Cplx(mu, 0.0);
  Y.ell_plus = lp;
  Y.ell_minus = lm;
  Y.op = op;
  return Y;
}
} // namespace

TEST_SUITE("excitations") {
  TEST_CASE("constraint between holes, strings and umklapp integers") {
    ExcitationY bad;
    bad.ell_plus = 1;
    CHECK_THROWS_AS(bad.validate(), validation_error);
    ExcitationY ok;
    ok.validate(); // empty descriptor balances trivially
    ExcitationY pair;
    pair.holes = CVec(1);
    pair.holes[0] = Cplx(0.1, 0.0);
    pair.strings[1] = CVec(1);
    pair.strings[1][0] = Cplx(0.9, 0.0);
    pair.validate();
  }

  TEST_CASE("free-fermion energy and momentum of a single hole") {
    const auto& st = state_ff();
    ExcitationY Y = one_hole(0.0, 1, 0);
    CHECK(excitation_energy(st, Y).real() == doctest::Approx(2.0).epsilon(1e-10));
    ExcitationY Yq = one_hole(st.grid.q, 1, 0);
    CHECK(std::abs(excitation_energy(st, Yq)) < 1e-9);
    ExcitationY empty;
    CHECK(std::abs(excitation_energy(st, empty)) == 0.0);
    CHECK(std::abs(excitation_momentum(st, empty)) == 0.0);
    ExcitationY Y2 = one_hole(0.2, 1, 0);
    const double p_expect = -2.0 * std::atan(std::tanh(0.2));
    CHECK(excitation_momentum(st, Y2).real() == doctest::Approx(p_expect).epsilon(1e-10));
    CHECK(excitation_momentum(st, Y2, true).real() ==
          doctest::Approx(p_expect + st.fermi.p_F).epsilon(1e-10));
  }

  TEST_CASE("reduced momentum-energy combination") {
    const auto& st = state_ff();
    ExcitationY umk;
    umk.ell_plus = 1;
    umk.ell_minus = -1;
    umk.validate();
    CHECK(reduced_U(st, umk, 1.7).real() == doctest::Approx(2.0 * st.fermi.p_F).epsilon(1e-12));
    CHECK_THROWS_AS(reduced_U(st, umk, 0.0), validation_error);
    // u_1(q, v) = p_F since eps_1(q) = 0
    ExcitationY hq = one_hole(st.grid.q, 1, 0);
    CHECK(reduced_U(st, hq, 2.2).real() ==
          doctest::Approx(-st.fermi.p_F + st.fermi.p_F).epsilon(1e-9));
  }

  TEST_CASE("free-fermion shift exponents") {
    const auto& st = state_ff();
    ExcitationY Y = one_hole(0.3, 1, 0);
    auto ce = critical_exponents(st, Y);
    CHECK(ce.theta_plus.real() == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(ce.theta_minus) < 1e-12);
    CHECK(ce.Delta_plus.real() == doctest::Approx(1.0).epsilon(1e-12));

    ExcitationY plus;
    plus.op = Operator::sigma_plus;
    auto cp = critical_exponents(st, plus);
    CHECK(cp.theta_plus.real() == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(cp.theta_minus.real() == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(cp.Delta_plus.real() == doctest::Approx(0.25).epsilon(1e-12));

    ExcitationY minus;
    minus.op = Operator::sigma_minus;
    CHECK(critical_exponents(st, minus).theta_plus.real() == doctest::Approx(0.5).epsilon(1e-12));
  }

  TEST_CASE("coinciding particle-hole pair cancels in the shift exponent") {
    const auto& st = state_03();
    ExcitationY pair;
    pair.holes = CVec(1);
    pair.holes[0] = Cplx(0.13, 0.0);
    pair.strings[1] = CVec(1);
    pair.strings[1][0] = Cplx(0.13, 0.0);
    auto ce_pair = critical_exponents(st, pair);
    ExcitationY empty;
    auto ce_empty = critical_exponents(st, empty);
    CHECK(std::abs(ce_pair.theta_plus - ce_empty.theta_plus) < 1e-12);
    CHECK(std::abs(ce_pair.theta_minus - ce_empty.theta_minus) < 1e-12);
  }

  TEST_CASE("singular prefactor basics") {
    const auto& st = state_ff();
    ExcitationY empty;
    CHECK(singular_D(st, empty) == Cplx(1.0, 0.0));

    // free fermion, one hole with ell_+ = 1: all shift exponents vanish and
    // D reduces to the Umklapp power 1/(mu - q)^2
    const double q = st.grid.q;
    ExcitationY Y = one_hole(0.2, 1, 0);
    const Cplx D = singular_D(st, Y);
    CHECK(D.real() == doctest::Approx(1.0 / ((0.2 - q) * (0.2 - q))).epsilon(1e-10));
    CHECK(std::abs(D.imag()) < 1e-10);

    // two coinciding holes vanish through the Vandermonde factor
    ExcitationY twin;
    twin.holes = CVec(2);
    twin.holes[0] = twin.holes[1] = Cplx(0.1, 0.0);
    twin.ell_plus = 2;
    CHECK(std::abs(singular_D(st, twin)) == 0.0);

    // particle colliding with a hole is singular
    ExcitationY coll;
    coll.holes = CVec(1);
    coll.holes[0] = Cplx(0.1, 0.0);
    coll.strings[1] = CVec(1);
    coll.strings[1][0] = Cplx(0.1, 0.0);
    CHECK_THROWS_AS(singular_D(st, coll), numerical_error);
  }

  TEST_CASE("string vandermonde over ordered pairs") {
    ExcitationY Y;
    Y.strings[2] = CVec(2);
    Y.strings[2][0] = Cplx(0.4, 0.0);
    Y.strings[2][1] = Cplx(-0.1, 0.0);
    Y.ell_plus = -2;
    Y.ell_minus = -2;
    const Cplx d = Y.strings[2][0] - Y.strings[2][1];
    CHECK(string_vandermonde(Y) == -d * d);
  }

  TEST_CASE("shift exponent and reduced U are invariant across the cut rays") {
    const auto& st = state_03();
    const double zeta = st.prm.zeta;
    const double q = st.grid.q;
    const double e = 1e-6;
    for (int sigma : {+1, -1}) {
      const int s = 2;
      const double f = std::min(hat_eta((s + sigma) * zeta / 2.0),
                                pi - hat_eta((s + sigma) * zeta / 2.0));
      ExcitationY up;
      up.strings[s] = CVec(1);
      up.strings[s][0] = Cplx(-q - 0.4, f + e);
      up.ell_plus = -1;
      up.ell_minus = -1;
      ExcitationY dn = up;
      dn.strings[s][0] = Cplx(-q - 0.4, f - e);
      dn = jump_shifted_Y(dn, s, sigma, zeta);

      auto ce_up = critical_exponents(st, up);
      auto ce_dn = critical_exponents(st, dn);
      CHECK(std::abs(ce_up.theta_plus - ce_dn.theta_plus) < 1e-6);
      CHECK(std::abs(ce_up.theta_minus - ce_dn.theta_minus) < 1e-6);

      const Cplx u_up = reduced_U(st, up, 2.5);
      const Cplx u_dn = reduced_U(st, dn, 2.5);
      CHECK(std::abs(u_up - u_dn) < 2e-5);
    }
  }

  TEST_CASE("exp(iU) is continuous across the positive string-momentum rays") {
    const auto& st = state_03();
    const double e = 1e-6;
    const double ord = 2.0 * st.prm.zeta / 2.0; // r = 2 ray ordinate
    auto make = [&](double im) {
      ExcitationY Y;
      Y.strings[2] = CVec(1);
      Y.strings[2][0] = Cplx(0.5, im);
      Y.ell_plus = -1;
      Y.ell_minus = -1;
      return Y;
    };
    const Cplx u_up = reduced_U(st, make(ord + e), 3.0);
    const Cplx u_dn = reduced_U(st, make(ord - e), 3.0);
    const Cplx i(0.0, 1.0);
    CHECK(std::abs(std::exp(i * u_up) - std::exp(i * u_dn)) < 2e-5);
    // the momentum itself genuinely jumps by a full 2 pi across the ray
    const double jump = (u_up - u_dn).real();
    CHECK(std::abs(std::abs(jump) - 2.0 * pi) < 1e-4);
  }
}
