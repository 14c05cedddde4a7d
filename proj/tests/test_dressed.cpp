#include <cstdio>
#include <filesystem>
#include <fstream>

#include "common.hpp"
#include "doctest.h"
#include "xxz/dressed.hpp"

using namespace xxz;

TEST_SUITE("dressed") {
  TEST_CASE("free-fermion closed forms") {
    const auto& st = state_ff();
    CHECK(st.grid.q == doctest::Approx(0.6584789484624084).epsilon(1e-11));
    CHECK(st.fermi.v_F == doctest::Approx(3.464101615137755).epsilon(1e-10));
    CHECK(st.fermi.p_F == doctest::Approx(pi / 3.0).epsilon(1e-10));
    // v_F = h sinh(2q) at this point
    CHECK(st.fermi.v_F == doctest::Approx(2.0 * std::sinh(2.0 * st.grid.q)).epsilon(1e-10));
    for (double lam : {0.0, 0.2, 0.5, st.grid.q}) {
      CHECK(st.eval_Z(lam) == doctest::Approx(1.0).epsilon(1e-12));
      const double sh2 = std::sinh(lam) * std::sinh(lam);
      CHECK(st.eval_eps1(lam) == doctest::Approx(2.0 - 2.0 / (sh2 + 0.5)).epsilon(1e-12));
      CHECK(st.eval_p1d(lam) == doctest::Approx(1.0 / (sh2 + 0.5)).epsilon(1e-12));
    }
    // dressed phase vanishes identically
    CVec sol = st.phi_solve(1, Cplx(0.2, 0.0));
    CHECK(sol.cwiseAbs().maxCoeff() < 1e-14);
    CHECK(std::abs(st.phi_at(0.5, 1, Cplx(0.2, 0.0), sol)) < 1e-14);
  }

  TEST_CASE("fermi data against pinned values") {
    const auto& s3 = state_03();
    CHECK(s3.grid.q == doctest::Approx(0.40840570364107376).epsilon(1e-9));
    CHECK(s3.fermi.p_F == doctest::Approx(1.114464706313507).epsilon(1e-9));
    CHECK(s3.fermi.v_F == doctest::Approx(4.602153539696217).epsilon(1e-9));
    CHECK(s3.eval_eps1(0.0) == doctest::Approx(-2.8699028285619894).epsilon(1e-9));
    CHECK(s3.eval_eps1_deriv(s3.grid.q) == doctest::Approx(7.908812687547138).epsilon(1e-8));
    CHECK(s3.eval_p1d(s3.grid.q) == doctest::Approx(1.7185025704442685).epsilon(1e-9));
    CHECK(s3.eval_Z(0.0) == doctest::Approx(0.8501537251586606).epsilon(1e-9));
    CHECK(s3.eval_Z(s3.grid.q) == doctest::Approx(0.8756207946629467).epsilon(1e-9));

    const auto& s7 = state_07();
    CHECK(s7.grid.q == doctest::Approx(0.8943529790545501).epsilon(1e-9));
    CHECK(s7.fermi.p_F == doctest::Approx(0.9584715508446554).epsilon(1e-9));
    CHECK(s7.fermi.v_F == doctest::Approx(2.0070034232542944).epsilon(1e-9));
    CHECK(s7.eval_Z(0.0) == doctest::Approx(1.4189038543879862).epsilon(1e-9));
    CHECK(s7.eval_Z(s7.grid.q) == doctest::Approx(1.2600874764109418).epsilon(1e-9));
  }

  TEST_CASE("momentum routes agree and p1 is odd") {
    const auto& st = state_03();
    const double q = st.grid.q;
    CHECK(st.p1_integral(q) == doctest::Approx(st.fermi.p_F).epsilon(1e-10));
    for (double lam : {0.1, 0.25, q}) {
      const double plus = st.p_r(Cplx(lam, 0.0), 1).real();
      const double minus = st.p_r(Cplx(-lam, 0.0), 1).real();
      CHECK(plus == doctest::Approx(-minus).epsilon(1e-10));
      CHECK(plus == doctest::Approx(st.p1_integral(lam)).epsilon(1e-10));
    }
  }

  TEST_CASE("integral-equation residual at off-grid points") {
    const auto& st = state_03();
    const double q = st.grid.q;
    auto fine = gauss_legendre(400);
    const double scale = std::abs(st.prm.h) + 4.0 * pi * st.prm.J;
    for (int k = 0; k < 7; ++k) {
      const double lam = -0.97 * q + 2.0 * 0.97 * q * k / 6.0;
      double conv = 0.0;
      for (int j = 0; j < 400; ++j) {
        const double mu = fine.x[j] * q;
        conv += fine.w[j] * q * kernel_K(lam - mu, st.prm.zeta) * st.eval_eps1(mu);
      }
      const double resid = std::abs(st.eval_eps1(lam) + conv - st.driving_eps(lam));
      CHECK(resid < 1e-9 * scale);
    }
  }

  TEST_CASE("dressed phase spot values and exact identities") {
    const auto& s3 = state_03();
    const double q3 = s3.grid.q;
    CVec sq = s3.phi_solve(1, Cplx(q3, 0.0));
    CVec smq = s3.phi_solve(1, Cplx(-q3, 0.0));
    CVec s02 = s3.phi_solve(1, Cplx(0.2, 0.0));
    CHECK(s3.phi_at(q3, 1, Cplx(q3, 0.0), sq).real() ==
          doctest::Approx(0.008833839268419795).epsilon(1e-8));
    CHECK(s3.phi_at(-q3, 1, Cplx(q3, 0.0), sq).real() ==
          doctest::Approx(-0.13321304460547287).epsilon(1e-8));
    CHECK(s3.phi_at(q3, 1, Cplx(0.2, 0.0), s02).real() ==
          doctest::Approx(0.05078453366700113).epsilon(1e-8));
    CHECK(s3.phi_at(-q3, 1, Cplx(0.2, 0.0), s02).real() ==
          doctest::Approx(-0.11274624648047646).epsilon(1e-8));
    // charge identities
    for (int k = 0; k <= 16; ++k) {
      const double lam = -q3 + 2.0 * q3 * k / 16.0;
      const Cplx lhs =
          s3.phi_at(lam, 1, Cplx(q3, 0.0), sq) - s3.phi_at(lam, 1, Cplx(-q3, 0.0), smq) + 1.0;
      CHECK(std::abs(lhs.real() - s3.eval_Z(lam)) < 1e-8);
    }
    const double id2 = 1.0 + s3.phi_at(q3, 1, Cplx(q3, 0.0), sq).real() -
                       s3.phi_at(-q3, 1, Cplx(q3, 0.0), sq).real();
    CHECK(id2 == doctest::Approx(1.0 / s3.eval_Z(q3)).epsilon(1e-8));

    const auto& s7 = state_07();
    const double q7 = s7.grid.q;
    CVec sq7 = s7.phi_solve(1, Cplx(q7, 0.0));
    CHECK(s7.phi_at(q7, 1, Cplx(q7, 0.0), sq7).real() ==
          doctest::Approx(0.026841587053339153).epsilon(1e-8));
    CHECK(s7.phi_at(-q7, 1, Cplx(q7, 0.0), sq7).real() ==
          doctest::Approx(0.2332458893576029).epsilon(1e-8));
  }

  TEST_CASE("string-line energies and momentum derivatives") {
    struct Spot {
      int r, delta;
      double eps0, prd03;
    };
    const Spot spots3[] = {{2, 0, 4.8338805226548605, 0.2263740872884663},
                           {3, 0, 9.181629126347195, 0.05717140907245111},
                           {4, 0, 13.405477062366051, -0.11429736228303722},
                           {7, 1, 22.57407591950227, -0.05717140907245105}};
    for (const auto& sp : spots3) {
      const Cplx line(0.0, sp.delta * pi / 2.0);
      const Cplx e0 = state_03().eps_r(line, sp.r);
      CHECK(e0.real() == doctest::Approx(sp.eps0).epsilon(1e-8));
      CHECK(std::abs(e0.imag()) < 1e-9);
      const Cplx pd = state_03().p_r_deriv(0.3 + line, sp.r);
      CHECK(pd.real() == doctest::Approx(sp.prd03).epsilon(1e-8));
      CHECK(std::abs(pd.imag()) < 1e-9);
    }
    const Spot spots7[] = {{2, 0, 4.937164906961098, -2.519099704442189},
                           {3, 1, 2.74786657053228, -0.0027446885157338397},
                           {4, 0, 2.748330390875415, 0.002802109258549068},
                           {7, 0, 5.496428383618258, 0.002744688515734006}};
    for (const auto& sp : spots7) {
      const Cplx line(0.0, sp.delta * pi / 2.0);
      CHECK(state_07().eps_r(line, sp.r).real() == doctest::Approx(sp.eps0).epsilon(1e-8));
      CHECK(state_07().p_r_deriv(0.3 + line, sp.r).real() ==
            doctest::Approx(sp.prd03).epsilon(1e-7));
    }
  }

  TEST_CASE("string momenta with branch constants") {
    const auto& s3 = state_03();
    const Cplx p2 = s3.p_r(Cplx(0.3, 0.0), 2);
    CHECK(p2.real() == doctest::Approx(-3.083512455181795).epsilon(1e-8));
    CHECK(std::abs(p2.imag()) < 1e-9);
    CHECK(s3.p_r(Cplx(-20.0, 0.0), 2).real() == doctest::Approx(-3.5066579499748975).epsilon(1e-8));
    CHECK(s3.p_r(Cplx(20.0, 0.0), 2).real() == doctest::Approx(-2.7765273572046887).epsilon(1e-8));
    const Cplx p7 = s3.p_r(Cplx(0.2, pi / 2.0), 7);
    CHECK(p7.real() == doctest::Approx(-19.06217013800675).epsilon(1e-7));
    CHECK(std::abs(p7.imag()) < 1e-7);

    const auto& s7 = state_07();
    CHECK(s7.p_r(Cplx(0.3, 0.0), 2).real() == doctest::Approx(-2.0363466087986914).epsilon(1e-8));
    CHECK(s7.p_r(Cplx(0.2, 0.0), 7).real() == doctest::Approx(-3.407576048247788).epsilon(1e-7));
  }

  TEST_CASE("hole dispersion point on the momentum curve") {
    const auto& s3 = state_03();
    const double target = s3.fermi.p_F / 2.0;
    double lo = 0.0, hi = s3.grid.q;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (s3.p1_integral(mid) < target ? lo : hi) = mid;
    }
    CHECK(s3.eval_eps1(0.5 * (lo + hi)) == doctest::Approx(-2.0934010768443487).epsilon(1e-8));
  }

  TEST_CASE("chebyshev interior representation") {
    const auto& st = state_03();
    auto fn = st.chebyshev_fn("charge");
    CHECK(fn.resolved());
    for (double t : {-0.9, -0.4, 0.0, 0.33, 0.95}) {
      const double lam = t * st.grid.q;
      CHECK(fn.eval(lam) == doctest::Approx(st.eval_Z(lam)).epsilon(1e-10));
    }
    CHECK_THROWS_AS(fn.eval(2.0 * st.grid.q), validation_error);
  }

  TEST_CASE("grid doubling leaves reported values unchanged") {
    const auto& base = state_03();
    ThermoState fine(base.prm, 192);
    CHECK(std::abs(fine.grid.q - base.grid.q) < 1e-9);
    CHECK(std::abs(fine.fermi.p_F - base.fermi.p_F) < 1e-9);
    CHECK(std::abs(fine.fermi.v_F - base.fermi.v_F) < 1e-9);
    CHECK(std::abs(fine.eval_eps1(0.1) - base.eval_eps1(0.1)) < 1e-9);
  }

  TEST_CASE("cache round trip, key mismatch, corruption") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "xxz_cache_test";
    fs::remove_all(dir);
    const auto& st = state_03();
    cache_store(st, dir);
    auto loaded = cache_load(st.prm, st.n, dir);
    REQUIRE(loaded.has_value());
    CHECK(loaded->grid.q == st.grid.q);
    CHECK((loaded->eps1 - st.eps1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded->Zv - st.Zv).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded->fermi.v_F == st.fermi.v_F);

    ModelParams other = st.prm;
    other.h += 1e-6;
    CHECK_FALSE(cache_load(other, st.n, dir).has_value());

    std::ofstream(dir / cache_key(st.prm, st.n)) << "{ not json";
    CHECK_THROWS_AS(cache_load(st.prm, st.n, dir), cache_error);
    fs::remove_all(dir);
  }

  TEST_CASE("model validation rejects out-of-regime parameters") {
    CHECK_THROWS_AS(ThermoState({1.0, pi / 2.0, 5.0}, 64), validation_error); // h > h_c = 4
    CHECK_THROWS_AS(ThermoState({1.0, pi / 2.0, -0.1}, 64), validation_error);
    CHECK_THROWS_AS(ThermoState({-1.0, pi / 2.0, 1.0}, 64), validation_error);
    CHECK_THROWS_AS(ThermoState({1.0, 3.5, 1.0}, 64), validation_error); // zeta > pi
  }
}
