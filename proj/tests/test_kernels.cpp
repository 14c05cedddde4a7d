#include <cmath>

#include "doctest.h"
#include "xxz/kernels.hpp"

using namespace xxz;

TEST_SUITE("kernels") {
  TEST_CASE("kernel symmetry and angle reflection") {
    const double eta = 0.35 * pi;
    for (double lam : {0.0, 0.3, 1.7, -2.4}) {
      CHECK(kernel_K(lam, eta) == doctest::Approx(kernel_K(-lam, eta)).epsilon(1e-14));
      // sin(2(pi - eta)) = -sin(2 eta) while sinh^2 + sin^2 is invariant
      CHECK(kernel_K(lam, pi - eta) == doctest::Approx(-kernel_K(lam, eta)).epsilon(1e-14));
    }
    CHECK(kernel_K(0.4, pi / 2.0) == doctest::Approx(0.0));
  }

  TEST_CASE("kernel derivative matches finite differences") {
    const double eta = 0.22 * pi, h = 1e-6;
    for (double lam : {0.15, 0.9, -1.3}) {
      const double fd = (kernel_K(lam + h, eta) - kernel_K(lam - h, eta)) / (2.0 * h);
      CHECK(kernel_Kp(lam, eta) == doctest::Approx(fd).epsilon(1e-7));
    }
  }

  TEST_CASE("bare phase on the real axis") {
    const double eta = 0.3 * pi;
    CHECK(bare_theta_real(0.0, eta) == doctest::Approx(0.0));
    for (double lam : {0.2, 1.1, 2.6}) {
      CHECK(bare_theta_real(-lam, eta) == doctest::Approx(-bare_theta_real(lam, eta)).epsilon(1e-14));
      const double h = 1e-6;
      const double fd = (bare_theta_real(lam + h, eta) - bare_theta_real(lam - h, eta)) / (2.0 * h);
      CHECK(fd == doctest::Approx(2.0 * pi * kernel_K(lam, eta)).epsilon(1e-6));
    }
  }

  TEST_CASE("complex bare phase against pinned path-integral values") {
    ThetaEvaluator th;
    const Cplx t1 = th.theta(Cplx(0.6, pi / 2.0), 0.35 * pi);
    CHECK(t1.real() == doctest::Approx(-4.76497531975626).epsilon(1e-7));
    CHECK(std::abs(t1.imag()) < 1e-7);
    const Cplx t2 = th.theta(Cplx(1.1, pi / 2.0), 0.7 * pi);
    CHECK(t2.real() == doctest::Approx(4.80917580496499).epsilon(1e-7));
    CHECK(std::abs(t2.imag()) < 1e-7);
  }

  TEST_CASE("complex path reduces to the closed form near the real axis") {
    ThetaEvaluator th;
    const double eta = 0.41 * pi;
    for (double lam : {-1.2, 0.4, 2.0}) {
      const Cplx v = th.theta(Cplx(lam, 0.0), eta);
      CHECK(v.real() == doctest::Approx(bare_theta_real(lam, eta)).epsilon(1e-12));
    }
  }

  TEST_CASE("derivative of the complex phase is the kernel") {
    ThetaEvaluator th;
    const double eta = 0.3 * pi, h = 1e-5;
    const Cplx lam(0.7, 0.9);
    const Cplx fd = (th.theta(lam + h, eta) - th.theta(lam - h, eta)) / (2.0 * h);
    const Cplx expect = 2.0 * pi * kernel_K(lam, eta);
    CHECK(std::abs(fd - expect) < 1e-6);
  }

  TEST_CASE("batched line evaluation agrees with single-point calls") {
    ThetaEvaluator th;
    const double eta = 0.27 * pi, Y = pi / 2.0;
    Vec re(5);
    re << -2.1, -0.4, 0.0, 0.9, 3.3;
    CVec batch = th.theta_line(Y, re, eta);
    ThetaEvaluator fresh;
    for (int i = 0; i < 5; ++i) {
      const Cplx single = fresh.theta(Cplx(re[i], Y), eta);
      CHECK(std::abs(batch[i] - single) < 1e-11);
    }
  }

  TEST_CASE("bound-state phase combines the two angle components") {
    ThetaEvaluator th;
    const double zeta = 0.3 * pi;
    // r = 1 keeps only the first component
    CHECK(th.theta_r(Cplx(0.8, 0.0), 1, zeta).real() ==
          doctest::Approx(bare_theta_real(0.8, zeta)).epsilon(1e-12));
    // real-axis derivative of theta_r is 2 pi K_r
    const double h = 1e-6;
    const double fd =
        (th.theta_r(Cplx(0.5 + h, 0.0), 3, zeta).real() -
         th.theta_r(Cplx(0.5 - h, 0.0), 3, zeta).real()) /
        (2.0 * h);
    CHECK(fd == doctest::Approx(2.0 * pi * kernel_Kr(0.5, 3, zeta)).epsilon(1e-6));
  }

  TEST_CASE("pole-ray heights are rejected, pi/2-multiple angles vanish") {
    ThetaEvaluator th;
    // Im(lambda) exactly on a kernel pole ray for eta = 0.3 pi
    CHECK_THROWS_AS(th.theta(Cplx(0.5, 0.3 * pi), 0.3 * pi), validation_error);
    CHECK(std::abs(th.theta(Cplx(0.5, 1.0), pi / 2.0)) == doctest::Approx(0.0));
  }
}
