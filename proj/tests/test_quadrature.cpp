#include <cmath>

#include "doctest.h"
#include "xxz/params.hpp"
#include "xxz/quadrature.hpp"

using namespace xxz;

TEST_SUITE("quadrature") {
  TEST_CASE("gauss-legendre integrates polynomials of degree 2n-1 exactly") {
    auto g = gauss_legendre(4);
    CHECK(g.w.sum() == doctest::Approx(2.0).epsilon(1e-14));
    // int_{-1}^{1} x^6 dx = 2/7, degree 6 < 2*4
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += g.w[i] * std::pow(g.x[i], 6);
    CHECK(s == doctest::Approx(2.0 / 7.0).epsilon(1e-14));
  }

  TEST_CASE("gauss-legendre matches smooth integrals at n=64") {
    auto g = gauss_legendre(64);
    double s = 0.0;
    for (int i = 0; i < 64; ++i) s += g.w[i] * std::exp(g.x[i]);
    CHECK(s == doctest::Approx(std::exp(1.0) - std::exp(-1.0)).epsilon(1e-14));
    CHECK(std::is_sorted(g.x.data(), g.x.data() + g.x.size()));
  }

  TEST_CASE("gauss-laguerre reproduces gamma-function moments") {
    const double alpha = -0.4;
    auto g = gauss_laguerre(48, alpha);
    // int_0^inf x^alpha e^{-x} dx = Gamma(alpha+1)
    CHECK(g.w.sum() == doctest::Approx(std::tgamma(alpha + 1.0)).epsilon(1e-12));
    double s = 0.0;
    for (int i = 0; i < 48; ++i) s += g.w[i] * g.x[i];
    CHECK(s == doctest::Approx(std::tgamma(alpha + 2.0)).epsilon(1e-12));
  }

  TEST_CASE("barycentric interpolation on a legendre grid") {
    auto g = gauss_legendre(40);
    Vec lam = barycentric_weights(g);
    Vec f(40);
    for (int i = 0; i < 40; ++i) f[i] = std::cos(2.0 * g.x[i]);
    for (double t : {-0.83, -0.21, 0.0, 0.47, 0.99}) {
      CHECK(barycentric_eval(g.x, lam, f, t) == doctest::Approx(std::cos(2.0 * t)).epsilon(1e-12));
    }
    // exact node hit returns the stored value
    CHECK(barycentric_eval(g.x, lam, f, g.x[7]) == f[7]);
  }

  TEST_CASE("chebyshev coefficients round-trip through clenshaw") {
    const int n = 32;
    Vec nodes = chebyshev_lobatto(n);
    Vec vals(n + 1);
    for (int k = 0; k <= n; ++k) vals[k] = std::exp(nodes[k]) * std::sin(3.0 * nodes[k]);
    Vec c = chebyshev_coeffs_from_lobatto(vals);
    for (double t : {-0.9, -0.3, 0.12, 0.77}) {
      CHECK(chebyshev_eval(c, t) ==
            doctest::Approx(std::exp(t) * std::sin(3.0 * t)).epsilon(1e-12));
    }
    CHECK(std::abs(c[n]) < 1e-12 * c.cwiseAbs().maxCoeff());
  }

  TEST_CASE("adaptive line integration handles complex integrands") {
    Cplx v = integrate_line([](double t) { return std::exp(Cplx(0.0, t)); }, 0.0, pi / 2.0);
    CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.imag() == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("graded panels tile the interval without gaps") {
    auto pts = graded_panels(-2.0, 3.0, 0.01, true, true);
    REQUIRE(pts.size() >= 2);
    CHECK(pts.front() == doctest::Approx(-2.0));
    CHECK(pts.back() == doctest::Approx(3.0));
    CHECK(std::is_sorted(pts.begin(), pts.end()));
    // breakpoints are graded toward both ends
    CHECK(pts[1] - pts[0] == doctest::Approx(0.02).epsilon(1e-12));
  }
}
