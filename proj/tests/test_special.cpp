#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "critpoint/errors.hpp"
#include "critpoint/special.hpp"

using namespace critpoint;

namespace {
const double kSqrt2Pi = std::sqrt(2.0 * std::numbers::pi);
}

TEST_CASE("normal distribution functions") {
  CHECK(gaussian_pdf(0.0) == doctest::Approx(1.0 / kSqrt2Pi).epsilon(1e-15));
  CHECK(gaussian_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(gaussian_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-14));
  CHECK(gaussian_cdf(-1.0) == doctest::Approx(0.15865525393145705).epsilon(1e-14));
  // Far tail keeps relative accuracy.
  CHECK(gaussian_sf(8.0) == doctest::Approx(6.220960574271785e-16).epsilon(1e-12));
  CHECK(gaussian_cdf(-8.0) == doctest::Approx(6.220960574271785e-16).epsilon(1e-12));
  for (double x : {-3.0, -0.5, 0.2, 2.5}) CHECK(gaussian_cdf(x) + gaussian_sf(x) == doctest::Approx(1.0));
}

TEST_CASE("partial moments against known integrals") {
  CHECK(gaussian_partial_moment(0, {}) == doctest::Approx(kSqrt2Pi).epsilon(1e-14));
  CHECK(gaussian_partial_moment(2, {}) == doctest::Approx(kSqrt2Pi).epsilon(1e-14));
  CHECK(gaussian_partial_moment(4, {}) == doctest::Approx(3 * kSqrt2Pi).epsilon(1e-14));
  CHECK(gaussian_partial_moment(1, {0.0, kInf}) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(gaussian_partial_moment(1, {}) == doctest::Approx(0.0));
  CHECK(gaussian_partial_moment(4, {-kInf, 0.0}) == doctest::Approx(1.5 * kSqrt2Pi).epsilon(1e-14));
  CHECK(gaussian_partial_moment(0, {0.0, 1.0}) ==
        doctest::Approx(kSqrt2Pi * (gaussian_cdf(1.0) - 0.5)).epsilon(1e-14));
  CHECK_THROWS_AS(gaussian_partial_moment(kMaxPartialMomentOrder + 1, {}), PreconditionError);
}

TEST_CASE("partial moments agree with quadrature on random intervals") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 25; ++trial) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    double m[11];
    gaussian_partial_moments(10, {a, b}, m);
    for (int k = 0; k <= 10; ++k) {
      const double q = integrate_1d([k](double x) { return std::pow(x, k) * std::exp(-0.5 * x * x); },
                                    {a, b}, QuadOptions{1e-13, 1e-13, 200})
                           .value;
      CHECK(m[k] == doctest::Approx(q).epsilon(1e-10).scale(1.0));
      CHECK(gaussian_partial_moment(k, {a, b}) == doctest::Approx(m[k]).epsilon(1e-14));
    }
  }
}

TEST_CASE("adaptive quadrature") {
  const auto r = integrate_1d([](double x) { return std::exp(-0.5 * x * x); }, {});
  CHECK(r.value == doctest::Approx(kSqrt2Pi).epsilon(1e-12));
  CHECK(r.error <= 1e-10);

  const double kink[] = {0.0};
  const auto k = integrate_1d([](double x) { return std::abs(x) * std::exp(-x * x); }, {}, kink);
  CHECK(k.value == doctest::Approx(1.0).epsilon(1e-12));

  // Nested use inside an integrand.
  const auto nested = integrate_1d(
      [](double x) {
        return integrate_1d([x](double y) { return std::exp(-0.5 * (x * x + y * y)); }, {}).value;
      },
      {});
  CHECK(nested.value == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-10));

  CHECK(integrate_1d([](double) { return 1.0; }, {1.0, 1.0}).value == 0.0);
  CHECK_THROWS_AS(integrate_1d([](double) { return 1.0; }, {2.0, 1.0}), PreconditionError);
}

TEST_CASE("quadrature failure reports estimate and bound") {
  try {
    integrate_1d([](double x) { return std::sin(2000.0 * x) * std::exp(-0.5 * x * x) + 1e-3 * std::abs(x - 0.3); },
                 {-10.0, 10.0}, QuadOptions{1e-15, 0.0, 3});
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::isfinite(e.estimate()));
    CHECK(e.bound() > 1e-15);
  }
}

TEST_CASE("integrand exceptions propagate") {
  CHECK_THROWS_AS(integrate_1d([](double x) -> double {
                    if (x > 0.5) throw std::domain_error("boom");
                    return x;
                  }, {0.0, 1.0}),
                  std::domain_error);
  // The workspace pool is still usable afterwards.
  CHECK(integrate_1d([](double x) { return x; }, {0.0, 1.0}).value == doctest::Approx(0.5));
}
