#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "critpoint/errors.hpp"
#include "critpoint/goe.hpp"
#include "critpoint/special.hpp"

using namespace critpoint;

namespace {

const double kPi = std::numbers::pi;

// Trapezoid on [-10, 10]; the integrands decay like exp(-l^2/2) so this is spectrally accurate.
template <class F>
double trapezoid(F f, double h = 0.05) {
  double s = 0;
  for (double x = -10.0; x <= 10.0 + 1e-12; x += h) s += f(x);
  return s * h;
}

struct Running {
  double sum = 0, sum2 = 0;
  long n = 0;
  void add(double x) {
    sum += x;
    sum2 += x * x;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double se() const {
    const double m = mean();
    return std::sqrt((sum2 / static_cast<double>(n) - m * m) / static_cast<double>(n));
  }
};

}  // namespace

TEST_CASE("normalization constants") {
  CHECK(normalization_kn(0) == 1.0);
  CHECK(normalization_kn(1) == doctest::Approx(1.0 / std::sqrt(2 * kPi)).epsilon(1e-14));
  CHECK(normalization_kn(2) == doctest::Approx(1.0 / (4.0 * std::sqrt(kPi))).epsilon(1e-14));

  const double zero[] = {0.0};
  CHECK(joint_eigen_density(zero) == doctest::Approx(1.0 / std::sqrt(2 * kPi)));
  const double tie[] = {0.3, 0.3};
  CHECK(joint_eigen_density(tie) == 0.0);

  // f_2 integrates to 1 over R^2 (nested 1-D quadrature).
  const double total = integrate_1d(
                           [](double y) {
                             const double kink[] = {y};
                             return integrate_1d(
                                        [y](double x) {
                                          const double mu[] = {x, y};
                                          return joint_eigen_density(mu);
                                        },
                                        {}, kink)
                                 .value;
                           },
                           {})
                           .value;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("subset enumeration") {
  const auto s = subsets(4, 2);
  REQUIRE(s.size() == 6);
  CHECK(s.front() == std::vector<int>{1, 2});
  CHECK(s[1] == std::vector<int>{1, 3});
  CHECK(s.back() == std::vector<int>{3, 4});
  CHECK(subsets(7, 3).size() == 35);
  CHECK(subsets(3, 0).size() == 1);
  CHECK(subsets(3, 0).front().empty());
}

TEST_CASE("skew entries") {
  for (double ell : {-1.3, 0.0, 0.7, 2.0}) {
    CAPTURE(ell);
    const auto a = build_skew_A(1, 1, {}, ell);
    REQUIRE(a.dim() == 2);
    const double border = std::exp(-0.5 * ell * ell) - ell * std::sqrt(2 * kPi) * gaussian_sf(ell);
    CHECK(a(0, 1) == doctest::Approx(border).epsilon(1e-10));
    CHECK(a(1, 0) == -a(0, 1));
  }
  const int I[] = {2};
  const auto b = build_skew_A(2, 4, I, 0.4);
  for (int i = 0; i < b.dim(); ++i)
    for (int j = 0; j < b.dim(); ++j) CHECK(b(i, j) == -b(j, i));
}

TEST_CASE("ordered eigenvalue densities at reference points") {
  CHECK(ordered_eigen_density(3, 2, 0.0) == doctest::Approx(1.0 / std::sqrt(kPi)).epsilon(1e-9));
  CHECK(ordered_eigen_density(2, 2, 0.0) == doctest::Approx(0.5 / std::sqrt(kPi)).epsilon(1e-9));
  CHECK(ordered_eigen_density(3, 3, 0.0) ==
        doctest::Approx((std::sqrt(2 * kPi) - std::sqrt(kPi)) / (2 * kPi * std::sqrt(2.0))).epsilon(1e-9));
  CHECK(closed_form_density(3, 2, 1.0) == doctest::Approx(std::exp(-1.0) / std::sqrt(kPi)).epsilon(1e-12));
  CHECK(closed_form_density(3, 2, 1.0) == doctest::Approx(0.207554).epsilon(1e-6));
  CHECK(closed_form_density(5, 4, 0.0) == doctest::Approx(1.0 / (4.0 * std::sqrt(kPi))).epsilon(1e-12));
  CHECK(ordered_eigen_density(5, 4, 0.0) == doctest::Approx(1.0 / (4.0 * std::sqrt(kPi))).epsilon(1e-8));

  CHECK_THROWS_AS(ordered_eigen_density(9, 1, 0.0), PreconditionError);
  CHECK_THROWS_AS(ordered_eigen_density(3, 4, 0.0), PreconditionError);
  CHECK_THROWS_AS(closed_form_density(6, 1, 0.0), PreconditionError);
}

TEST_CASE("reflection and agreement with closed forms") {
  for (int N = 2; N <= 5; ++N) {
    for (double ell = -6.0; ell <= 6.0; ell += 0.75) {
      const auto q = ordered_eigen_densities(N, ell);
      const auto qr = ordered_eigen_densities(N, -ell);
      for (int k = 1; k <= N; ++k) {
        CAPTURE(N);
        CAPTURE(k);
        CAPTURE(ell);
        CHECK(std::abs(q[k - 1] - qr[N - k]) <= 1e-9);
        CHECK(std::abs(q[k - 1] - closed_form_density(N, k, ell)) <= 1e-6);
        CHECK(q[k - 1] == doctest::Approx(ordered_eigen_density(N, k, ell)).epsilon(1e-12));
      }
    }
  }
  for (double ell : {-1.0, 0.3, 2.2}) CHECK(closed_form_density(4, 3, ell) == doctest::Approx(closed_form_density(4, 2, -ell)));
}

TEST_CASE("ordered densities are normalized") {
  for (int N = 2; N <= 6; ++N) {
    std::vector<double> mass(static_cast<std::size_t>(N), 0.0);
    const double h = 0.05;
    for (double x = -10.0; x <= 10.0 + 1e-12; x += h) {
      const auto q = ordered_eigen_densities(N, x);
      for (int k = 0; k < N; ++k) mass[k] += q[k] * h;
    }
    for (int k = 0; k < N; ++k) {
      CAPTURE(N);
      CAPTURE(k);
      CHECK(mass[k] == doctest::Approx(1.0).epsilon(1e-7));
    }
  }
  for (int k = 1; k <= 5; ++k)
    CHECK(trapezoid([k](double x) { return closed_form_density(5, k, x); }) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("exponential moments of ordered eigenvalues") {
  const auto m3 = exp_moments_ordered(3);
  REQUIRE(m3.size() == 3);
  CHECK(m3[1] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-9));
  CHECK(m3[0] == doctest::Approx(m3[2]).epsilon(1e-10));
  CHECK(exp_moment_ordered(3, 2) == doctest::Approx(m3[1]).epsilon(1e-12));
  for (int N = 2; N <= 8; ++N)
    for (double v : exp_moments_ordered(N)) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }

  // Sampling cross-check for N = 4.
  std::mt19937_64 rng(21);
  std::vector<Running> acc(4);
  for (int s = 0; s < 100000; ++s) {
    const auto spec = sample_goe_spectrum(4, rng);
    for (int k = 0; k < 4; ++k) acc[k].add(std::exp(-0.5 * spec[k] * spec[k]));
  }
  const auto m4 = exp_moments_ordered(4);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(acc[k].mean() - m4[k]) < 3.5 * acc[k].se());
}

TEST_CASE("GOE sampling") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = sample_goe_matrix(6, rng);
    CHECK(g.isApprox(g.transpose(), 0.0));
    const auto ev = symmetric_eigenvalues(g);
    CHECK(std::abs(ev.sum() - g.trace()) < 1e-10);
    CHECK(std::is_sorted(ev.data(), ev.data() + ev.size()));
  }

  // Entry variances 1 on the diagonal and 1/2 off it.
  Running diag, off;
  for (int s = 0; s < 40000; ++s) {
    const auto g = sample_goe_matrix(3, rng);
    diag.add(g(1, 1) * g(1, 1));
    off.add(g(0, 2) * g(0, 2));
  }
  CHECK(std::abs(diag.mean() - 1.0) < 4 * diag.se());
  CHECK(std::abs(off.mean() - 0.5) < 4 * off.se());

  // N = 1 is a standard normal draw.
  Running one;
  for (int s = 0; s < 40000; ++s) one.add(sample_goe_spectrum(1, rng)[0]);
  CHECK(std::abs(one.mean()) < 4 * one.se());

  // E[lambda_max] for N = 2 against quadrature of the density.
  const double expected = trapezoid([](double x) { return x * closed_form_density(2, 2, x); });
  Running top;
  for (int s = 0; s < 200000; ++s) top.add(sample_goe_spectrum(2, rng)[1]);
  CHECK(std::abs(top.mean() - expected) < 3.5 * top.se());

  CHECK(sample_goe_spectrum(5, 99) == sample_goe_spectrum(5, 99));
}

TEST_CASE("indexed squared determinants") {
  CHECK(gamma2_indexed(0, 0, 0.7) == 1.0);
  CHECK(gamma2_indexed(0, 1, 0.7) == 0.0);
  CHECK(gamma2_indexed(1, 0, 0.0) + gamma2_indexed(1, 1, 0.0) == doctest::Approx(1.0).epsilon(1e-10));
  // For a 1-GOE, E[(G - x)^2] = 1 + x^2.
  const auto one = gamma2_all(1, 0.8);
  CHECK(one[0] + one[1] == doctest::Approx(1.64).epsilon(1e-10));

  // Sum over k against a Monte Carlo estimate of E[det^2(G_2 - x Id)].
  const double x = 0.5;
  const auto all = gamma2_all(2, x);
  double sum = 0;
  for (double v : all) sum += v;
  std::mt19937_64 rng(8);
  Running det2;
  for (int s = 0; s < 200000; ++s) {
    const auto g = sample_goe_matrix(2, rng);
    const double d = (g(0, 0) - x) * (g(1, 1) - x) - g(0, 1) * g(1, 0);
    det2.add(d * d);
  }
  CHECK(std::abs(sum - det2.mean()) < 3.5 * det2.se());
}

TEST_CASE("gamma constants") {
  CHECK(gamma_const(0) == doctest::Approx(1.0));
  CHECK(gamma_const(1) == doctest::Approx(4.0 / 3.0).epsilon(1e-9));
  CHECK(gamma_const(2) == doctest::Approx(29.0 / 12.0).epsilon(1e-9));
  for (int n = 1; n <= 4; ++n) {
    double s = 0;
    for (int k = 0; k <= n; ++k) s += gamma_const_indexed(n, k);
    CHECK(s == doctest::Approx(gamma_const(n)).epsilon(1e-7));
    // Sign flip of G and Lambda maps index k to n - k.
    for (int k = 0; k <= n; ++k)
      CHECK(gamma_const_indexed(n, k) == doctest::Approx(gamma_const_indexed(n, n - k)).epsilon(1e-8));
  }
}
