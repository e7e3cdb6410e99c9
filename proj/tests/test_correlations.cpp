#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

#include "critpoint/correlations.hpp"
#include "critpoint/covariance.hpp"
#include "critpoint/errors.hpp"

using namespace critpoint;

namespace {

const double kPi = std::numbers::pi;

// r(x) = (e^{-x} + e^{-3x}) / 2
CovarianceModel mixture() {
  return CovarianceModel::analytic("mixture", [](int order, long double x) -> long double {
    const long double a = (order % 2 == 0) ? 1.0L : -1.0L;
    return 0.5L * (a * std::exp(-x) + a * std::pow(3.0L, order) * std::exp(-3.0L * x));
  });
}

// Reference values from tests/oracles/conditional_covariance.py (exact Schur complements).
struct Frozen {
  double gradient_det;
  double g1[3][3];
  double g3[3][3];
  double var[3];
  double cross[3];
};

}  // namespace

TEST_CASE("conditional law matches the symbolic oracle: mixture, N = 3") {
  const Frozen f{1986.44378062159501723713808796,
                 {{42.5669833727573071330926268850, 9.46536100142604859110003089511, 9.46536100142604859110003089511},
                  {9.46536100142604859110003089511, 53.6339979933909918758137654559, 13.6339979933909918758137654559},
                  {9.46536100142604859110003089511, 13.6339979933909918758137654559, 53.6339979933909918758137654559}},
                 {{-30.1044075555241859438512059930, -2.63196716373293442365300259078, -2.63196716373293442365300259078},
                  {-2.63196716373293442365300259078, 30.6885250364471744249865708909, 10.5681260054850254950362139890},
                  {-2.63196716373293442365300259078, 10.5681260054850254950362139890, 30.6885250364471744249865708909}},
                 {10.9458380861571628498464602640, 10.9458380861571628498464602640, 20.0},
                 {-8.44300772713744722861129078980, -8.44300772713744722861129078980, 10.0601995154810744649751784509}};
  const auto m = mixture();
  CHECK(gradient_pair_determinant(m, 3, 0.5) == doctest::Approx(f.gradient_det).epsilon(1e-12));
  const auto c = conditional_cov(m, 3, 0.5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CAPTURE(i);
      CAPTURE(j);
      CHECK(c.gamma1(i, j) == doctest::Approx(f.g1[i][j]).epsilon(1e-11));
      CHECK(c.gamma3(i, j) == doctest::Approx(f.g3[i][j]).epsilon(1e-11));
    }
  REQUIRE(c.offdiag.size() == 3);
  CHECK(c.offdiag[0] == std::pair<int, int>{0, 1});
  CHECK(c.offdiag[2] == std::pair<int, int>{1, 2});
  for (int p = 0; p < 3; ++p) {
    CHECK(c.gamma2(p) == doctest::Approx(f.var[p]).epsilon(1e-11));
    CHECK(c.gamma4(p) == doctest::Approx(f.cross[p]).epsilon(1e-11));
  }
}

TEST_CASE("conditional law matches the symbolic oracle: gaussian, N = 2") {
  const auto g = CovarianceModel::gaussian();
  CHECK(gradient_pair_determinant(g, 2, 0.3) == doctest::Approx(1.15538656137519927079337418329).epsilon(1e-12));
  const auto c = conditional_cov(g, 2, 0.3);
  CHECK(c.gamma1(0, 0) == doctest::Approx(1.09005607981179172175183720264).epsilon(1e-11));
  CHECK(c.gamma3(0, 0) == doctest::Approx(-1.03873215764641226861624199424).epsilon(1e-11));
  CHECK(c.gamma1(0, 1) == doctest::Approx(0.131225560216947419060935178243).epsilon(1e-11));
  CHECK(c.gamma3(0, 1) == doctest::Approx(0.0983435280653036596808323094750).epsilon(1e-11));
  CHECK(c.gamma1(1, 1) == doctest::Approx(10.6280941702896976663336649568).epsilon(1e-11));
  CHECK(c.gamma3(1, 1) == doctest::Approx(9.93903565601206987470920450018).epsilon(1e-11));
  CHECK(c.gamma2(0) == doctest::Approx(0.349205827504669759137811405573).epsilon(1e-11));
  CHECK(c.gamma4(0) == doctest::Approx(-0.338880357560321405059909298334).epsilon(1e-11));
}

TEST_CASE("joint covariance structure") {
  const auto m = mixture();
  for (int N = 2; N <= 4; ++N) {
    const auto c = conditional_cov(m, N, 0.3);
    const auto j = c.joint();
    const int d = N + N * (N - 1) / 2;
    REQUIRE(j.rows() == 2 * d);
    CHECK(j.isApprox(j.transpose()));
    // Diagonal entries are uncorrelated with off-diagonal ones, and distinct
    // off-diagonal pairs are uncorrelated.
    for (int a = 0; a < 2 * d; ++a)
      for (int b = 0; b < 2 * d; ++b) {
        const bool a_diag = (a % d) < N, b_diag = (b % d) < N;
        if (a_diag == b_diag && (a_diag || a % d == b % d)) continue;
        CHECK(j(a, b) == 0.0);
      }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
    CHECK(es.eigenvalues().minCoeff() > -1e-10 * es.eigenvalues().maxCoeff());
  }
}

TEST_CASE("gradient pair law") {
  const auto g = CovarianceModel::gaussian();
  const auto s = gradient_pair_covariance(g, 2, 0.4);
  CHECK(s.isApprox(s.transpose()));
  CHECK(s(0, 2) == 0.0);
  CHECK(s(1, 3) == 0.0);
  CHECK(s(0, 0) == doctest::Approx(2.0));
  CHECK(s.determinant() == doctest::Approx(gradient_pair_determinant(g, 2, 0.4)).epsilon(1e-10));
  CHECK(gradient_pair_density(g, 2, 0.4) ==
        doctest::Approx(1.0 / (4 * kPi * kPi * std::sqrt(s.determinant()))).epsilon(1e-10));

  // Small-separation scaling rho^{2N} l2^N l4^N / 3^{N-1}.
  for (int N = 1; N <= 3; ++N) {
    const double rho = 1e-3;
    CHECK(gradient_pair_determinant(g, N, rho) / std::pow(rho, 2 * N) ==
          doctest::Approx(std::pow(24.0, N) / std::pow(3.0, N - 1)).epsilon(1e-3));
  }
  CHECK_THROWS_AS(gradient_pair_density(g, 2, 0.0), PreconditionError);
  CHECK_THROWS_AS(conditional_cov(CovarianceModel::from_moments(2, 12, 120, 1680), 2, 0.3), PreconditionError);
}

TEST_CASE("small separation limits") {
  const auto g = CovarianceModel::gaussian();
  const auto lim = small_rho_limits(g, 2);
  CHECK(lim.at("var_xi11/rho2") == doctest::Approx(12.0));
  CHECK(lim.at("cov_xi11_xijj/rho2") == doctest::Approx(4.0 / 3.0));
  CHECK(lim.at("det_xi11_pair/rho6") == doctest::Approx(160.0));
  CHECK(lim.at("det_gradient/rho2N") == doctest::Approx(192.0));
  CHECK(small_rho_limits(g, 1).at("det_gradient/rho2N") == doctest::Approx(24.0));

  const double rho = 2e-3;
  const auto c = conditional_cov(g, 3, rho);
  const double r2 = rho * rho;
  CHECK(c.gamma1(0, 0) / r2 == doctest::Approx(12.0).epsilon(1e-2));
  CHECK(c.gamma3(0, 0) / r2 == doctest::Approx(lim.at("cross_xi11/rho2")).epsilon(1e-2));
  CHECK(c.gamma1(0, 1) / r2 == doctest::Approx(4.0 / 3.0).epsilon(1e-2));
  CHECK(c.gamma1(1, 1) == doctest::Approx(lim.at("var_xijj")).epsilon(1e-2));
  CHECK(c.gamma1(1, 2) == doctest::Approx(lim.at("cov_xijj_xikk")).epsilon(1e-2));
  CHECK(c.gamma2(0) / r2 == doctest::Approx(lim.at("var_xi1j/rho2")).epsilon(1e-2));
  CHECK(c.gamma2(2) == doctest::Approx(lim.at("var_xijk")).epsilon(1e-2));
  CHECK(c.gamma4(2) == doctest::Approx(lim.at("cross_xijk")).epsilon(1e-2));
  const double det11 = c.gamma1(0, 0) * c.gamma1(0, 0) - c.gamma3(0, 0) * c.gamma3(0, 0);
  CHECK(det11 / std::pow(rho, 6) == doctest::Approx(160.0).epsilon(2e-2));
}

TEST_CASE("bivariate positive-part moments") {
  CHECK(mario_constant(1.0) == doctest::Approx(1.0 / (6 * kPi)).epsilon(1e-10));
  CHECK(mario_moment(1.0, 2.0, 0.0) == doctest::Approx(2.0 / (2 * kPi)).epsilon(1e-9));
  CHECK(mario_cross_moment(1.5, -0.999) == doctest::Approx(0.75).epsilon(1e-2));
  CHECK(mario_cross_moment(1.0, 0.0) == doctest::Approx(1.0 / (2 * kPi)).epsilon(1e-9));
  // E[(X+)^2] = sigma^2 / 2 at full correlation, approached as c -> 1.
  CHECK(mario_moment(1.0, 3.0, 0.9999) == doctest::Approx(1.5).epsilon(1e-2));
  // Strong anti-correlation behaves like the asymptotic law.
  for (double r : {1.0, 2.0, 0.5}) {
    const double c = -0.9999;
    CAPTURE(r);
    CHECK(mario_moment(r, 1.0, c) / mario_asymptotic(r, 1.0, c) == doctest::Approx(1.0).epsilon(2e-2));
  }
  CHECK_THROWS_AS(mario_moment(1.0, -1.0, 0.0), PreconditionError);
  CHECK_THROWS_AS(mario_moment(1.0, 1.0, 1.5), PreconditionError);
}

TEST_CASE("exponent fit") {
  std::vector<CorrEstimate> pts;
  for (double rho : {0.01, 0.02, 0.05, 0.1, 0.2}) {
    CorrEstimate e;
    e.rho = rho;
    e.value = 3.0 * rho * rho;
    e.std_error = 0.01 * e.value;
    pts.push_back(e);
  }
  const auto fit = exponent_fit(pts);
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-6));
  CHECK(fit.points == 5);

  const std::vector<CorrEstimate> few(pts.begin(), pts.begin() + 2);
  CHECK_THROWS_AS(exponent_fit(few), PreconditionError);
  std::vector<CorrEstimate> narrow(pts.begin(), pts.begin() + 3);
  narrow[1].rho = 0.012;
  narrow[2].rho = 0.015;
  CHECK_THROWS_AS(exponent_fit(narrow), PreconditionError);
}

TEST_CASE("asymptotic equivalents") {
  const auto g = CovarianceModel::gaussian();
  // N = 2 is flat in rho.
  CHECK(corr_asymptote_total(g, 2, 0.01) == doctest::Approx(0.23399).epsilon(1e-4));
  CHECK(corr_asymptote_total(g, 2, 0.1) == doctest::Approx(corr_asymptote_total(g, 2, 0.01)));
  CHECK(corr_asymptote_total(g, 3, 0.05) / corr_asymptote_total(g, 3, 0.1) == doctest::Approx(2.0));
  // N = 1 reduces to the one-dimensional law (l2 l6 - l4^2) / (8 pi sqrt(l4 l2^3)) rho.
  for (double rho : {0.001, 0.01, 0.1, 0.3})
    CHECK(corr_asymptote_total(g, 1, rho) ==
          doctest::Approx(96.0 / (8 * kPi * std::sqrt(96.0)) * rho).epsilon(1e-12));
  CHECK(corr_1d_extrema_asymptote(g, 1, 1.0) == doctest::Approx(0.02422).epsilon(5e-4));

  for (int N = 1; N <= 4; ++N) {
    double s = 0;
    for (int k = 0; k < N; ++k) {
      s += corr_asymptote_adjacent(g, N, k, 0.1);
      CHECK(corr_asymptote_adjacent(g, N, k, 0.1) ==
            doctest::Approx(corr_asymptote_adjacent(g, N, N - 1 - k, 0.1)).epsilon(1e-8));
    }
    CHECK(2 * s == doctest::Approx(corr_asymptote_total(g, N, 0.1)).epsilon(1e-8));
  }
  CHECK(corr_1d_extrema_asymptote(g, 1, 0.1) / corr_1d_extrema_asymptote(g, 1, 0.05) == doctest::Approx(16.0));
  CHECK_THROWS_AS(corr_1d_extrema_asymptote(g, 2, 0.1), PreconditionError);
  CHECK_THROWS_AS(corr_asymptote_adjacent(g, 2, 2, 0.1), PreconditionError);
  CHECK_THROWS_AS(corr_asymptote_total(g, 2, 0.0), PreconditionError);
}

TEST_CASE("Monte Carlo correlation functions") {
  const auto g = CovarianceModel::gaussian();
  CorrMcOptions opts;
  opts.samples = 400'000;
  opts.seed = 3;
  opts.batches = 40;

  // N = 1 at small separation against the asymptote.
  const auto one = corr_mc(g, 1, 0.02, opts);
  CHECK(std::abs(one.value - corr_asymptote_total(g, 1, 0.02)) < 4 * one.std_error + 0.01 * one.value);

  const auto t = corr_mc_table(g, 2, 0.05, opts);
  CHECK(std::abs(t.total.value - corr_asymptote_total(g, 2, 0.05)) <
        4 * t.total.std_error + 0.01 * t.total.value);
  double sum = 0;
  for (int i = 0; i <= 2; ++i)
    for (int j = 0; j <= 2; ++j) {
      sum += t.by_pair[i][j].value;
      REQUIRE(t.by_pair[i][j].index_pair.has_value());
      CHECK(*t.by_pair[i][j].index_pair == std::pair<int, int>{i, j});
      const auto& a = t.by_pair[i][j];
      const auto& b = t.by_pair[j][i];
      CHECK(std::abs(a.value - b.value) <= 4 * std::hypot(a.std_error, b.std_error) + 1e-12);
      const auto& flip = t.by_pair[2 - i][2 - j];
      CHECK(std::abs(a.value - flip.value) <= 4 * std::hypot(a.std_error, flip.std_error) + 1e-12);
    }
  CHECK(sum == doctest::Approx(t.total.value).epsilon(1e-12));
  // Same-index pairs are rare at short range.
  CHECK(t.by_pair[0][0].value < 0.01 * t.total.value);
  CHECK(t.by_pair[0][1].value > 0.2 * t.total.value);

  const auto again = corr_mc(g, 2, 0.05, opts, std::pair<int, int>{0, 1});
  CHECK(again.value == t.by_pair[0][1].value);
  auto single = opts;
  single.threads = 1;
  CHECK(corr_mc(g, 2, 0.05, single).value == t.total.value);

  auto small = opts;
  small.samples = 100;
  CHECK_THROWS_AS(corr_mc(g, 2, 0.05, small), PreconditionError);
  CHECK_THROWS_AS(corr_mc(CovarianceModel::from_moments(2, 12, 120, 1680), 2, 0.05, opts), PreconditionError);
}
