#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "critpoint/errors.hpp"
#include "critpoint/pfaffian.hpp"

using namespace critpoint;

namespace {

Eigen::MatrixXd random_skew(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      a(i, j) = z(rng);
      a(j, i) = -a(i, j);
    }
  return a;
}

SkewMatrix to_skew(const Eigen::MatrixXd& a) {
  std::vector<double> e(static_cast<std::size_t>(a.size()));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) e[static_cast<std::size_t>(i * a.cols() + j)] = a(i, j);
  return SkewMatrix(static_cast<int>(a.rows()), e);
}

}  // namespace

TEST_CASE("small pfaffians by hand") {
  auto two = SkewMatrix::zeros(2);
  two.set(0, 1, 2.5);
  CHECK(pfaffian(two) == doctest::Approx(2.5));

  auto four = SkewMatrix::zeros(4);
  const double a12 = 1, a13 = 2, a14 = 3, a23 = 4, a24 = 5, a34 = 6;
  four.set(0, 1, a12);
  four.set(0, 2, a13);
  four.set(0, 3, a14);
  four.set(1, 2, a23);
  four.set(1, 3, a24);
  four.set(2, 3, a34);
  CHECK(pfaffian(four) == doctest::Approx(a12 * a34 - a13 * a24 + a14 * a23));
  CHECK(pfaffian(SkewMatrix::zeros(0)) == 1.0);
}

TEST_CASE("pfaffian squared equals determinant") {
  std::mt19937_64 rng(11);
  for (int n : {2, 4, 6, 8, 10, 12}) {
    for (int trial = 0; trial < 3; ++trial) {
      const auto a = random_skew(n, rng);
      const double pf = pfaffian(to_skew(a));
      CHECK(pf * pf == doctest::Approx(a.determinant()).epsilon(1e-9));
    }
  }
}

TEST_CASE("pfaffian of a congruence scales by the determinant") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z;
  for (int n : {4, 6}) {
    const auto a = random_skew(n, rng);
    Eigen::MatrixXd b(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) b(i, j) = z(rng);
    const Eigen::MatrixXd c = b.transpose() * a * b;
    const Eigen::MatrixXd cs = 0.5 * (c - c.transpose());
    CHECK(pfaffian(to_skew(cs)) == doctest::Approx(b.determinant() * pfaffian(to_skew(a))).epsilon(1e-9));
  }
}

TEST_CASE("row swap flips the sign") {
  std::mt19937_64 rng(5);
  auto a = random_skew(6, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> p(6);
  p.setIdentity();
  p.applyTranspositionOnTheRight(1, 4);
  const Eigen::MatrixXd swapped = p.transpose() * a * p;
  CHECK(pfaffian(to_skew(swapped)) == doctest::Approx(-pfaffian(to_skew(a))));
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(SkewMatrix::zeros(3), PreconditionError);
  CHECK_THROWS_AS(SkewMatrix::zeros(14), PreconditionError);
  CHECK_THROWS_AS(SkewMatrix(2, std::vector<double>{0, 1, 1, 0}), PreconditionError);
  CHECK_THROWS_AS(SkewMatrix(2, std::vector<double>{0, 1, -1}), PreconditionError);
  // Round-off asymmetry within tolerance is accepted.
  CHECK_NOTHROW(SkewMatrix(2, std::vector<double>{0, 1.0, -1.0 - 1e-15, 0}));
}
