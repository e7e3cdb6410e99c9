#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace critpoint {

// lambda_{2n} for n = 1..4; lambda_0 = 1.
struct SpectralMoments {
  double l2 = 0, l4 = 0, l6 = 0, l8 = 0;
  double operator[](int n) const;
};

// Isotropic covariance E[X(s)X(t)] = r(|s-t|^2).
//
// Analytic models expose r and its first four derivatives at any argument (extended
// precision, needed for the small-separation cancellations in the two-point law).
// Moments-only models carry lambda_2..lambda_8 and serve counts and asymptotics only.
class CovarianceModel {
 public:
  using Radial = std::function<long double(int order, long double x)>;

  static CovarianceModel gaussian(double a = 1.0);
  static CovarianceModel analytic(std::string name, Radial r);
  static CovarianceModel from_moments(double l2, double l4, double l6, double l8);

  bool is_analytic() const { return static_cast<bool>(radial_); }
  const std::string& name() const { return name_; }
  // r^{(order)}(x), order 0..4. Throws PreconditionError for moments-only models.
  long double radial(int order, long double x) const;
  // lambda_{2n}, n = 0..4.
  double spectral_moment(int n) const { return moments_[n]; }
  const SpectralMoments& moments() const { return moments_; }
  std::string describe() const;

 private:
  std::string name_;
  Radial radial_;
  SpectralMoments moments_;
};

// "gaussian:a=<float>" or "moments:l2=<f>,l4=<f>,l6=<f>,l8=<f>".
CovarianceModel parse_model(std::string_view spec);

// E[d^i X(t) d^j X(t)] for multi-indices of equal length; zero when any i_l + j_l is odd.
double derivative_covariance(const CovarianceModel& model, std::span<const int> i,
                             std::span<const int> j);

struct ZetaBlocks {
  Eigen::MatrixXd zeta1;  // (X_2..X_N without X_l): N-2 square
  Eigen::MatrixXd zeta2;  // X_ij, i < j: N(N-1)/2 square
  Eigen::MatrixXd zeta3;  // (X, X_1111, X_11, X_22, .., X_NN): N+2 square
  Eigen::MatrixXd zeta4;  // (X_1, X_111, X_122, .., X_1NN): N+1 square
  Eigen::MatrixXd zeta5;  // (X_l, X_11l): 2x2
};

ZetaBlocks zeta_block_covariances(const CovarianceModel& model, int N);

struct MomentCheck {
  int n = 0;
  double lhs = 0;  // lambda_{2n} lambda_{2n-4}
  double rhs = 0;  // K(n,N) lambda_{2n-2}^2
  double margin = 0;
  bool pass = false;
};

double moment_inequality_constant(int n, int N);
// Strict check for n = 2, 3, 4 (equality, e.g. the sine-cosine process, fails).
std::vector<MomentCheck> moment_inequality_check(const CovarianceModel& model, int N);

}  // namespace critpoint
