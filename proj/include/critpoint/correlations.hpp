#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "critpoint/covariance.hpp"

namespace critpoint {

// Law of the Hessians xi(0), xi(t), t = rho e_1, conditional on grad X(0) = grad X(t) = 0.
// Diagonal entries (xi_11..xi_NN) are independent of the off-diagonal ones; each
// off-diagonal pair (xi_ij(0), xi_ij(t)) is independent of the others.
struct ConditionalHessian {
  int N = 0;
  double rho = 0.0;
  Eigen::MatrixXd gamma1;  // Var of the diagonal at either point
  Eigen::MatrixXd gamma3;  // Cov(diagonal at 0, diagonal at t)
  Eigen::VectorXd gamma2;  // Var of off-diagonal entries, order (1,2),..,(1,N),(2,3),..
  Eigen::VectorXd gamma4;  // Cov(xi_ij(0), xi_ij(t)), same order
  std::vector<std::pair<int, int>> offdiag;  // 0-based (i, j) for gamma2/gamma4

  // Covariance of (diag(0), offdiag(0), diag(t), offdiag(t)).
  Eigen::MatrixXd joint() const;
};

// Covariance of (grad X(0), grad X(t)), ordered coordinate-major:
// (X_1(0), X_1(t), X_2(0), X_2(t), ...).
Eigen::MatrixXd gradient_pair_covariance(const CovarianceModel& model, int N, double rho);
double gradient_pair_determinant(const CovarianceModel& model, int N, double rho);
// Density of (grad X(0), grad X(t)) at (0, 0).
double gradient_pair_density(const CovarianceModel& model, int N, double rho);

ConditionalHessian conditional_cov(const CovarianceModel& model, int N, double rho);

// Leading small-rho coefficients of the conditional law, keyed by name. Entries ending in
// "/rho2" or "/rho6" are coefficients of rho^2 or rho^6; the gradient determinant entry is
// the coefficient of rho^{2N}.
std::map<std::string, double> small_rho_limits(const CovarianceModel& model, int N);

struct CorrEstimate {
  double rho = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  long long samples = 0;
  long long discarded = 0;
  std::optional<std::pair<int, int>> index_pair;
};

struct CorrMcOptions {
  long long samples = 1'000'000;
  std::uint64_t seed = 1;
  int batches = 100;
  unsigned threads = 0;
};

// Total and per-index-pair estimates from one set of draws; by_pair[i1][i2].
struct CorrMcTable {
  CorrEstimate total;
  std::vector<std::vector<CorrEstimate>> by_pair;
};

CorrMcTable corr_mc_table(const CovarianceModel& model, int N, double rho,
                          const CorrMcOptions& opts = {});
CorrEstimate corr_mc(const CovarianceModel& model, int N, double rho,
                     const CorrMcOptions& opts = {},
                     std::optional<std::pair<int, int>> index_pair = std::nullopt);

// Small-rho equivalents.
double corr_asymptote_total(const CovarianceModel& model, int N, double rho);
double corr_asymptote_adjacent(const CovarianceModel& model, int N, int k, double rho);
// Minimum-minimum (equivalently maximum-maximum) law, N = 1 only.
double corr_1d_extrema_asymptote(const CovarianceModel& model, int N, double rho);

// X, Y centred Gaussian with common variance sigma2 and correlation c.
double mario_moment(double r, double sigma2, double c);       // E[(X+ Y+)^r]
double mario_cross_moment(double sigma2, double c);           // E[X+ Y-]
double mario_constant(double r);                              // K_r
double mario_asymptotic(double r, double sigma2, double c);   // K_r sigma^{-2(1+r)} det^{(2r+1)/2}

struct SlopeFit {
  double slope = 0.0;
  double slope_error = 0.0;
  double intercept = 0.0;
  int points = 0;
};

// Weighted least-squares slope of log(value) against log(rho), weights from std_error.
SlopeFit exponent_fit(std::span<const CorrEstimate> estimates);

}  // namespace critpoint
