#pragma once

#include <vector>

#include "critpoint/covariance.hpp"

namespace critpoint {

// Mean counts need the (N+1)-GOE ordered densities, so N is limited to 1..7.
inline constexpr int kMaxCountN = 7;

// Expected number of critical points of index k (number of negative Hessian eigenvalues)
// in a set of the given volume.
double mean_count_index(const CovarianceModel& model, int N, int k, double volume = 1.0);
// Sum over k.
double mean_count_total(const CovarianceModel& model, int N, double volume = 1.0);
// 2|S|/(sqrt(3) pi) (lambda4 / (3 lambda2)), valid for N = 2 only.
double mean_count_total_2d(const CovarianceModel& model, double volume = 1.0);

// Expected number of index-k critical points with field value above u. Requires
// lambda4 >= 3 lambda2^2; the degenerate branch is used when
// |lambda4 - 3 lambda2^2| <= 1e-12 lambda4.
double mean_count_index_above(const CovarianceModel& model, int N, int k, double u,
                              double volume = 1.0);
bool level_branch_degenerate(const CovarianceModel& model);

// Fraction of critical points with index k = 0..N. Model independent.
std::vector<double> index_fractions(int N);

// I = E[Phi(Y) Phi(sqrt(2) Y)] with Y ~ N(0, 1/3), by quadrature.
double fraction_integral();

// Exact fractions where known in closed form (N = 1..4); empty otherwise.
std::vector<double> reference_fractions(int N);

}  // namespace critpoint
