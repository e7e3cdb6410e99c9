#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "critpoint/pfaffian.hpp"
#include "critpoint/special.hpp"

namespace critpoint {

// GOE: symmetric, independent centred Gaussian entries, E[G_ii^2] = 1, E[G_ij^2] = 1/2.

inline constexpr int kMaxOrderedN = 8;

// k_N = (2 pi)^{-N/2} Gamma(3/2)^N / prod_{i=1}^N Gamma(1 + i/2), with k_0 = 1.
double normalization_kn(int N);

// k_N exp(-sum mu_i^2/2) prod_{i<j} |mu_j - mu_i|.
double joint_eigen_density(std::span<const double> mu);

// All k-element subsets of {1..n} in lexicographic order.
std::vector<std::vector<int>> subsets(int n, int k);

// Skew matrix with entries
//   a_ij = int_{D_i} int_{D_j} sign(y-x) x^{i-1} y^{j-1} (x-l)^alpha (y-l)^alpha e^{-(x^2+y^2)/2}
// where D_i = (-inf, l) if i is in I, (l, inf) otherwise; odd n gets a border column of
// single integrals. I holds 1-based indices.
SkewMatrix build_skew_A(int alpha, int n, std::span<const int> I, double ell);

// Density of the k-th smallest eigenvalue (k = 1..N) of an N-GOE matrix, 2 <= N <= 8.
double ordered_eigen_density(int N, int k, double ell);
// All k = 1..N at once (shares the entry integrals).
std::vector<double> ordered_eigen_densities(int N, double ell);

// Explicit formulas for N = 2..5.
double closed_form_density(int N, int k, double ell);

// E[det^2(G_n - x Id) 1{index(G_n - x Id) = k}], index = number of negative eigenvalues;
// zero for k > n.
double gamma2_indexed(int n, int k, double x);
// All k = 0..n at once.
std::vector<double> gamma2_all(int n, double x);

// gamma_n = E[det^2(G_n - Lambda Id)] with Lambda ~ N(0, 1/3) independent of G_n.
double gamma_const(int n);
double gamma_const_indexed(int n, int k);

// E[exp(-L_k^2/2)] for the k-th ordered eigenvalue of an N-GOE matrix.
double exp_moment_ordered(int N, int k);
std::vector<double> exp_moments_ordered(int N);

Eigen::MatrixXd sample_goe_matrix(int N, std::mt19937_64& rng);
// Ascending eigenvalues.
std::vector<double> sample_goe_spectrum(int N, std::mt19937_64& rng);
std::vector<double> sample_goe_spectrum(int N, std::uint64_t seed);

// Ascending eigenvalues of a symmetric matrix.
Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& m);

}  // namespace critpoint
