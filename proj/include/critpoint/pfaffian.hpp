#pragma once

#include <vector>

namespace critpoint {

inline constexpr int kMaxPfaffianDim = 12;

// Even-dimensional real skew-symmetric matrix, stored row-major.
class SkewMatrix {
 public:
  SkewMatrix() = default;
  // Checks |A + A^T| <= 1e-12 (relative to max(1, max|a_ij|)) and stores (A - A^T)/2.
  SkewMatrix(int dim, const std::vector<double>& entries);
  // Zero matrix of the given dimension, to be filled with set().
  static SkewMatrix zeros(int dim);

  int dim() const { return dim_; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i * dim_ + j)]; }
  // Sets a_ij = v and a_ji = -v.
  void set(int i, int j, double v);

 private:
  int dim_ = 0;
  std::vector<double> a_;
};

// Expansion along the first row, memoized on the remaining index subset.
double pfaffian(const SkewMatrix& a);

}  // namespace critpoint
