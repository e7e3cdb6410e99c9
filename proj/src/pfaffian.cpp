#include "critpoint/pfaffian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "critpoint/errors.hpp"

namespace critpoint {

namespace {

void check_dim(int dim) {
  if (dim < 0 || dim % 2 != 0)
    throw PreconditionError("skew matrix dimension must be even, got " + std::to_string(dim));
  if (dim > kMaxPfaffianDim)
    throw PreconditionError("skew matrix dimension " + std::to_string(dim) + " exceeds " +
                            std::to_string(kMaxPfaffianDim));
}

}  // namespace

SkewMatrix::SkewMatrix(int dim, const std::vector<double>& entries) : dim_(dim) {
  check_dim(dim);
  if (entries.size() != static_cast<std::size_t>(dim * dim))
    throw PreconditionError("skew matrix entry count does not match dimension");
  double scale = 1.0;
  for (double v : entries) scale = std::max(scale, std::abs(v));
  a_.resize(entries.size());
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      const double aij = entries[static_cast<std::size_t>(i * dim + j)];
      const double aji = entries[static_cast<std::size_t>(j * dim + i)];
      if (std::abs(aij + aji) > 1e-12 * scale)
        throw PreconditionError("matrix is not skew-symmetric at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
      a_[static_cast<std::size_t>(i * dim + j)] = 0.5 * (aij - aji);
    }
  }
}

SkewMatrix SkewMatrix::zeros(int dim) {
  check_dim(dim);
  SkewMatrix m;
  m.dim_ = dim;
  m.a_.assign(static_cast<std::size_t>(dim * dim), 0.0);
  return m;
}

void SkewMatrix::set(int i, int j, double v) {
  if (i == j) {
    if (v != 0.0) throw PreconditionError("skew matrix diagonal must be zero");
    return;
  }
  a_[static_cast<std::size_t>(i * dim_ + j)] = v;
  a_[static_cast<std::size_t>(j * dim_ + i)] = -v;
}

double pfaffian(const SkewMatrix& a) {
  const int n = a.dim();
  if (n == 0) return 1.0;
  const unsigned full = (1u << n) - 1u;
  std::vector<double> memo(full + 1u, std::numeric_limits<double>::quiet_NaN());
  memo[0] = 1.0;

  auto rec = [&](auto&& self, unsigned mask) -> double {
    double& slot = memo[mask];
    if (!std::isnan(slot)) return slot;
    const int first = __builtin_ctz(mask);
    const unsigned rest = mask & ~(1u << first);
    double sum = 0.0;
    double sign = 1.0;
    for (unsigned m = rest; m != 0; m &= m - 1) {
      const int j = __builtin_ctz(m);
      const double aij = a(first, j);
      if (aij != 0.0) sum += sign * aij * self(self, rest & ~(1u << j));
      sign = -sign;
    }
    slot = sum;
    return sum;
  };
  return rec(rec, full);
}

}  // namespace critpoint
