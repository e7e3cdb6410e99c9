#pragma once

#include <functional>
#include <limits>
#include <span>

namespace critpoint {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Standard normal density, distribution and survival function.
double gaussian_pdf(double x);
double gaussian_cdf(double x);
double gaussian_sf(double x);

struct Interval {
  double lo = -kInf;
  double hi = kInf;
};

inline constexpr int kMaxPartialMomentOrder = 24;

// \int_lo^hi x^k e^{-x^2/2} dx. Endpoints may be infinite.
double gaussian_partial_moment(int k, Interval iv);
// Fills out[0..kmax] with the moments of order 0..kmax over iv.
void gaussian_partial_moments(int kmax, Interval iv, double* out);

struct QuadOptions {
  double abs_tol = 1e-10;
  double rel_tol = 0.0;
  int max_intervals = 2000;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

// Infinite endpoints are truncated to |x| <= 12; integrands are expected to carry a
// Gaussian weight. Throws NumericalError (with best estimate and bound) on failure.
inline constexpr double kTruncation = 12.0;

QuadResult integrate_1d(const std::function<double(double)>& f, Interval iv,
                        const QuadOptions& opts = {});
// Same, with interior points where the integrand is known to be non-smooth.
QuadResult integrate_1d(const std::function<double(double)>& f, Interval iv,
                        std::span<const double> breakpoints, const QuadOptions& opts = {});

}  // namespace critpoint
