#include "critpoint/kac_rice.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "critpoint/errors.hpp"
#include "critpoint/goe.hpp"
#include "critpoint/special.hpp"

namespace critpoint {

namespace {

constexpr double kPi = std::numbers::pi;

void check_count_args(int N, int k, double volume) {
  if (N < 1 || N > kMaxCountN)
    throw PreconditionError("mean counts support 1 <= N <= " + std::to_string(kMaxCountN) +
                            " (they need the (N+1)-GOE ordered densities)");
  if (k < 0 || k > N) throw PreconditionError("index k must be in 0..N");
  if (!(volume >= 0.0) || !std::isfinite(volume))
    throw PreconditionError("volume must be finite and nonnegative");
}

// E[exp(-L_k^2/2)] for all k of the M-GOE, computed once per M.
const std::vector<double>& cached_exp_moments(int M) {
  static std::mutex mu;
  static std::map<int, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(M);
  if (it == cache.end()) it = cache.emplace(M, exp_moments_ordered(M)).first;
  return it->second;
}

double count_prefactor(int N, double volume) {
  return volume / std::pow(kPi, 0.5 * (N + 1)) * normalization_kn(N) /
         normalization_kn(N + 1) / (N + 1);
}

}  // namespace

double mean_count_index(const CovarianceModel& model, int N, int k, double volume) {
  check_count_args(N, k, volume);
  const double l2 = model.spectral_moment(1);
  const double l4 = model.spectral_moment(2);
  return count_prefactor(N, volume) * std::pow(l4 / (3.0 * l2), 0.5 * N) *
         cached_exp_moments(N + 1)[static_cast<std::size_t>(k)];
}

double mean_count_total(const CovarianceModel& model, int N, double volume) {
  double s = 0.0;
  for (int k = 0; k <= N; ++k) s += mean_count_index(model, N, k, volume);
  return s;
}

double mean_count_total_2d(const CovarianceModel& model, double volume) {
  if (!(volume >= 0.0)) throw PreconditionError("volume must be nonnegative");
  const double l2 = model.spectral_moment(1);
  const double l4 = model.spectral_moment(2);
  return 2.0 * volume / (std::sqrt(3.0) * kPi) * (l4 / (3.0 * l2));
}

bool level_branch_degenerate(const CovarianceModel& model) {
  const double l2 = model.spectral_moment(1);
  const double l4 = model.spectral_moment(2);
  const double gap = l4 - 3.0 * l2 * l2;
  if (gap < -1e-12 * l4)
    throw PreconditionError("level counts need lambda4 >= 3 lambda2^2 (got lambda4 = " +
                            std::to_string(l4) + ", 3 lambda2^2 = " +
                            std::to_string(3.0 * l2 * l2) + ")");
  return std::abs(gap) <= 1e-12 * l4;
}

double mean_count_index_above(const CovarianceModel& model, int N, int k, double u,
                              double volume) {
  check_count_args(N, k, volume);
  if (std::isnan(u)) throw PreconditionError("level u is NaN");
  const double l2 = model.spectral_moment(1);
  const double l4 = model.spectral_moment(2);
  const int M = N + 1;
  const int rank = k + 1;
  const QuadOptions opts{1e-12, 1e-12, 4000};
  auto density = [M, rank](double l) {
    return ordered_eigen_density(M, rank, l) * std::exp(-0.5 * l * l);
  };

  if (level_branch_degenerate(model)) {
    const double lo = u / std::numbers::sqrt2;
    const double integral = integrate_1d(density, Interval{lo, kInf}, opts).value;
    return count_prefactor(N, volume) * std::pow(l2, 0.5 * N) * integral;
  }

  const double scale = std::sqrt(l4 / (l4 - 3.0 * l2 * l2));
  const double slope = std::sqrt(6.0) * l2 / std::sqrt(l4);
  // Phi_bar(scale (u - slope l)) steps from 0 to 1 around l = u/slope with width
  // 1/(scale slope); breakpoints keep the quadrature resolving it.
  const double centre = u / slope;
  const double width = 1.0 / (scale * slope);
  std::vector<double> breaks;
  for (double m : {-40.0, -8.0, -2.0, 0.0, 2.0, 8.0, 40.0}) breaks.push_back(centre + m * width);
  auto integrand = [&](double l) { return density(l) * gaussian_sf(scale * (u - slope * l)); };
  const double integral = integrate_1d(integrand, Interval{}, breaks, opts).value;
  return count_prefactor(N, volume) * std::pow(l4 / (3.0 * l2), 0.5 * N) * integral;
}

std::vector<double> index_fractions(int N) {
  check_count_args(N, 0, 1.0);
  const auto& e = cached_exp_moments(N + 1);
  double total = 0.0;
  for (double v : e) total += v;
  std::vector<double> out;
  for (double v : e) out.push_back(v / total);
  return out;
}

double fraction_integral() {
  const double sd = std::sqrt(1.0 / 3.0);
  return integrate_1d(
             [sd](double y) {
               return gaussian_cdf(y) * gaussian_cdf(std::numbers::sqrt2 * y) *
                      gaussian_pdf(y / sd) / sd;
             },
             Interval{}, QuadOptions{1e-14, 1e-13, 1000})
      .value;
}

std::vector<double> reference_fractions(int N) {
  switch (N) {
    case 1: return {0.5, 0.5};
    case 2: return {0.25, 0.5, 0.25};
    case 3: {
      const double r6 = std::sqrt(6.0);
      const double lo = (29.0 - 6.0 * r6) / 116.0;
      const double hi = (29.0 + 6.0 * r6) / 116.0;
      return {lo, hi, hi, lo};
    }
    case 4: {
      const double I = fraction_integral();
      const double f0 = (100.0 * kPi * I - 57.0) / (200.0 * kPi);
      const double f2 = (50.0 * kPi * (1.0 - 2.0 * I) + 57.0) / (100.0 * kPi);
      return {f0, 0.25, f2, 0.25, f0};
    }
    default: return {};
  }
}

}  // namespace critpoint
