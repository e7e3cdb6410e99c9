#include "critpoint/goe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>

#include "critpoint/errors.hpp"

namespace critpoint {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;
const double kSqrtPi = std::sqrt(kPi);
const double kSqrt2Pi = std::sqrt(2.0 * kPi);

constexpr int kMaxSkewN = 7;

// Entry-integral options: entries can reach 1e3 in magnitude, so a relative target is
// needed alongside the absolute one.
constexpr QuadOptions kEntryQuad{1e-12, 1e-11, 4000};

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Integrals shared by every subset I for a fixed (alpha, n, l):
//   single[side][i]   = int_D x^{i-1}(x-l)^alpha e^{-x^2/2} dx
//   same[side][i][j]  = int_D int_D sign(y-x) f_i(x) f_j(y) dx dy
// side 0 is D = (-inf, l), side 1 is D = (l, inf).
class EntryTable {
 public:
  EntryTable(int alpha, int n, double ell) : alpha_(alpha), n_(n), ell_(ell) {
    if (alpha != 1 && alpha != 2) throw PreconditionError("alpha must be 1 or 2");
    if (n < 0 || n > kMaxSkewN)
      throw PreconditionError("skew matrix order n = " + std::to_string(n) + " outside 0.." +
                              std::to_string(kMaxSkewN));
    for (int i = 1; i <= n; ++i) {
      auto& c = coeffs_[static_cast<std::size_t>(i)];
      c.fill(0.0);
      // x^{i-1} (x - l)^alpha
      double binom = 1.0;
      for (int t = 0; t <= alpha; ++t) {
        c[static_cast<std::size_t>(i - 1 + t)] += binom * std::pow(-ell, alpha - t);
        binom = binom * (alpha - t) / (t + 1);
      }
    }
    degree_ = n - 1 + alpha;
  }

  Interval domain(int side) const {
    return side == 0 ? Interval{-kInf, ell_} : Interval{ell_, kInf};
  }

  double single(int side, int i) {
    auto& slot = single_[side][static_cast<std::size_t>(i)];
    if (!slot) {
      double m[kMaxPartialMomentOrder + 1];
      gaussian_partial_moments(degree_, domain(side), m);
      slot = poly_moment(i, m);
    }
    return *slot;
  }

  double same(int side, int i, int j) {
    if (i == j) return 0.0;
    if (i > j) return -same(side, j, i);
    auto& slot = same_[side][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    if (!slot) slot = compute_same(side, i, j);
    return *slot;
  }

 private:
  double poly_moment(int i, const double* m) const {
    const auto& c = coeffs_[static_cast<std::size_t>(i)];
    double s = 0.0;
    for (int p = 0; p <= degree_; ++p) s += c[static_cast<std::size_t>(p)] * m[p];
    return s;
  }

  double weight(int j, double y) const {
    return std::pow(y, j - 1) * std::pow(y - ell_, alpha_) * std::exp(-0.5 * y * y);
  }

  double compute_same(int side, int i, int j) {
    const Interval d = domain(side);
    const double total_i = single(side, i);
    auto integrand = [&](double y) {
      double m[kMaxPartialMomentOrder + 1];
      gaussian_partial_moments(degree_, Interval{d.lo, y}, m);
      // int_{lo}^{y} f_i - int_{y}^{hi} f_i
      return weight(j, y) * (2.0 * poly_moment(i, m) - total_i);
    };
    return integrate_1d(integrand, d, kEntryQuad).value;
  }

  int alpha_;
  int n_;
  double ell_;
  int degree_ = 0;
  std::array<std::array<double, kMaxPartialMomentOrder + 1>, kMaxSkewN + 1> coeffs_{};
  std::optional<double> single_[2][kMaxSkewN + 1];
  std::optional<double> same_[2][kMaxSkewN + 1][kMaxSkewN + 1];
};

SkewMatrix assemble(EntryTable& table, int n, std::span<const int> I) {
  std::array<int, kMaxSkewN + 1> side{};
  side.fill(1);
  for (int i : I) {
    if (i < 1 || i > n) throw PreconditionError("subset element outside 1..n");
    side[static_cast<std::size_t>(i)] = 0;
  }
  const int dim = n + (n % 2);
  SkewMatrix a = SkewMatrix::zeros(dim);
  for (int i = 1; i <= n; ++i) {
    const int si = side[static_cast<std::size_t>(i)];
    for (int j = i + 1; j <= n; ++j) {
      const int sj = side[static_cast<std::size_t>(j)];
      double v;
      if (si == sj)
        v = table.same(si, i, j);
      else if (si == 0)  // x < l < y: sign(y - x) = +1
        v = table.single(0, i) * table.single(1, j);
      else
        v = -table.single(1, i) * table.single(0, j);
      a.set(i - 1, j - 1, v);
    }
    if (n % 2 == 1) a.set(i - 1, n, table.single(si, i));
  }
  return a;
}

double clip_density(double v, const char* what) {
  if (v < -1e-9)
    throw NumericalError(std::string(what) + " evaluated to a negative value " +
                             std::to_string(v),
                         v, 0.0);
  return std::max(v, 0.0);
}

void check_ordered_n(int N) {
  if (N < 2 || N > kMaxOrderedN)
    throw PreconditionError("ordered eigenvalue density supports 2 <= N <= " +
                            std::to_string(kMaxOrderedN) + ", got N = " + std::to_string(N));
}

// Closed forms for the largest eigenvalue; the others follow by reflection or the
// composite relation for q_5^3.
double q22(double l) {
  return std::exp(-l * l / 2) / (2 * kSqrtPi) *
         (std::exp(-l * l / 2) + kSqrt2Pi * l * gaussian_cdf(l));
}

double q32(double l) { return std::exp(-l * l) / kSqrtPi; }

double q33(double l) {
  return std::exp(-l * l / 2) / (kPi * kSqrt2) *
         (kSqrtPi * (2 * l * l - 1) * gaussian_cdf(l * kSqrt2) +
          kSqrt2Pi * std::exp(-l * l / 2) * gaussian_cdf(l) + l * std::exp(-l * l));
}

double q43(double l) {
  return std::exp(-l * l / 2) / (2 * kPi) *
         (1.5 * l * std::exp(-1.5 * l * l) +
          kSqrt2Pi * (1 - l * l / 2) * gaussian_sf(l) * std::exp(-l * l) -
          kPi * (2 * l * l * l - 3 * l) / kSqrt2 * gaussian_cdf(l * kSqrt2) * gaussian_sf(l) +
          1.5 * kSqrtPi * (1 + 2 * l * l) * gaussian_cdf(l * kSqrt2) * std::exp(-l * l / 2));
}

double q44(double l) {
  return std::exp(-l * l / 2) / (2 * kPi) *
         (1.5 * l * std::exp(-1.5 * l * l) -
          kSqrt2Pi * (1 - l * l / 2) * gaussian_cdf(l) * std::exp(-l * l) +
          kPi * (2 * l * l * l - 3 * l) / kSqrt2 * gaussian_cdf(l * kSqrt2) * gaussian_cdf(l) +
          1.5 * kSqrtPi * (1 + 2 * l * l) * gaussian_cdf(l * kSqrt2) * std::exp(-l * l / 2));
}

double q5_prefactor(double l) {
  return kSqrt2 * std::exp(-l * l / 2) / (3 * std::pow(kPi, 1.5));
}

double q54(double l) {
  const double l2 = l * l;
  return q5_prefactor(l) *
         (kSqrt2Pi * std::exp(-1.5 * l2) * (l2 * l / 2 + 5 * l / 4) +
          kSqrt2 * kPi * gaussian_cdf(l * kSqrt2) * std::exp(-l2 / 2) * (l2 * l2 + 3 * l2 + 0.75));
}

double q55(double l) {
  const double l2 = l * l;
  const double pr = gaussian_cdf(l * kSqrt2);
  return q5_prefactor(l) *
         ((2 * l2 * l2 - 6 * l2 + 1.5) * kPi * pr * pr +
          (l2 * l2 + 3 * l2 + 0.75) * kSqrt2 * kPi * pr * gaussian_cdf(l) * std::exp(-l2 / 2) +
          kSqrt2Pi * (l2 * l / 2 + 5 * l / 4) * gaussian_cdf(l) * std::exp(-1.5 * l2) +
          (3 * l2 * l - 6.5 * l) * kSqrtPi * pr * std::exp(-l2) +
          (l2 - 2) * std::exp(-2 * l2));
}

double q53(double l) {
  const double l2 = l * l;
  return q54(l) - 2 * q55(l) +
         q5_prefactor(l) *
             (kPi * (4 * l2 * l2 - 12 * l2 + 3) * gaussian_cdf(l * kSqrt2) +
              kSqrtPi * (3 * l2 * l - 6.5 * l) * std::exp(-l2) +
              kSqrt2 * kPi * (l2 * l2 + 3 * l2 + 0.75) * std::exp(-l2 / 2) * gaussian_cdf(l));
}

// Integrates each component of a vector-valued function of x against a weight, sharing
// evaluations across components through a cache keyed on x.
std::vector<double> integrate_components(int count,
                                         const std::function<std::vector<double>(double)>& f,
                                         const std::function<double(double)>& weight,
                                         const QuadOptions& opts) {
  std::map<double, std::vector<double>> cache;
  auto eval = [&](double x) -> const std::vector<double>& {
    auto it = cache.find(x);
    if (it == cache.end()) it = cache.emplace(x, f(x)).first;
    return it->second;
  };
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    out[static_cast<std::size_t>(c)] =
        integrate_1d([&](double x) { return eval(x)[static_cast<std::size_t>(c)] * weight(x); },
                     Interval{}, opts)
            .value;
  }
  return out;
}

}  // namespace

double normalization_kn(int N) {
  if (N < 0 || N > 9) throw PreconditionError("normalization k_N supports 0 <= N <= 9");
  double logk = -0.5 * N * std::log(2.0 * kPi) + N * std::lgamma(1.5);
  for (int i = 1; i <= N; ++i) logk -= std::lgamma(1.0 + 0.5 * i);
  return std::exp(logk);
}

double joint_eigen_density(std::span<const double> mu) {
  const int N = static_cast<int>(mu.size());
  double sq = 0.0;
  double vdm = 1.0;
  for (int i = 0; i < N; ++i) {
    sq += mu[static_cast<std::size_t>(i)] * mu[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < N; ++j)
      vdm *= std::abs(mu[static_cast<std::size_t>(j)] - mu[static_cast<std::size_t>(i)]);
  }
  return normalization_kn(N) * std::exp(-0.5 * sq) * vdm;
}

std::vector<std::vector<int>> subsets(int n, int k) {
  if (n < 0 || k < 0 || k > n) throw PreconditionError("subset size outside 0..n");
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) cur[static_cast<std::size_t>(i)] = i + 1;
  while (true) {
    out.push_back(cur);
    int p = k - 1;
    while (p >= 0 && cur[static_cast<std::size_t>(p)] == n - k + p + 1) --p;
    if (p < 0) break;
    ++cur[static_cast<std::size_t>(p)];
    for (int q = p + 1; q < k; ++q)
      cur[static_cast<std::size_t>(q)] = cur[static_cast<std::size_t>(q - 1)] + 1;
  }
  return out;
}

SkewMatrix build_skew_A(int alpha, int n, std::span<const int> I, double ell) {
  EntryTable table(alpha, n, ell);
  return assemble(table, n, I);
}

std::vector<double> ordered_eigen_densities(int N, double ell) {
  check_ordered_n(N);
  const int n = N - 1;
  EntryTable table(1, n, ell);
  const double pre = normalization_kn(N) * factorial(N) * std::exp(-0.5 * ell * ell);
  std::vector<double> out;
  for (int k = 1; k <= N; ++k) {
    double sum = 0.0;
    for (const auto& I : subsets(n, k - 1)) sum += pfaffian(assemble(table, n, I));
    const double sign = (k % 2 == 1) ? 1.0 : -1.0;
    out.push_back(clip_density(pre * sign * sum, "ordered eigenvalue density"));
  }
  return out;
}

double ordered_eigen_density(int N, int k, double ell) {
  check_ordered_n(N);
  if (k < 1 || k > N) throw PreconditionError("eigenvalue rank k must be in 1..N");
  const int n = N - 1;
  EntryTable table(1, n, ell);
  double sum = 0.0;
  for (const auto& I : subsets(n, k - 1)) sum += pfaffian(assemble(table, n, I));
  const double sign = (k % 2 == 1) ? 1.0 : -1.0;
  return clip_density(
      normalization_kn(N) * factorial(N) * std::exp(-0.5 * ell * ell) * sign * sum,
      "ordered eigenvalue density");
}

double closed_form_density(int N, int k, double l) {
  if (N < 2 || N > 5 || k < 1 || k > N)
    throw PreconditionError("closed forms exist for 2 <= N <= 5, 1 <= k <= N");
  switch (N * 10 + k) {
    case 21: return q22(-l);
    case 22: return q22(l);
    case 31: return q33(-l);
    case 32: return q32(l);
    case 33: return q33(l);
    case 41: return q44(-l);
    case 42: return q43(-l);
    case 43: return q43(l);
    case 44: return q44(l);
    case 51: return q55(-l);
    case 52: return q54(-l);
    case 53: return q53(l);
    case 54: return q54(l);
    default: return q55(l);
  }
}

std::vector<double> gamma2_all(int n, double x) {
  if (n < 0 || n > kMaxSkewN) throw PreconditionError("gamma constants support 0 <= n <= 7");
  if (n == 0) return {1.0};
  EntryTable table(2, n, x);
  const double pre = normalization_kn(n) * factorial(n);
  std::vector<double> out;
  for (int k = 0; k <= n; ++k) {
    double sum = 0.0;
    for (const auto& I : subsets(n, k)) sum += pfaffian(assemble(table, n, I));
    out.push_back(clip_density(pre * sum, "indexed determinant moment"));
  }
  return out;
}

double gamma2_indexed(int n, int k, double x) {
  if (n < 0 || n > kMaxSkewN) throw PreconditionError("determinant moments support 0 <= n <= 7");
  if (k < 0) throw PreconditionError("index k must be nonnegative");
  // An n x n matrix never has more than n negative eigenvalues.
  if (k > n) return 0.0;
  return gamma2_all(n, x)[static_cast<std::size_t>(k)];
}

namespace {

std::vector<double> gamma_consts(int n) {
  if (n == 0) return {1.0};
  const double sd = std::sqrt(1.0 / 3.0);
  auto weight = [sd](double x) { return gaussian_pdf(x / sd) / sd; };
  return integrate_components(n + 1, [n](double x) { return gamma2_all(n, x); }, weight,
                              QuadOptions{1e-12, 1e-12, 2000});
}

}  // namespace

double gamma_const(int n) {
  if (n < 0 || n > kMaxSkewN) throw PreconditionError("gamma constants support 0 <= n <= 7");
  if (n == 0) return 1.0;
  const double sd = std::sqrt(1.0 / 3.0);
  auto integrand = [n, sd](double x) {
    const auto g = gamma2_all(n, x);
    double s = 0.0;
    for (double v : g) s += v;
    return s * gaussian_pdf(x / sd) / sd;
  };
  return integrate_1d(integrand, Interval{}, QuadOptions{1e-12, 1e-12, 2000}).value;
}

double gamma_const_indexed(int n, int k) {
  if (n < 0 || n > kMaxSkewN) throw PreconditionError("gamma constants support 0 <= n <= 7");
  if (k < 0 || k > n) throw PreconditionError("index k must be in 0..n");
  return gamma_consts(n)[static_cast<std::size_t>(k)];
}

std::vector<double> exp_moments_ordered(int N) {
  check_ordered_n(N);
  return integrate_components(
      N, [N](double l) { return ordered_eigen_densities(N, l); },
      [](double l) { return std::exp(-0.5 * l * l); }, QuadOptions{1e-12, 1e-12, 2000});
}

double exp_moment_ordered(int N, int k) {
  check_ordered_n(N);
  if (k < 1 || k > N) throw PreconditionError("eigenvalue rank k must be in 1..N");
  return integrate_1d(
             [N, k](double l) { return ordered_eigen_density(N, k, l) * std::exp(-0.5 * l * l); },
             Interval{}, QuadOptions{1e-12, 1e-12, 2000})
      .value;
}

Eigen::MatrixXd sample_goe_matrix(int N, std::mt19937_64& rng) {
  if (N < 1) throw PreconditionError("GOE size must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(N, N);
  const double off = 1.0 / kSqrt2;
  for (int i = 0; i < N; ++i) {
    g(i, i) = normal(rng);
    for (int j = i + 1; j < N; ++j) {
      g(i, j) = off * normal(rng);
      g(j, i) = g(i, j);
    }
  }
  return g;
}

Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  return es.eigenvalues();
}

std::vector<double> sample_goe_spectrum(int N, std::mt19937_64& rng) {
  if (N > 64) throw PreconditionError("GOE sampling supports N <= 64");
  const Eigen::VectorXd ev = symmetric_eigenvalues(sample_goe_matrix(N, rng));
  return {ev.data(), ev.data() + ev.size()};
}

std::vector<double> sample_goe_spectrum(int N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_goe_spectrum(N, rng);
}

}  // namespace critpoint
