#include "critpoint/correlations.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>

#include "critpoint/errors.hpp"
#include "critpoint/goe.hpp"
#include "critpoint/parallel.hpp"
#include "critpoint/special.hpp"

namespace critpoint {

namespace {

using LD = long double;
using MatL = Eigen::Matrix<LD, Eigen::Dynamic, Eigen::Dynamic>;
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8>;

constexpr double kPi = std::numbers::pi;
constexpr int kMaxCorrN = 8;

void check_corr_args(int N, double rho) {
  if (N < 1 || N > kMaxCorrN)
    throw PreconditionError("two-point computations support 1 <= N <= " +
                            std::to_string(kMaxCorrN));
  if (!(rho > 0.0) || !std::isfinite(rho))
    throw PreconditionError("separation rho must be positive and finite");
}

struct RadialAt {
  LD p2;   // rho^2
  LD r10;  // r'(0)
  LD r20;  // r''(0)
  LD r1, r2, r3, r4;  // derivatives at rho^2
};

RadialAt radial_at(const CovarianceModel& model, double rho) {
  const LD p2 = static_cast<LD>(rho) * static_cast<LD>(rho);
  return {p2,
          model.radial(1, 0.0L),
          model.radial(2, 0.0L),
          model.radial(1, p2),
          model.radial(2, p2),
          model.radial(3, p2),
          model.radial(4, p2)};
}

// Conditional law in extended precision. The diagonal block [[g1, g3], [g3, g1]] is
// diagonalized by the sum/difference of the two points, so it is kept as g1 + g3 and
// g1 - g3; likewise each off-diagonal pair keeps D + D~ and D - D~.
struct ExactLaw {
  int N = 0;
  MatL g1, g3, plus, minus;
  std::vector<LD> g2, g4, pair_plus, pair_minus;
  std::vector<std::pair<int, int>> offdiag;
};

ExactLaw exact_law(const CovarianceModel& model, int N, double rho) {
  check_corr_args(N, rho);
  const RadialAt q = radial_at(model, rho);
  const LD s = q.r1 + 2 * q.r2 * q.p2;
  const LD dm = (q.r10 - s) * (q.r10 + s);  // r'(0)^2 - (r' + 2 r'' rho^2)^2
  const LD dd = (q.r10 - q.r1) * (q.r10 + q.r1);  // r'(0)^2 - r'^2
  if (!(dm > 1e-14L) || !(dd > 0.0L))
    throw PreconditionError("rho = " + std::to_string(rho) +
                            " is outside the range where the gradient pair is nondegenerate");

  ExactLaw law;
  law.N = N;
  Eigen::Matrix<LD, Eigen::Dynamic, 1> v(N);
  v(0) = 12 * q.r2 + 8 * q.p2 * q.r3;
  for (int j = 1; j < N; ++j) v(j) = 4 * q.r2;
  const LD a = 4 * q.r2 + 8 * q.p2 * q.r3;
  const LD d = 12 * q.r2 + 48 * q.p2 * q.r3 + 16 * q.p2 * q.p2 * q.r4;

  MatL base(N, N), cross(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      base(i, j) = (i == j ? 12 : 4) * q.r20;
      if (i == 0 && j == 0)
        cross(i, j) = d;
      else if (i == 0 || j == 0)
        cross(i, j) = a;
      else
        cross(i, j) = (i == j ? 12 : 4) * q.r2;
    }
  const MatL vvt = v * v.transpose();
  law.g1 = base + (q.p2 * q.r10 / (2 * dm)) * vvt;
  law.g3 = cross + (q.p2 * s / (2 * dm)) * vvt;
  law.plus = base + cross + (q.p2 / (2 * (q.r10 - s))) * vvt;
  law.minus = base - cross + (q.p2 / (2 * (q.r10 + s))) * vvt;

  const LD corr = 8 * q.p2 * q.r2 * q.r2;
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j) {
      law.offdiag.emplace_back(i, j);
      if (i == 0) {
        law.g2.push_back(4 * q.r20 + corr * q.r10 / dd);
        law.g4.push_back(a + corr * q.r1 / dd);
        law.pair_plus.push_back(4 * q.r20 + a + corr / (q.r10 - q.r1));
        law.pair_minus.push_back(4 * q.r20 - a + corr / (q.r10 + q.r1));
      } else {
        law.g2.push_back(4 * q.r20);
        law.g4.push_back(4 * q.r2);
        law.pair_plus.push_back(4 * q.r20 + 4 * q.r2);
        law.pair_minus.push_back(4 * (q.r20 - q.r2));
      }
    }
  return law;
}

// F with F F^T = S by pivoted LDL^T, clipping pivots in [-1e-10 scale, 0) to zero.
Eigen::MatrixXd psd_factor(const MatL& S, const char* what) {
  const auto n = S.rows();
  if (n == 0) return Eigen::MatrixXd(0, 0);
  Eigen::LDLT<MatL> ldlt(S);
  Eigen::Matrix<LD, Eigen::Dynamic, 1> dvec = ldlt.vectorD();
  LD scale = 0;
  for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(S(i, i)));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (dvec(i) < -1e-10L * scale)
      throw PreconditionError(std::string(what) +
                              " covariance is not positive semidefinite at this rho");
    dvec(i) = std::sqrt(std::max(dvec(i), LD(0)));
  }
  MatL L = ldlt.matrixL();
  MatL F = ldlt.transpositionsP().transpose() * (L * dvec.asDiagonal());
  return F.cast<double>();
}

double pair_scale(LD v) { return static_cast<double>(std::sqrt(std::max(v, LD(0)) / 2)); }

const std::vector<double>& cached_gamma_consts(int n) {
  static std::mutex mu;
  static std::map<int, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) {
    std::vector<double> g;
    for (int k = 0; k <= n; ++k) g.push_back(gamma_const_indexed(n, k));
    it = cache.emplace(n, std::move(g)).first;
  }
  return it->second;
}

// rho-independent part shared by the two leading-order laws.
double asymptote_base(const CovarianceModel& model, int N) {
  const double l2 = model.spectral_moment(1);
  const double l4 = model.spectral_moment(2);
  const double l6 = model.spectral_moment(3);
  return std::pow(3.0, -0.5 * (N - 1)) * std::pow(kPi, -N) * std::pow(l4 / l2, 0.5 * N) *
         (l2 * l6 - l4 * l4) / (l2 * l4);
}

// E[(Z+)^r] for Z ~ N(m, s^2).
double positive_part_moment(double r, double m, double s) {
  if (s <= 0.0) return m > 0.0 ? std::pow(m, r) : 0.0;
  const double t = m / s;
  if (r == 1.0) return m * gaussian_cdf(t) + s * gaussian_pdf(t);
  if (r == 2.0) return (m * m + s * s) * gaussian_cdf(t) + m * s * gaussian_pdf(t);
  return integrate_1d([&](double z) { return std::pow(m + s * z, r) * gaussian_pdf(z); },
                      Interval{-t, kInf}, QuadOptions{0.0, 1e-11, 2000})
      .value;
}

void check_bivariate(double sigma2, double c) {
  if (!(sigma2 > 0.0)) throw PreconditionError("variance must be positive");
  if (!(std::abs(c) < 1.0)) throw PreconditionError("correlation must satisfy |c| < 1");
}

}  // namespace

Eigen::MatrixXd ConditionalHessian::joint() const {
  const auto m = static_cast<Eigen::Index>(offdiag.size());
  const Eigen::Index block = N + m;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * block, 2 * block);
  j.block(0, 0, N, N) = gamma1;
  j.block(block, block, N, N) = gamma1;
  j.block(0, block, N, N) = gamma3;
  j.block(block, 0, N, N) = gamma3;
  for (Eigen::Index p = 0; p < m; ++p) {
    j(N + p, N + p) = gamma2(p);
    j(block + N + p, block + N + p) = gamma2(p);
    j(N + p, block + N + p) = gamma4(p);
    j(block + N + p, N + p) = gamma4(p);
  }
  return j;
}

Eigen::MatrixXd gradient_pair_covariance(const CovarianceModel& model, int N, double rho) {
  check_corr_args(N, rho);
  const RadialAt q = radial_at(model, rho);
  const double l2 = static_cast<double>(-2 * q.r10);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2 * N, 2 * N);
  for (int i = 0; i < N; ++i) {
    const LD c = -2 * q.r1 - (i == 0 ? 4 * q.p2 * q.r2 : LD(0));
    s(2 * i, 2 * i) = l2;
    s(2 * i + 1, 2 * i + 1) = l2;
    s(2 * i, 2 * i + 1) = static_cast<double>(c);
    s(2 * i + 1, 2 * i) = static_cast<double>(c);
  }
  return s;
}

double gradient_pair_determinant(const CovarianceModel& model, int N, double rho) {
  check_corr_args(N, rho);
  const RadialAt q = radial_at(model, rho);
  const LD l2 = -2 * q.r10;
  LD det = 1;
  for (int i = 0; i < N; ++i) {
    // lambda2^2 - c^2 with lambda2 - c formed without cancellation against r'(0)
    const LD diff = i == 0 ? 2 * (q.r1 - q.r10) + 4 * q.p2 * q.r2 : 2 * (q.r1 - q.r10);
    const LD c = -2 * q.r1 - (i == 0 ? 4 * q.p2 * q.r2 : LD(0));
    det *= diff * (l2 + c);
  }
  return static_cast<double>(det);
}

double gradient_pair_density(const CovarianceModel& model, int N, double rho) {
  const double det = gradient_pair_determinant(model, N, rho);
  if (!(det > 0.0))
    throw PreconditionError("gradient pair covariance is singular at rho = " +
                            std::to_string(rho));
  return std::pow(2.0 * kPi, -N) / std::sqrt(det);
}

ConditionalHessian conditional_cov(const CovarianceModel& model, int N, double rho) {
  const ExactLaw law = exact_law(model, N, rho);
  ConditionalHessian h;
  h.N = N;
  h.rho = rho;
  h.gamma1 = law.g1.cast<double>();
  h.gamma3 = law.g3.cast<double>();
  const auto m = static_cast<Eigen::Index>(law.offdiag.size());
  h.gamma2.resize(m);
  h.gamma4.resize(m);
  for (Eigen::Index p = 0; p < m; ++p) {
    h.gamma2(p) = static_cast<double>(law.g2[static_cast<std::size_t>(p)]);
    h.gamma4(p) = static_cast<double>(law.g4[static_cast<std::size_t>(p)]);
  }
  h.offdiag = law.offdiag;
  // Validates positive semidefiniteness of the joint law.
  psd_factor(law.plus, "diagonal-sum");
  psd_factor(law.minus, "diagonal-difference");
  for (std::size_t p = 0; p < law.pair_plus.size(); ++p)
    if (law.pair_plus[p] < -1e-10L * law.g2[p] || law.pair_minus[p] < -1e-10L * law.g2[p])
      throw PreconditionError("off-diagonal covariance is not positive semidefinite");
  return h;
}

std::map<std::string, double> small_rho_limits(const CovarianceModel& model, int N) {
  if (N < 1) throw PreconditionError("dimension must be >= 1");
  const double l2 = model.spectral_moment(1);
  const double l4 = model.spectral_moment(2);
  const double l6 = model.spectral_moment(3);
  const double l8 = model.spectral_moment(4);
  const double v11 = (l2 * l6 - l4 * l4) / (4 * l2);
  const double v1j = (9 * l2 * l6 - 5 * l4 * l4) / (180 * l2);
  return {
      {"var_xi11/rho2", v11},
      {"var_xi1j/rho2", v1j},
      {"var_xijj", 8 * l4 / 9},
      {"var_xijk", l4 / 3},
      {"cov_xi11_xijj/rho2", (11 * l2 * l6 - 15 * l4 * l4) / (180 * l2)},
      {"cov_xijj_xikk", 2 * l4 / 9},
      {"cross_xi11/rho2", -v11},
      {"cross_xi1j/rho2", -v1j},
      {"cross_xi11_xijj/rho2", (15 * l4 * l4 - 7 * l2 * l6) / (180 * l2)},
      {"cross_xijj", 8 * l4 / 9},
      {"cross_xijj_xikk", 2 * l4 / 9},
      {"cross_xijk", l4 / 3},
      {"det_xi11_pair/rho6", (l4 * l8 - l6 * l6) * (l2 * l6 - l4 * l4) / (144 * l2 * l4)},
      {"det_gradient/rho2N", std::pow(l2, N) * std::pow(l4, N) / std::pow(3.0, N - 1)},
  };
}

CorrMcTable corr_mc_table(const CovarianceModel& model, int N, double rho,
                          const CorrMcOptions& opts) {
  if (opts.samples < 10'000) throw PreconditionError("Monte Carlo needs at least 1e4 samples");
  if (opts.batches < 2 || opts.batches > opts.samples)
    throw PreconditionError("batch count must be in 2..samples");
  const ExactLaw law = exact_law(model, N, rho);
  const double density = gradient_pair_density(model, N, rho);
  const Eigen::MatrixXd fplus = psd_factor(law.plus, "diagonal-sum");
  const Eigen::MatrixXd fminus = psd_factor(law.minus, "diagonal-difference");
  const std::size_t npairs = law.offdiag.size();
  std::vector<double> pa(npairs), pb(npairs);
  for (std::size_t p = 0; p < npairs; ++p) {
    pa[p] = pair_scale(law.pair_plus[p]);
    pb[p] = pair_scale(law.pair_minus[p]);
  }

  const int cells = (N + 1) * (N + 1);
  const auto B = static_cast<std::size_t>(opts.batches);
  struct Batch {
    long long kept = 0, discarded = 0;
    double total = 0.0;
    std::vector<double> cell;
  };
  std::vector<Batch> batches(B);
  const long long per = opts.samples / opts.batches;
  const long long extra = opts.samples % opts.batches;

  parallel_for(B, opts.threads, [&](std::size_t b) {
    Batch& out = batches[b];
    out.cell.assign(static_cast<std::size_t>(cells), 0.0);
    auto rng = stream_rng(opts.seed, b);
    std::normal_distribution<double> normal(0.0, 1.0);
    const long long n = per + (static_cast<long long>(b) < extra ? 1 : 0);
    Eigen::VectorXd zu(N), zw(N);
    SmallMat h0(N, N), ht(N, N);
    Eigen::SelfAdjointEigenSolver<SmallMat> es(N);
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    for (long long s = 0; s < n; ++s) {
      for (int i = 0; i < N; ++i) zu(i) = normal(rng);
      for (int i = 0; i < N; ++i) zw(i) = normal(rng);
      const Eigen::VectorXd u = fplus * zu;
      const Eigen::VectorXd w = fminus * zw;
      for (int i = 0; i < N; ++i) {
        h0(i, i) = (u(i) + w(i)) * inv_sqrt2;
        ht(i, i) = (u(i) - w(i)) * inv_sqrt2;
      }
      for (std::size_t p = 0; p < npairs; ++p) {
        const double z1 = normal(rng);
        const double z2 = normal(rng);
        const auto [i, j] = law.offdiag[p];
        h0(i, j) = h0(j, i) = pa[p] * z1 + pb[p] * z2;
        ht(i, j) = ht(j, i) = pa[p] * z1 - pb[p] * z2;
      }
      double value = 1.0;
      int idx[2];
      bool degenerate = false;
      const SmallMat* hs[2] = {&h0, &ht};
      for (int pt = 0; pt < 2; ++pt) {
        es.compute(*hs[pt], Eigen::EigenvaluesOnly);
        const auto& ev = es.eigenvalues();
        const double thresh = 1e-10 * hs[pt]->norm();
        int neg = 0;
        for (int i = 0; i < N; ++i) {
          if (std::abs(ev(i)) < thresh) degenerate = true;
          if (ev(i) < 0.0) ++neg;
          value *= ev(i);
        }
        idx[pt] = neg;
      }
      if (degenerate) {
        ++out.discarded;
        continue;
      }
      value = std::abs(value);
      ++out.kept;
      out.total += value;
      out.cell[static_cast<std::size_t>(idx[0] * (N + 1) + idx[1])] += value;
    }
  });

  auto summarize = [&](auto&& pick) {
    long long kept = 0, discarded = 0;
    double sum = 0.0;
    std::vector<double> means;
    for (const auto& b : batches) {
      kept += b.kept;
      discarded += b.discarded;
      sum += pick(b);
      means.push_back(b.kept > 0 ? pick(b) / static_cast<double>(b.kept) : 0.0);
    }
    CorrEstimate e;
    e.rho = rho;
    e.samples = kept;
    e.discarded = discarded;
    const double mean = kept > 0 ? sum / static_cast<double>(kept) : 0.0;
    double var = 0.0;
    double mbar = 0.0;
    for (double m : means) mbar += m;
    mbar /= static_cast<double>(means.size());
    for (double m : means) var += (m - mbar) * (m - mbar);
    var /= static_cast<double>(means.size() - 1);
    e.value = mean * density;
    e.std_error = std::sqrt(var / static_cast<double>(means.size())) * density;
    return e;
  };

  CorrMcTable table;
  table.total = summarize([](const Batch& b) { return b.total; });
  table.by_pair.assign(static_cast<std::size_t>(N + 1),
                       std::vector<CorrEstimate>(static_cast<std::size_t>(N + 1)));
  for (int i0 = 0; i0 <= N; ++i0)
    for (int i1 = 0; i1 <= N; ++i1) {
      const auto c = static_cast<std::size_t>(i0 * (N + 1) + i1);
      auto e = summarize([c](const Batch& b) { return b.cell[c]; });
      e.index_pair = std::make_pair(i0, i1);
      table.by_pair[static_cast<std::size_t>(i0)][static_cast<std::size_t>(i1)] = e;
    }
  return table;
}

CorrEstimate corr_mc(const CovarianceModel& model, int N, double rho, const CorrMcOptions& opts,
                     std::optional<std::pair<int, int>> index_pair) {
  if (index_pair) {
    const auto [a, b] = *index_pair;
    if (a < 0 || a > N || b < 0 || b > N)
      throw PreconditionError("index pair entries must lie in 0..N");
  }
  const CorrMcTable t = corr_mc_table(model, N, rho, opts);
  if (!index_pair) return t.total;
  return t.by_pair[static_cast<std::size_t>(index_pair->first)]
                  [static_cast<std::size_t>(index_pair->second)];
}

double corr_asymptote_total(const CovarianceModel& model, int N, double rho) {
  check_corr_args(N, rho);
  const auto& g = cached_gamma_consts(N - 1);
  double gamma = 0.0;
  for (double v : g) gamma += v;
  return std::pow(rho, 2 - N) * gamma / 8.0 * asymptote_base(model, N);
}

double corr_asymptote_adjacent(const CovarianceModel& model, int N, int k, double rho) {
  check_corr_args(N, rho);
  if (k < 0 || k > N - 1) throw PreconditionError("adjacent index k must be in 0..N-1");
  const double gk = cached_gamma_consts(N - 1)[static_cast<std::size_t>(k)];
  return std::pow(rho, 2 - N) * gk / 16.0 * asymptote_base(model, N);
}

double corr_1d_extrema_asymptote(const CovarianceModel& model, int N, double rho) {
  if (N != 1) throw PreconditionError("the extrema-pair law is one-dimensional (N = 1)");
  check_corr_args(N, rho);
  const double l2 = model.spectral_moment(1);
  const double l4 = model.spectral_moment(2);
  const double l6 = model.spectral_moment(3);
  const double l8 = model.spectral_moment(4);
  return std::pow(l4 * l8 - l6 * l6, 1.5) /
         (1296.0 * kPi * kPi * l4 * l4 * std::sqrt(l2 * l6 - l4 * l4)) * std::pow(rho, 4);
}

double mario_moment(double r, double sigma2, double c) {
  check_bivariate(sigma2, c);
  if (!(r > 0.0)) throw PreconditionError("moment order r must be positive");
  const double s = std::sqrt(1.0 - c * c);
  const double unit =
      integrate_1d(
          [&](double x) {
            return std::pow(x, r) * gaussian_pdf(x) * positive_part_moment(r, c * x, s);
          },
          Interval{0.0, kInf}, QuadOptions{0.0, 1e-10, 2000})
          .value;
  return std::pow(sigma2, r) * unit;
}

double mario_cross_moment(double sigma2, double c) {
  check_bivariate(sigma2, c);
  const double s = std::sqrt(1.0 - c * c);
  const double unit =
      integrate_1d([&](double x) { return x * gaussian_pdf(x) * positive_part_moment(1.0, -c * x, s); },
                   Interval{0.0, kInf}, QuadOptions{0.0, 1e-10, 2000})
          .value;
  return sigma2 * unit;
}

double mario_constant(double r) {
  if (!(r > 0.0)) throw PreconditionError("moment order r must be positive");
  auto inner = [r](double x) {
    return integrate_1d([&](double w) { return std::pow(w - x, r) * std::exp(-0.5 * w * w); },
                        Interval{x, kInf}, QuadOptions{0.0, 1e-12, 2000})
        .value;
  };
  return integrate_1d([&](double x) { return std::pow(x, r) * inner(x); }, Interval{0.0, kInf},
                      QuadOptions{0.0, 1e-11, 2000})
             .value /
         (2.0 * kPi);
}

double mario_asymptotic(double r, double sigma2, double c) {
  check_bivariate(sigma2, c);
  const double det = sigma2 * sigma2 * (1.0 - c * c);
  return mario_constant(r) * std::pow(sigma2, -(1.0 + r)) * std::pow(det, (2.0 * r + 1.0) / 2.0);
}

SlopeFit exponent_fit(std::span<const CorrEstimate> estimates) {
  std::vector<const CorrEstimate*> usable;
  for (const auto& e : estimates)
    if (e.value > 0.0 && e.rho > 0.0 && std::isfinite(e.value)) usable.push_back(&e);
  if (usable.size() < 3)
    throw PreconditionError("exponent fit needs at least 3 positive estimates");
  double rmin = usable.front()->rho, rmax = rmin;
  for (const auto* e : usable) {
    rmin = std::min(rmin, e->rho);
    rmax = std::max(rmax, e->rho);
  }
  if (rmax < 10.0 * rmin * (1.0 - 1e-9))
    throw PreconditionError("exponent fit needs rho values spanning at least one decade");

  bool weighted = true;
  for (const auto* e : usable)
    if (!(e->std_error > 0.0)) weighted = false;
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto* e : usable) {
    const double x = std::log(e->rho);
    const double y = std::log(e->value);
    const double w = weighted ? std::pow(e->value / e->std_error, 2) : 1.0;
    sw += w;
    sx += w * x;
    sy += w * y;
    sxx += w * x * x;
    sxy += w * x * y;
  }
  const double delta = sw * sxx - sx * sx;
  SlopeFit fit;
  fit.points = static_cast<int>(usable.size());
  fit.slope = (sw * sxy - sx * sy) / delta;
  fit.intercept = (sxx * sy - sx * sxy) / delta;
  if (weighted) {
    fit.slope_error = std::sqrt(sw / delta);
  } else {
    double rss = 0;
    for (const auto* e : usable) {
      const double res = std::log(e->value) - fit.intercept - fit.slope * std::log(e->rho);
      rss += res * res;
    }
    const double dof = static_cast<double>(usable.size()) - 2.0;
    fit.slope_error = std::sqrt(rss / dof * sw / delta);
  }
  return fit;
}

}  // namespace critpoint
