#include "critpoint/field.hpp"

#include <fftw3.h>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstring>
#include <istream>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <unordered_map>

#include "critpoint/errors.hpp"
#include "critpoint/parallel.hpp"
#include "critpoint/special.hpp"

namespace critpoint {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kMaxGridPoints = std::size_t{1} << 27;

// Planner calls are not thread-safe in FFTW; execution on distinct arrays is.
std::mutex& planner_mutex() {
  static std::mutex mu;
  return mu;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuf = std::unique_ptr<double[], FftwFree>;
using ComplexBuf = std::unique_ptr<fftw_complex[], FftwFree>;

RealBuf alloc_real(std::size_t n) {
  return RealBuf(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
}
ComplexBuf alloc_complex(std::size_t n) {
  return ComplexBuf(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
}

// Half-complex layout of an r2c transform on a side^N grid.
struct Spectrum {
  int N, side;
  std::size_t real_size, complex_size;
  int half;
};

Spectrum spectrum_shape(int N, int side) {
  std::size_t m = 1;
  for (int d = 0; d < N; ++d) m *= static_cast<std::size_t>(side);
  const int half = side / 2 + 1;
  return {N, side, m, m / static_cast<std::size_t>(side) * static_cast<std::size_t>(half), half};
}

void forward(const Spectrum& s, double* in, fftw_complex* out) {
  std::vector<int> n(static_cast<std::size_t>(s.N), s.side);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_r2c(s.N, n.data(), in, out, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plan);
}

void backward(const Spectrum& s, fftw_complex* in, double* out) {
  std::vector<int> n(static_cast<std::size_t>(s.N), s.side);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_c2r(s.N, n.data(), in, out, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plan);
}

// Calls f(flat, freq indices) over the half spectrum.
template <class F>
void for_each_frequency(const Spectrum& s, F&& f) {
  std::array<int, 3> k{0, 0, 0};
  for (std::size_t flat = 0; flat < s.complex_size; ++flat) {
    f(flat, k);
    for (int d = s.N - 1; d >= 0; --d) {
      const int lim = d == s.N - 1 ? s.half : s.side;
      if (++k[static_cast<std::size_t>(d)] < lim) break;
      k[static_cast<std::size_t>(d)] = 0;
    }
  }
}

void check_grid_shape(int N, int side, double spacing) {
  if (N < 1 || N > 3) throw PreconditionError("field simulation supports N = 1..3");
  if (side < 8 || (side & (side - 1)) != 0)
    throw PreconditionError("grid side must be a power of two >= 8");
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    throw PreconditionError("grid spacing must be positive");
  double m = 1;
  for (int d = 0; d < N; ++d) m *= side;
  if (m > static_cast<double>(kMaxGridPoints))
    throw PreconditionError("grid exceeds 2^27 points");
}

std::size_t flat_index(int N, int side, const std::array<int, 3>& i) {
  std::size_t f = 0;
  for (int d = 0; d < N; ++d) f = f * static_cast<std::size_t>(side) + static_cast<std::size_t>(i[static_cast<std::size_t>(d)]);
  return f;
}

std::array<int, 3> unflatten(int N, int side, std::size_t f) {
  std::array<int, 3> i{0, 0, 0};
  for (int d = N - 1; d >= 0; --d) {
    i[static_cast<std::size_t>(d)] = static_cast<int>(f % static_cast<std::size_t>(side));
    f /= static_cast<std::size_t>(side);
  }
  return i;
}

int wrap(int i, int side) { return ((i % side) + side) % side; }

double wrap_coord(double x, double length) {
  double w = std::fmod(x, length);
  if (w < 0) w += length;
  if (w >= length) w -= length;
  return w;
}

double torus_delta(double a, double b, double length) {
  double d = std::abs(a - b);
  return std::min(d, length - d);
}

// Quintic B-spline and its first two derivatives, support (-3, 3).
void bspline5(double x, double& b0, double& b1, double& b2) {
  static constexpr double binom[7] = {1, 6, 15, 20, 15, 6, 1};
  b0 = b1 = b2 = 0.0;
  for (int j = 0; j < 7; ++j) {
    const double t = x + 3.0 - j;
    if (t <= 0.0) continue;
    const double s = (j % 2 == 0 ? 1.0 : -1.0) * binom[j];
    const double t2 = t * t, t3 = t2 * t;
    b0 += s * t3 * t2;
    b1 += s * t2 * t2;
    b2 += s * t3;
  }
  b0 /= 120.0;
  b1 /= 24.0;
  b2 /= 6.0;
}

}  // namespace

double FieldGrid::volume() const { return std::pow(length(), N); }

FieldGrid synthesize(const CovarianceModel& model, int N, int side, double spacing,
                     std::uint64_t seed) {
  check_grid_shape(N, side, spacing);
  if (!model.is_analytic())
    throw PreconditionError("field synthesis needs an analytic covariance model");
  const double L = side * spacing;
  const double tail = static_cast<double>(model.radial(0, static_cast<long double>(L * L / 4)));
  if (!(std::abs(tail) < 1e-8))
    throw PreconditionError("domain too small: covariance at half the period is " +
                            std::to_string(tail) + " (needs < 1e-8)");

  const Spectrum s = spectrum_shape(N, side);
  auto real = alloc_real(s.real_size);
  auto spec = alloc_complex(s.complex_size);
  for (std::size_t f = 0; f < s.real_size; ++f) {
    const auto i = unflatten(N, side, f);
    double d2 = 0;
    for (int d = 0; d < N; ++d) {
      const int k = std::min(i[static_cast<std::size_t>(d)], side - i[static_cast<std::size_t>(d)]);
      d2 += (k * spacing) * (k * spacing);
    }
    real[f] = static_cast<double>(model.radial(0, static_cast<long double>(d2)));
  }
  forward(s, real.get(), spec.get());

  std::vector<double> amp(s.complex_size);
  double negative = 0.0, total = 0.0;
  for_each_frequency(s, [&](std::size_t f, const std::array<int, 3>& k) {
    const int last = k[static_cast<std::size_t>(N - 1)];
    const double mult = (last == 0 || 2 * last == side) ? 1.0 : 2.0;
    const double lam = spec[f][0];
    total += mult * std::abs(lam);
    if (lam < 0) negative += mult * -lam;
    amp[f] = std::sqrt(std::max(lam, 0.0));
  });
  if (negative > 1e-6 * total)
    throw NumericalError("circulant embedding failed: negative spectral mass", negative / total,
                         1e-6);

  auto rng = stream_rng(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t f = 0; f < s.real_size; ++f) real[f] = normal(rng);
  forward(s, real.get(), spec.get());
  const double inv_m = 1.0 / static_cast<double>(s.real_size);
  for (std::size_t f = 0; f < s.complex_size; ++f) {
    spec[f][0] *= amp[f] * inv_m;
    spec[f][1] *= amp[f] * inv_m;
  }
  backward(s, spec.get(), real.get());

  FieldGrid g{N, side, spacing, std::vector<double>(real.get(), real.get() + s.real_size)};
  return g;
}

FieldGrid grid_from_function(int N, int side, double spacing,
                             const std::function<double(std::span<const double>)>& f) {
  check_grid_shape(N, side, spacing);
  FieldGrid g{N, side, spacing, {}};
  const auto m = spectrum_shape(N, side).real_size;
  g.values.resize(m);
  std::vector<double> x(static_cast<std::size_t>(N));
  for (std::size_t flat = 0; flat < m; ++flat) {
    const auto i = unflatten(N, side, flat);
    for (int d = 0; d < N; ++d) x[static_cast<std::size_t>(d)] = i[static_cast<std::size_t>(d)] * spacing;
    g.values[flat] = f(x);
  }
  return g;
}

SplineField::SplineField(const FieldGrid& grid)
    : N_(grid.N), side_(grid.side), spacing_(grid.spacing) {
  check_grid_shape(N_, side_, spacing_);
  const Spectrum s = spectrum_shape(N_, side_);
  if (grid.values.size() != s.real_size) throw PreconditionError("grid size mismatch");
  auto real = alloc_real(s.real_size);
  auto spec = alloc_complex(s.complex_size);
  std::copy(grid.values.begin(), grid.values.end(), real.get());
  forward(s, real.get(), spec.get());
  std::vector<double> symbol(static_cast<std::size_t>(side_));
  for (int k = 0; k < side_; ++k) {
    const double w = 2.0 * kPi * k / side_;
    symbol[static_cast<std::size_t>(k)] = (66.0 + 52.0 * std::cos(w) + 2.0 * std::cos(2.0 * w)) / 120.0;
  }
  const double inv_m = 1.0 / static_cast<double>(s.real_size);
  for_each_frequency(s, [&](std::size_t f, const std::array<int, 3>& k) {
    double den = 1.0;
    for (int d = 0; d < N_; ++d) den *= symbol[static_cast<std::size_t>(k[static_cast<std::size_t>(d)])];
    spec[f][0] *= inv_m / den;
    spec[f][1] *= inv_m / den;
  });
  backward(s, spec.get(), real.get());
  coef_.assign(real.get(), real.get() + s.real_size);
}

void SplineField::evaluate(std::span<const double> x, double& value, std::span<double> grad,
                           std::span<double> hess) const {
  double w[3][3][6];
  int base[3];
  for (int d = 0; d < N_; ++d) {
    const double u = x[static_cast<std::size_t>(d)] / spacing_;
    const double fl = std::floor(u);
    base[d] = static_cast<int>(fl) - 2;
    for (int m = 0; m < 6; ++m) {
      double b0, b1, b2;
      bspline5(u - (fl - 2 + m), b0, b1, b2);
      w[d][0][m] = b0;
      w[d][1][m] = b1 / spacing_;
      w[d][2][m] = b2 / (spacing_ * spacing_);
    }
  }
  // Gather the 6^N coefficient block, then contract one axis at a time against the
  // (value, first, second) derivative weights.
  std::array<double, 216> cur{}, next{};
  int P = 1;
  for (int d = 0; d < N_; ++d) P *= 6;
  std::size_t off[3][6]{};
  const std::size_t stride[3] = {
      N_ == 1 ? 1u : static_cast<std::size_t>(side_) * (N_ == 3 ? static_cast<std::size_t>(side_) : 1u),
      N_ == 3 ? static_cast<std::size_t>(side_) : 1u, 1u};
  for (int d = 0; d < N_; ++d)
    for (int m = 0; m < 6; ++m)
      off[d][m] = static_cast<std::size_t>(wrap(base[d] + m, side_)) * stride[d];
  if (N_ == 1) {
    for (int a = 0; a < 6; ++a) cur[static_cast<std::size_t>(a)] = coef_[off[0][a]];
  } else if (N_ == 2) {
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) cur[static_cast<std::size_t>(a * 6 + b)] = coef_[off[0][a] + off[1][b]];
  } else {
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b)
        for (int c = 0; c < 6; ++c)
          cur[static_cast<std::size_t>((a * 6 + b) * 6 + c)] = coef_[off[0][a] + off[1][b] + off[2][c]];
  }
  int S = 1;
  for (int d = N_ - 1; d >= 0; --d) {
    P /= 6;
    for (int p = 0; p < P; ++p)
      for (int o = 0; o < 3; ++o)
        for (int q = 0; q < S; ++q) {
          double acc = 0.0;
          for (int m = 0; m < 6; ++m)
            acc += cur[static_cast<std::size_t>((p * 6 + m) * S + q)] * w[d][o][m];
          next[static_cast<std::size_t>(p * 3 * S + o * S + q)] = acc;
        }
    S *= 3;
    std::swap(cur, next);
  }
  // cur is now indexed by derivative orders (o_0, .., o_{N-1}), o_0 most significant.
  auto at = [&](int d1, int d2) {
    int idx = 0;
    for (int d = 0; d < N_; ++d) idx = idx * 3 + (d == d1) + (d == d2);
    return cur[static_cast<std::size_t>(idx)];
  };
  value = at(-1, -1);
  for (int d = 0; d < N_; ++d) {
    grad[static_cast<std::size_t>(d)] = at(d, -1);
    for (int e = 0; e < N_; ++e) hess[static_cast<std::size_t>(d * N_ + e)] = at(d, e);
  }
}

double SplineField::value(std::span<const double> x) const {
  double v;
  double g[3], h[9];
  evaluate(x, v, std::span<double>(g, static_cast<std::size_t>(N_)),
           std::span<double>(h, static_cast<std::size_t>(N_ * N_)));
  return v;
}

Detection detect_critical_points(const FieldGrid& grid) {
  const int N = grid.N;
  const int side = grid.side;
  const double h = grid.spacing;
  const double L = grid.length();
  const SplineField spline(grid);
  const std::size_t m = grid.values.size();
  Detection out;

  std::vector<std::vector<double>> dgrid(static_cast<std::size_t>(N), std::vector<double>(m));
  for (std::size_t f = 0; f < m; ++f) {
    const auto i = unflatten(N, side, f);
    for (int d = 0; d < N; ++d) {
      auto ip = i, im = i;
      ip[static_cast<std::size_t>(d)] = wrap(i[static_cast<std::size_t>(d)] + 1, side);
      im[static_cast<std::size_t>(d)] = wrap(i[static_cast<std::size_t>(d)] - 1, side);
      dgrid[static_cast<std::size_t>(d)][f] =
          (grid.values[flat_index(N, side, ip)] - grid.values[flat_index(N, side, im)]) / (2 * h);
    }
  }

  using Small = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
  using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
  const int corners = 1 << N;
  std::vector<CriticalPointRecord> found;
  for (std::size_t f = 0; f < m; ++f) {
    const auto i = unflatten(N, side, f);
    bool candidate = true;
    for (int d = 0; d < N && candidate; ++d) {
      double lo = kInf, hi = -kInf;
      for (int c = 0; c < corners; ++c) {
        auto j = i;
        for (int e = 0; e < N; ++e)
          if (c >> e & 1) j[static_cast<std::size_t>(e)] = wrap(j[static_cast<std::size_t>(e)] + 1, side);
        const double v = dgrid[static_cast<std::size_t>(d)][flat_index(N, side, j)];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      candidate = lo <= 0.0 && hi >= 0.0;
    }
    if (!candidate) continue;
    ++out.stats.candidates;

    SmallVec x(N), g(N), gt(N);
    Small H(N, N), Ht(N, N);
    for (int d = 0; d < N; ++d) x(d) = (i[static_cast<std::size_t>(d)] + 0.5) * h;
    double val = 0.0, valt = 0.0;
    auto eval = [&](const SmallVec& at, double& v, SmallVec& gr, Small& he) {
      spline.evaluate(std::span<const double>(at.data(), static_cast<std::size_t>(N)), v,
                      std::span<double>(gr.data(), static_cast<std::size_t>(N)),
                      std::span<double>(he.data(), static_cast<std::size_t>(N * N)));
    };
    eval(x, val, g, H);
    const SmallVec start = x;
    bool converged = false;
    for (int it = 0; it < 60; ++it) {
      // Points this far from the seed cell are picked up from their own cell.
      if ((x - start).norm() > 3 * h) break;
      if (g.norm() <= kGradientTolerance) {
        converged = true;
        break;
      }
      SmallVec step = H.fullPivLu().solve(-g);
      if (!step.allFinite()) break;
      if (step.norm() > 2 * h) step *= 2 * h / step.norm();
      double t = 1.0;
      bool improved = false;
      for (int k = 0; k < 40; ++k) {
        const SmallVec xt = x + t * step;
        eval(xt, valt, gt, Ht);
        if (gt.norm() < g.norm()) {
          x = xt;
          val = valt;
          g = gt;
          H = Ht;
          improved = true;
          break;
        }
        t *= 0.5;
      }
      if (!improved) {
        converged = g.norm() <= kGradientTolerance;
        break;
      }
    }
    if (!converged) {
      ++out.stats.newton_failures;
      continue;
    }
    CriticalPointRecord rec;
    rec.location.resize(static_cast<std::size_t>(N));
    for (int d = 0; d < N; ++d) rec.location[static_cast<std::size_t>(d)] = wrap_coord(x(d), L);
    rec.value = val;
    rec.gradient_norm = g.norm();
    Eigen::SelfAdjointEigenSolver<Small> es(H, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    rec.hessian_eigs.assign(ev.data(), ev.data() + N);
    rec.index = static_cast<int>(std::count_if(ev.data(), ev.data() + N, [](double e) { return e < 0.0; }));
    if (ev.cwiseAbs().minCoeff() < 1e-8 * H.norm()) {
      ++out.stats.degenerate;
      continue;
    }
    found.push_back(std::move(rec));
  }

  std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    return a.gradient_norm < b.gradient_norm;
  });
  std::unordered_map<std::size_t, std::vector<std::size_t>> cells;
  const double radius = h / 2;
  auto cell_of = [&](const std::vector<double>& p) {
    std::array<int, 3> c{0, 0, 0};
    for (int d = 0; d < N; ++d)
      c[static_cast<std::size_t>(d)] = wrap(static_cast<int>(std::floor(p[static_cast<std::size_t>(d)] / h)), side);
    return c;
  };
  for (auto& rec : found) {
    const auto c = cell_of(rec.location);
    bool dup = false;
    const int neigh = N == 1 ? 3 : N == 2 ? 9 : 27;
    for (int q = 0; q < neigh && !dup; ++q) {
      auto nc = c;
      int rem = q;
      for (int d = 0; d < N; ++d) {
        nc[static_cast<std::size_t>(d)] = wrap(nc[static_cast<std::size_t>(d)] + rem % 3 - 1, side);
        rem /= 3;
      }
      const auto it = cells.find(flat_index(N, side, nc));
      if (it == cells.end()) continue;
      for (std::size_t idx : it->second) {
        double d2 = 0;
        for (int d = 0; d < N; ++d) {
          const double dd = torus_delta(rec.location[static_cast<std::size_t>(d)],
                                        out.points[idx].location[static_cast<std::size_t>(d)], L);
          d2 += dd * dd;
        }
        if (d2 < radius * radius) {
          dup = true;
          break;
        }
      }
    }
    if (dup) {
      ++out.stats.duplicates;
      continue;
    }
    cells[flat_index(N, side, c)].push_back(out.points.size());
    out.points.push_back(std::move(rec));
  }
  // Restore spatial order so output does not depend on gradient round-off ranking.
  std::sort(out.points.begin(), out.points.end(),
            [](const auto& a, const auto& b) { return a.location < b.location; });
  return out;
}

IndexFractions empirical_index_fractions(std::span<const CriticalPointRecord> records, int N,
                                         double z, long long min_records) {
  if (N < 1) throw PreconditionError("dimension must be >= 1");
  const auto n = static_cast<long long>(records.size());
  if (n < min_records)
    throw PreconditionError("index fractions need at least " + std::to_string(min_records) +
                            " records, got " + std::to_string(n));
  IndexFractions r;
  r.N = N;
  r.total = n;
  r.counts.assign(static_cast<std::size_t>(N + 1), 0);
  for (const auto& rec : records) {
    if (rec.index < 0 || rec.index > N) throw PreconditionError("record index outside 0..N");
    ++r.counts[static_cast<std::size_t>(rec.index)];
  }
  const double nn = static_cast<double>(n);
  for (long long c : r.counts) {
    const double p = static_cast<double>(c) / nn;
    const double den = 1.0 + z * z / nn;
    const double centre = (p + z * z / (2 * nn)) / den;
    const double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / den;
    r.fractions.push_back(p);
    r.lower.push_back(centre - half);
    r.upper.push_back(centre + half);
  }
  return r;
}

std::vector<PairBin> empirical_pair_correlation(
    std::span<const std::vector<CriticalPointRecord>> realizations, int N, double length,
    std::span<const double> edges, std::optional<std::pair<int, int>> index_pair) {
  if (N < 1 || N > 3) throw PreconditionError("pair correlation supports N = 1..3");
  if (realizations.empty()) throw PreconditionError("no realizations");
  if (edges.size() < 2) throw PreconditionError("need at least one bin");
  for (std::size_t b = 1; b < edges.size(); ++b)
    if (!(edges[b] > edges[b - 1])) throw PreconditionError("bin edges must increase");
  if (edges.front() < 0 || edges.back() >= length / 2)
    throw PreconditionError("bins must lie in [0, L/2)");

  const std::size_t nb = edges.size() - 1;
  const double vol = std::pow(length, N);
  auto shell = [N](double lo, double hi) {
    if (N == 1) return 2 * (hi - lo);
    if (N == 2) return kPi * (hi * hi - lo * lo);
    return 4.0 / 3.0 * kPi * (hi * hi * hi - lo * lo * lo);
  };
  const double rmax2 = edges.back() * edges.back();
  std::vector<std::vector<double>> a(nb), g(nb);
  std::vector<long long> pairs(nb, 0);
  for (const auto& recs : realizations) {
    std::vector<long long> count(nb, 0);
    long long n1 = 0, n2 = 0;
    for (const auto& r : recs) {
      if (!index_pair || r.index == index_pair->first) ++n1;
      if (!index_pair || r.index == index_pair->second) ++n2;
    }
    for (std::size_t p = 0; p < recs.size(); ++p) {
      if (index_pair && recs[p].index != index_pair->first) continue;
      for (std::size_t q = 0; q < recs.size(); ++q) {
        if (p == q || (index_pair && recs[q].index != index_pair->second)) continue;
        double d2 = 0;
        for (int d = 0; d < N && d2 < rmax2; ++d) {
          const double dd = torus_delta(recs[p].location[static_cast<std::size_t>(d)],
                                        recs[q].location[static_cast<std::size_t>(d)], length);
          d2 += dd * dd;
        }
        if (d2 >= rmax2) continue;
        const double dist = std::sqrt(d2);
        const auto it = std::upper_bound(edges.begin(), edges.end(), dist);
        if (it == edges.begin()) continue;
        ++count[static_cast<std::size_t>(it - edges.begin() - 1)];
      }
    }
    const bool same = !index_pair || index_pair->first == index_pair->second;
    const double pair_norm = same ? static_cast<double>(n1) * static_cast<double>(n1 - 1)
                                  : static_cast<double>(n1) * static_cast<double>(n2);
    for (std::size_t b = 0; b < nb; ++b) {
      const double sv = shell(edges[b], edges[b + 1]);
      const double ab = static_cast<double>(count[b]) / (vol * sv);
      a[b].push_back(ab);
      g[b].push_back(pair_norm > 0 ? ab * vol * vol / pair_norm : 0.0);
      pairs[b] += count[b];
    }
  }
  auto mean_err = [](const std::vector<double>& v, double& mean, double& err) {
    mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    err = 0;
    if (v.size() < 2) return;
    for (double x : v) err += (x - mean) * (x - mean);
    err = std::sqrt(err / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  };
  std::vector<PairBin> out(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    out[b].lo = edges[b];
    out[b].hi = edges[b + 1];
    out[b].pairs = pairs[b];
    out[b].empty = pairs[b] == 0;
    mean_err(a[b], out[b].a, out[b].a_error);
    mean_err(g[b], out[b].g, out[b].g_error);
  }
  return out;
}

std::uint64_t realization_seed(std::uint64_t seed, std::size_t i) {
  auto rng = stream_rng(seed, i);
  return rng();
}

SimulationResult simulate(const CovarianceModel& model, const SimulationOptions& opts) {
  check_grid_shape(opts.N, opts.side, opts.spacing);
  if (opts.realizations < 1) throw PreconditionError("need at least one realization");
  SimulationResult res;
  const double l2 = model.spectral_moment(1);
  if (opts.spacing > 0.2 / std::sqrt(l2))
    res.warnings.push_back("grid spacing exceeds 0.2/sqrt(lambda2); small features may be missed");

  const auto R = static_cast<std::size_t>(opts.realizations);
  res.realizations.resize(R);
  std::vector<DetectionStats> stats(R);
  parallel_for(R, opts.threads, [&](std::size_t i) {
    const FieldGrid grid =
        synthesize(model, opts.N, opts.side, opts.spacing, realization_seed(opts.seed, i));
    Detection det = detect_critical_points(grid);
    res.realizations[i] = std::move(det.points);
    stats[i] = det.stats;
  });
  res.volume = std::pow(opts.side * opts.spacing, opts.N);
  std::vector<double> dens;
  for (std::size_t i = 0; i < R; ++i) {
    res.stats.candidates += stats[i].candidates;
    res.stats.newton_failures += stats[i].newton_failures;
    res.stats.degenerate += stats[i].degenerate;
    res.stats.duplicates += stats[i].duplicates;
    dens.push_back(static_cast<double>(res.realizations[i].size()) / res.volume);
  }
  for (double d : dens) res.density += d;
  res.density /= static_cast<double>(R);
  if (R > 1) {
    double v = 0;
    for (double d : dens) v += (d - res.density) * (d - res.density);
    res.density_error = std::sqrt(v / static_cast<double>(R - 1) / static_cast<double>(R));
  }
  return res;
}

void write_snapshot(const FieldGrid& grid, std::ostream& out) {
  const std::uint32_t header[3] = {1u, static_cast<std::uint32_t>(grid.N),
                                   static_cast<std::uint32_t>(grid.side)};
  out.write("CPLB", 4);
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(&grid.spacing), sizeof(double));
  out.write(reinterpret_cast<const char*>(grid.values.data()),
            static_cast<std::streamsize>(grid.values.size() * sizeof(double)));
  if (!out) throw Error("failed to write grid snapshot");
}

FieldGrid read_snapshot(std::istream& in) {
  char magic[4];
  std::uint32_t header[3];
  FieldGrid g;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  in.read(reinterpret_cast<char*>(&g.spacing), sizeof(double));
  if (!in || std::memcmp(magic, "CPLB", 4) != 0) throw PreconditionError("not a grid snapshot");
  if (header[0] != 1u) throw PreconditionError("unsupported snapshot version");
  g.N = static_cast<int>(header[1]);
  g.side = static_cast<int>(header[2]);
  check_grid_shape(g.N, g.side, g.spacing);
  g.values.resize(spectrum_shape(g.N, g.side).real_size);
  in.read(reinterpret_cast<char*>(g.values.data()),
          static_cast<std::streamsize>(g.values.size() * sizeof(double)));
  if (!in) throw PreconditionError("truncated grid snapshot");
  return g;
}

}  // namespace critpoint
