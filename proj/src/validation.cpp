#include "critpoint/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>

#include "critpoint/correlations.hpp"
#include "critpoint/covariance.hpp"
#include "critpoint/errors.hpp"
#include "critpoint/field.hpp"
#include "critpoint/goe.hpp"
#include "critpoint/kac_rice.hpp"
#include "critpoint/parallel.hpp"
#include "critpoint/special.hpp"

namespace critpoint {

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool passed = true;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void note(Outcome& o, bool ok, const std::string& s) {
  o.passed = o.passed && ok;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += s;
  if (!ok) o.detail += " [FAIL]";
}

struct Context {
  Suite suite;
  std::uint64_t seed;
  unsigned threads;
  bool quick() const { return suite == Suite::quick; }
};

std::vector<double> ell_grid() {
  std::vector<double> g;
  for (int i = -120; i <= 120; ++i) g.push_back(0.05 * i);
  return g;
}

Outcome density_closed_forms(const Context&) {
  Outcome o;
  double gap = 0.0, norm_gap = 0.0;
  const auto grid = ell_grid();
  for (int N = 2; N <= 5; ++N) {
    for (double l : grid) {
      const auto q = ordered_eigen_densities(N, l);
      for (int k = 1; k <= N; ++k)
        gap = std::max(gap, std::abs(q[static_cast<std::size_t>(k - 1)] - closed_form_density(N, k, l)));
    }
    for (int k = 1; k <= N; ++k) {
      const double mass = integrate_1d([N, k](double l) { return ordered_eigen_density(N, k, l); },
                                       Interval{}, QuadOptions{1e-10, 0.0, 2000})
                              .value;
      norm_gap = std::max(norm_gap, std::abs(mass - 1.0));
    }
  }
  note(o, gap <= 1e-6, fmt("sup gap vs closed forms %.3g (<= 1e-6)", gap));
  note(o, norm_gap <= 1e-7, fmt("max |mass - 1| %.3g (<= 1e-7)", norm_gap));
  return o;
}

Outcome q32_half_normal(const Context&) {
  Outcome o;
  double gap = 0.0;
  for (double l : ell_grid())
    gap = std::max(gap, std::abs(ordered_eigen_density(3, 2, l) - std::exp(-l * l) / std::sqrt(kPi)));
  note(o, gap <= 1e-9, fmt("sup |q_3^2 - N(0,1/2) pdf| %.3g (<= 1e-9)", gap));
  return o;
}

Outcome ordered_sampling_ks(const Context& ctx) {
  Outcome o;
  const int n = ctx.quick() ? 20'000 : 100'000;
  const double critical = 1.6276 / std::sqrt(static_cast<double>(n));
  const double step = 0.01, lo = -8.0;
  const int cells = 1600;
  double worst = 0.0;
  std::string where;
  for (int N = 2; N <= 5; ++N) {
    // CDF table: cumulative Simpson on pairs of cells, linear inside.
    std::vector<std::vector<double>> pdf(static_cast<std::size_t>(N),
                                         std::vector<double>(cells + 1));
    parallel_for(cells + 1, ctx.threads, [&](std::size_t i) {
      const auto q = ordered_eigen_densities(N, lo + step * static_cast<double>(i));
      for (int k = 0; k < N; ++k) pdf[static_cast<std::size_t>(k)][i] = q[static_cast<std::size_t>(k)];
    });
    std::vector<std::vector<double>> cdf(static_cast<std::size_t>(N),
                                         std::vector<double>(cells + 1, 0.0));
    for (int k = 0; k < N; ++k) {
      auto& p = pdf[static_cast<std::size_t>(k)];
      auto& c = cdf[static_cast<std::size_t>(k)];
      for (int i = 2; i <= cells; i += 2) {
        c[static_cast<std::size_t>(i)] =
            c[static_cast<std::size_t>(i - 2)] +
            step / 3 * (p[static_cast<std::size_t>(i - 2)] + 4 * p[static_cast<std::size_t>(i - 1)] + p[static_cast<std::size_t>(i)]);
        c[static_cast<std::size_t>(i - 1)] =
            c[static_cast<std::size_t>(i - 2)] +
            step / 12 * (5 * p[static_cast<std::size_t>(i - 2)] + 8 * p[static_cast<std::size_t>(i - 1)] - p[static_cast<std::size_t>(i)]);
      }
    }
    std::vector<std::vector<double>> samples(static_cast<std::size_t>(N));
    auto rng = stream_rng(ctx.seed, 300 + static_cast<std::uint64_t>(N));
    for (int s = 0; s < n; ++s) {
      const auto spec = sample_goe_spectrum(N, rng);
      for (int k = 0; k < N; ++k) samples[static_cast<std::size_t>(k)].push_back(spec[static_cast<std::size_t>(k)]);
    }
    for (int k = 0; k < N; ++k) {
      auto& xs = samples[static_cast<std::size_t>(k)];
      std::sort(xs.begin(), xs.end());
      const auto& c = cdf[static_cast<std::size_t>(k)];
      auto F = [&](double x) {
        const double u = (x - lo) / step;
        if (u <= 0) return 0.0;
        if (u >= cells) return 1.0;
        const auto i = static_cast<std::size_t>(u);
        const double t = u - static_cast<double>(i);
        return c[i] + t * (c[i + 1] - c[i]);
      };
      double d = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = F(xs[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
      }
      if (d > worst) {
        worst = d;
        where = fmt("N=%d k=%d", N, k + 1);
      }
    }
  }
  note(o, worst < critical,
       fmt("max KS distance %.5f at %s, 1%% critical value %.5f (n=%d)", worst, where.c_str(),
           critical, n));
  return o;
}

Outcome fractions(const Context&) {
  Outcome o;
  const double r6 = std::sqrt(6.0);
  const std::map<int, std::vector<double>> targets = {
      {2, {0.25, 0.5, 0.25}},
      {3, {(29 - 6 * r6) / 116, (29 + 6 * r6) / 116, (29 + 6 * r6) / 116, (29 - 6 * r6) / 116}},
      {4, {0.060, 0.25, 0.380, 0.25, 0.060}},
  };
  for (const auto& [N, t] : targets) {
    const auto f = index_fractions(N);
    double gap = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) gap = std::max(gap, std::abs(f[k] - t[k]));
    std::string vals;
    for (double v : f) vals += fmt("%s%.4f", vals.empty() ? "" : ",", v);
    note(o, gap <= 5e-4, fmt("N=%d (%s) max gap %.2g", N, vals.c_str(), gap));
  }
  const double I = fraction_integral();
  const double inverted = (0.060 * 200 * kPi + 57) / (100 * kPi);
  note(o, std::abs(I - inverted) <= 2e-3,
       fmt("I quadrature %.6f vs inverted printed %.6f", I, inverted));
  return o;
}

Outcome gamma_constants(const Context& ctx) {
  Outcome o;
  const double g0 = gamma_const(0);
  note(o, g0 == 1.0, fmt("gamma_0 = %.17g", g0));
  const double g1 = gamma_const(1);
  note(o, std::abs(g1 - 4.0 / 3.0) <= 1e-8, fmt("gamma_1 quadrature %.12f", g1));

  const long long n = ctx.quick() ? 200'000 : 1'000'000;
  const int batches = 100;
  std::vector<double> sums(batches, 0.0), sq(batches, 0.0);
  parallel_for(batches, ctx.threads, [&](std::size_t b) {
    auto rng = stream_rng(ctx.seed, 500 + b);
    std::normal_distribution<double> z(0.0, 1.0);
    const double sd = std::sqrt(1.0 / 3.0);
    for (long long i = 0; i < n / batches; ++i) {
      const double d = z(rng) - sd * z(rng);
      sums[b] += d * d;
      sq[b] += d * d * d * d;
    }
  });
  double s = 0, s2 = 0;
  for (int b = 0; b < batches; ++b) {
    s += sums[static_cast<std::size_t>(b)];
    s2 += sq[static_cast<std::size_t>(b)];
  }
  const double total = static_cast<double>(n / batches * batches);
  const double mean = s / total;
  const double se = std::sqrt((s2 / total - mean * mean) / total);
  note(o, std::abs(mean - 4.0 / 3.0) <= 3 * se,
       fmt("gamma_1 Monte Carlo %.5f +- %.5f", mean, se));

  double gap = 0.0;
  for (int m = 0; m <= 4; ++m) {
    double sum = 0.0;
    for (int k = 0; k <= m; ++k) sum += gamma_const_indexed(m, k);
    gap = std::max(gap, std::abs(sum - gamma_const(m)));
  }
  note(o, gap <= 1e-7, fmt("max |sum_k gamma^k_n - gamma_n| over n<=4: %.3g", gap));
  return o;
}

Outcome conditional_convergence(const Context&) {
  Outcome o;
  const auto model = CovarianceModel::gaussian(1.0);
  const double rho = 1e-3;
  const double r2 = rho * rho;
  for (int N = 2; N <= 3; ++N) {
    const auto lim = small_rho_limits(model, N);
    const auto h = conditional_cov(model, N, rho);
    double worst = 0.0;
    std::string worst_name;
    auto check = [&](double got, const std::string& key) {
      const double want = lim.at(key);
      const double rel = std::abs(got / want - 1.0);
      if (rel > worst) {
        worst = rel;
        worst_name = key;
      }
    };
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        const double v1 = h.gamma1(i, j), v3 = h.gamma3(i, j);
        if (i == 0 && j == 0) {
          check(v1 / r2, "var_xi11/rho2");
          check(v3 / r2, "cross_xi11/rho2");
        } else if (i == 0 || j == 0) {
          check(v1 / r2, "cov_xi11_xijj/rho2");
          check(v3 / r2, "cross_xi11_xijj/rho2");
        } else if (i == j) {
          check(v1, "var_xijj");
          check(v3, "cross_xijj");
        } else {
          check(v1, "cov_xijj_xikk");
          check(v3, "cross_xijj_xikk");
        }
      }
    for (std::size_t p = 0; p < h.offdiag.size(); ++p) {
      const bool first = h.offdiag[p].first == 0;
      const auto e = static_cast<Eigen::Index>(p);
      check(first ? h.gamma2(e) / r2 : h.gamma2(e), first ? "var_xi1j/rho2" : "var_xijk");
      check(first ? h.gamma4(e) / r2 : h.gamma4(e), first ? "cross_xi1j/rho2" : "cross_xijk");
    }
    const double a = h.gamma1(0, 0), c = h.gamma3(0, 0);
    check((a - c) * (a + c) / std::pow(rho, 6), "det_xi11_pair/rho6");
    check(gradient_pair_determinant(model, N, rho) / std::pow(rho, 2 * N), "det_gradient/rho2N");
    note(o, worst <= 0.02,
         fmt("N=%d max rel error %.3g (%s) at rho=1e-3", N, worst, worst_name.c_str()));
  }
  double stray = 0.0;
  for (int N = 2; N <= 4; ++N) {
    const auto h = conditional_cov(model, N, 0.3);
    const Eigen::MatrixXd j = h.joint();
    const auto m = static_cast<Eigen::Index>(h.offdiag.size());
    const Eigen::Index block = N + m;
    // Entry (a, b) of one point block may be nonzero only when a, b are both diagonal
    // entries or are the same off-diagonal entry.
    for (Eigen::Index a = 0; a < 2 * block; ++a)
      for (Eigen::Index b = 0; b < 2 * block; ++b) {
        const Eigen::Index pa = a % block, pb = b % block;
        const bool allowed = (pa < N && pb < N) || (pa >= N && pa == pb);
        if (!allowed) stray = std::max(stray, std::abs(j(a, b)));
      }
  }
  note(o, stray == 0.0, fmt("declared-zero entries max |value| %.3g (N=2..4)", stray));
  return o;
}

CorrMcOptions mc_options(const Context& ctx) {
  CorrMcOptions opts;
  opts.samples = ctx.quick() ? 200'000 : 1'000'000;
  opts.seed = ctx.seed;
  opts.threads = ctx.threads;
  return opts;
}

Outcome one_dimensional_repulsion(const Context& ctx) {
  Outcome o;
  const auto model = CovarianceModel::gaussian(1.0);
  const double l2 = model.spectral_moment(1), l4 = model.spectral_moment(2),
               l6 = model.spectral_moment(3);
  const double coef = (l2 * l6 - l4 * l4) / (8 * kPi * std::sqrt(l4 * l2 * l2 * l2));
  auto opts = mc_options(ctx);
  for (double rho : {0.005, 0.01, 0.02}) {
    const auto e = corr_mc(model, 1, rho, opts);
    const double ratio = e.value / rho;
    note(o, std::abs(ratio / coef - 1.0) <= 0.10,
         fmt("rho=%.3g A/rho=%.4f (target %.4f)", rho, ratio, coef));
  }
  std::vector<CorrEstimate> minmin;
  for (double rho : {0.01, 0.02, 0.05, 0.1})
    minmin.push_back(corr_mc(model, 1, rho, opts, std::make_pair(0, 0)));
  const auto fit = exponent_fit(minmin);
  note(o, std::abs(fit.slope - 4.0) <= 0.3,
       fmt("min-min slope %.3f +- %.3f (4 +- 0.3)", fit.slope, fit.slope_error));
  return o;
}

const std::vector<double> kPairGrid = {0.02, 0.05, 0.1, 0.2};

Outcome neutrality_attraction(const Context& ctx) {
  Outcome o;
  const auto model = CovarianceModel::gaussian(1.0);
  const auto opts = mc_options(ctx);
  const double target = corr_asymptote_total(model, 2, 0.1);
  double worst = 0.0;
  std::string vals;
  for (double rho : kPairGrid) {
    const auto e = corr_mc(model, 2, rho, opts);
    worst = std::max(worst, std::abs(e.value / target - 1.0));
    vals += fmt("%s%.4f", vals.empty() ? "" : ",", e.value);
  }
  note(o, worst <= 0.10,
       fmt("N=2 A over rho in [0.02,0.2]: %s vs %.4f, max rel dev %.3f", vals.c_str(), target, worst));
  std::vector<CorrEstimate> three;
  for (double rho : kPairGrid) three.push_back(corr_mc(model, 3, rho, opts));
  const auto fit = exponent_fit(three);
  note(o, std::abs(fit.slope + 1.0) <= 0.15,
       fmt("N=3 slope %.3f +- %.3f (-1 +- 0.15)", fit.slope, fit.slope_error));
  return o;
}

Outcome repulsion_bounds(const Context& ctx) {
  Outcome o;
  const auto model = CovarianceModel::gaussian(1.0);
  const auto opts = mc_options(ctx);
  std::vector<CorrEstimate> minmax, maxmax;
  for (double rho : kPairGrid) {
    const auto t = corr_mc_table(model, 2, rho, opts);
    minmax.push_back(t.by_pair[0][2]);
    maxmax.push_back(t.by_pair[2][2]);
  }
  const auto f1 = exponent_fit(minmax);
  const auto f2 = exponent_fit(maxmax);
  note(o, f1.slope >= 2.5, fmt("min-max slope %.3f +- %.3f (>= 2.5)", f1.slope, f1.slope_error));
  note(o, f2.slope >= 2.5, fmt("max-max slope %.3f +- %.3f (>= 2.5)", f2.slope, f2.slope_error));
  return o;
}

void check_fractions(Outcome& o, const SimulationResult& sim, int N,
                     const std::vector<double>& expected) {
  std::vector<CriticalPointRecord> all;
  for (const auto& r : sim.realizations) all.insert(all.end(), r.begin(), r.end());
  const auto f = empirical_index_fractions(all, N);
  double worst = 0.0;
  std::string vals;
  for (int k = 0; k <= N; ++k) {
    const double p = expected[static_cast<std::size_t>(k)];
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(f.total));
    worst = std::max(worst, std::abs(f.fractions[static_cast<std::size_t>(k)] - p) / sigma);
    vals += fmt("%s%.4f", vals.empty() ? "" : ",", f.fractions[static_cast<std::size_t>(k)]);
  }
  note(o, worst <= 3.0,
       fmt("N=%d fractions (%s) from %lld points, max deviation %.2f sigma", N, vals.c_str(),
           f.total, worst));
}

Outcome field_cross_validation(const Context& ctx) {
  Outcome o;
  const auto model = CovarianceModel::gaussian(1.0);
  SimulationOptions s2;
  s2.N = 2;
  s2.side = 256;
  s2.spacing = 0.1;
  s2.realizations = ctx.quick() ? 10 : 40;
  s2.seed = ctx.seed;
  s2.threads = ctx.threads;
  const auto sim2 = simulate(model, s2);
  const double expected = mean_count_total_2d(model);
  note(o, std::abs(sim2.density / expected - 1.0) <= 0.05,
       fmt("N=2 density %.4f +- %.4f vs %.4f", sim2.density, sim2.density_error, expected));
  check_fractions(o, sim2, 2, {0.25, 0.5, 0.25});

  SimulationOptions s3 = s2;
  s3.N = 3;
  s3.side = 128;
  s3.realizations = ctx.quick() ? 2 : 8;
  const auto sim3 = simulate(model, s3);
  check_fractions(o, sim3, 3, reference_fractions(3));
  return o;
}

Outcome level_counts(const Context&) {
  Outcome o;
  const double l2 = 1.0;
  const auto regular = CovarianceModel::from_moments(l2, 4.0, 30.0, 300.0);
  const auto degenerate = CovarianceModel::gaussian(1.0);
  bool monotone = true;
  double limit_gap = 0.0;
  for (const auto* model : {&regular, &degenerate})
    for (int N = 1; N <= 3; ++N)
      for (int k = 0; k <= N; ++k) {
        double prev = kInf;
        for (double u = -6.0; u <= 6.0; u += 0.25) {
          const double v = mean_count_index_above(*model, N, k, u);
          if (v > prev * (1 + 1e-12) + 1e-15) monotone = false;
          prev = v;
        }
        const double full = mean_count_index(*model, N, k);
        const double low = mean_count_index_above(*model, N, k, -60.0);
        limit_gap = std::max(limit_gap, std::abs(low / full - 1.0));
      }
  note(o, monotone, "nonincreasing in u on [-6,6] for N=1..3, all k");
  note(o, limit_gap <= 1e-9, fmt("u -> -inf vs unrestricted count rel gap %.3g", limit_gap));

  const auto edge = CovarianceModel::from_moments(l2, 3 * l2 * l2, 30.0, 300.0);
  const auto near = CovarianceModel::from_moments(l2, 3 * l2 * l2 * (1 + 1e-8), 30.0, 300.0);
  double cont = 0.0;
  for (int N = 1; N <= 3; ++N)
    for (int k = 0; k <= N; ++k)
      for (double u : {-2.0, -0.5, 0.0, 0.7, 2.0}) {
        const double a = mean_count_index_above(edge, N, k, u);
        const double b = mean_count_index_above(near, N, k, u);
        cont = std::max(cont, std::abs(b / a - 1.0));
      }
  note(o, level_branch_degenerate(edge) && !level_branch_degenerate(near),
       "branch selection at lambda4 = 3 lambda2^2");
  note(o, cont <= 1e-6, fmt("degenerate vs regular branch rel gap %.3g", cont));
  return o;
}

struct Spec {
  const char* name;
  Outcome (*run)(const Context&);
  double limit_seconds;  // 0: no runtime bound
};

const Spec kCriteria[kCriterionCount] = {
    {"GOE ordered densities match closed forms", density_closed_forms, 120.0},
    {"q_3^2 is the N(0,1/2) density", q32_half_normal, 0.0},
    {"sampled ordered eigenvalues pass KS", ordered_sampling_ks, 300.0},
    {"index fractions", fractions, 0.0},
    {"gamma constants", gamma_constants, 0.0},
    {"conditional Hessian small-rho limits", conditional_convergence, 60.0},
    {"one-dimensional repulsion", one_dimensional_repulsion, 0.0},
    {"neutrality (N=2) and attraction (N=3)", neutrality_attraction, 600.0},
    {"repulsion exponents for min-max and max-max", repulsion_bounds, 0.0},
    {"simulated fields match counts and fractions", field_cross_validation, 900.0},
    {"level-restricted counts", level_counts, 0.0},
};

}  // namespace

Suite parse_suite(std::string_view name) {
  if (name == "full") return Suite::full;
  if (name == "quick") return Suite::quick;
  throw PreconditionError("unknown suite '" + std::string(name) + "' (expected full or quick)");
}

CriterionResult run_criterion(int id, Suite suite, std::uint64_t seed, unsigned threads) {
  if (id < 1 || id > kCriterionCount) throw PreconditionError("criterion id must be 1..11");
  const Spec& spec = kCriteria[id - 1];
  CriterionResult r;
  r.id = id;
  r.name = spec.name;
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = spec.run(Context{suite, seed, threads});
  } catch (const std::exception& e) {
    o.passed = false;
    o.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (spec.limit_seconds > 0) note(o, r.seconds < spec.limit_seconds,
                                   fmt("runtime %.1fs (< %.0fs)", r.seconds, spec.limit_seconds));
  r.passed = o.passed;
  r.detail = o.detail;
  return r;
}

std::vector<CriterionResult> run_acceptance(
    Suite suite, std::uint64_t seed, unsigned threads,
    const std::function<void(const CriterionResult&)>& on_result) {
  std::vector<CriterionResult> out;
  for (int id = 1; id <= kCriterionCount; ++id) {
    out.push_back(run_criterion(id, suite, seed, threads));
    if (on_result) on_result(out.back());
  }
  return out;
}

}  // namespace critpoint
