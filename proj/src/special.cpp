#include "critpoint/special.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "critpoint/errors.hpp"

namespace critpoint {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310005024157652848110452530069867406099;

double clamp_lo(double x) { return std::max(x, -kTruncation); }
double clamp_hi(double x) { return std::min(x, kTruncation); }

// x^{k-1} e^{-x^2/2}, zero at infinity.
double boundary_term(double x, int k) {
  if (std::isinf(x)) return 0.0;
  return std::pow(x, k - 1) * std::exp(-0.5 * x * x);
}

// GSL workspaces are reused per thread; nested integrations take successive slots.
struct WorkspacePool {
  struct Slot {
    gsl_integration_workspace* ws;
    std::size_t size;
  };
  std::vector<Slot> slots;
  std::size_t depth = 0;
  ~WorkspacePool() {
    for (auto& s : slots) gsl_integration_workspace_free(s.ws);
  }
};

thread_local WorkspacePool pool;

class WorkspaceLease {
 public:
  explicit WorkspaceLease(std::size_t limit) {
    if (pool.depth == pool.slots.size())
      pool.slots.push_back({gsl_integration_workspace_alloc(limit), limit});
    auto& slot = pool.slots[pool.depth++];
    if (slot.size < limit) {
      gsl_integration_workspace_free(slot.ws);
      slot = {gsl_integration_workspace_alloc(limit), limit};
    }
    ws_ = slot.ws;
  }
  ~WorkspaceLease() { --pool.depth; }
  WorkspaceLease(const WorkspaceLease&) = delete;
  WorkspaceLease& operator=(const WorkspaceLease&) = delete;
  gsl_integration_workspace* get() const { return ws_; }

 private:
  gsl_integration_workspace* ws_;
};

struct Trampoline {
  const std::function<double(double)>* f;
  std::exception_ptr error;
};

double call_trampoline(double x, void* p) {
  auto* t = static_cast<Trampoline*>(p);
  if (t->error) return 0.0;
  try {
    return (*t->f)(x);
  } catch (...) {
    t->error = std::current_exception();
    return 0.0;
  }
}

void disable_gsl_abort() {
  static std::once_flag once;
  std::call_once(once, [] { gsl_set_error_handler_off(); });
}

}  // namespace

double gaussian_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

double gaussian_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double gaussian_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

void gaussian_partial_moments(int kmax, Interval iv, double* out) {
  if (kmax < 0 || kmax > kMaxPartialMomentOrder)
    throw PreconditionError("partial moment order " + std::to_string(kmax) + " outside 0.." +
                            std::to_string(kMaxPartialMomentOrder));
  if (!(iv.lo <= iv.hi)) throw PreconditionError("partial moment interval has lo > hi");
  const double a = iv.lo;
  const double b = iv.hi;
  double m0;
  if (a >= 0.0)
    m0 = gaussian_sf(a) - gaussian_sf(b);
  else if (b <= 0.0)
    m0 = gaussian_cdf(b) - gaussian_cdf(a);
  else
    m0 = 1.0 - gaussian_cdf(a) - gaussian_sf(b);
  out[0] = kSqrt2Pi * m0;
  if (kmax == 0) return;
  out[1] = boundary_term(a, 1) - boundary_term(b, 1);
  for (int k = 2; k <= kmax; ++k)
    out[k] = boundary_term(a, k) - boundary_term(b, k) + (k - 1) * out[k - 2];
}

double gaussian_partial_moment(int k, Interval iv) {
  double m[kMaxPartialMomentOrder + 1];
  gaussian_partial_moments(k, iv, m);
  return m[k];
}

QuadResult integrate_1d(const std::function<double(double)>& f, Interval iv,
                        const QuadOptions& opts) {
  return integrate_1d(f, iv, std::span<const double>{}, opts);
}

QuadResult integrate_1d(const std::function<double(double)>& f, Interval iv,
                        std::span<const double> breakpoints, const QuadOptions& opts) {
  if (!(iv.lo <= iv.hi)) throw PreconditionError("integration interval has lo > hi");
  const double lo = clamp_lo(iv.lo);
  const double hi = clamp_hi(iv.hi);
  if (!(lo < hi)) return {};
  disable_gsl_abort();

  std::vector<double> pts{lo};
  for (double p : breakpoints)
    if (p > lo && p < hi) pts.push_back(p);
  std::sort(pts.begin() + 1, pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  pts.push_back(hi);

  const auto limit = static_cast<std::size_t>(std::max(opts.max_intervals, 8));
  WorkspaceLease ws(limit);
  Trampoline t{&f, nullptr};
  gsl_function gf{&call_trampoline, &t};
  QuadResult r;
  int status;
  if (pts.size() == 2) {
    status = gsl_integration_qag(&gf, lo, hi, opts.abs_tol, opts.rel_tol, limit,
                                 GSL_INTEG_GAUSS21, ws.get(), &r.value, &r.error);
  } else {
    status = gsl_integration_qagp(&gf, pts.data(), pts.size(), opts.abs_tol, opts.rel_tol, limit,
                                  ws.get(), &r.value, &r.error);
  }
  if (t.error) std::rethrow_exception(t.error);
  // Roundoff detection fires on smooth integrands evaluated to ~1e-13; accept the result
  // when the achieved error bound is still close to the request.
  if (status == GSL_EROUND &&
      r.error <= 1e3 * std::max(opts.abs_tol, opts.rel_tol * std::abs(r.value)))
    status = GSL_SUCCESS;
  if (status != GSL_SUCCESS || !std::isfinite(r.value))
    throw NumericalError(std::string("adaptive quadrature did not converge: ") +
                             gsl_strerror(status) + " (estimate " + std::to_string(r.value) +
                             ", error bound " + std::to_string(r.error) + ")",
                         r.value, r.error);
  return r;
}

}  // namespace critpoint
