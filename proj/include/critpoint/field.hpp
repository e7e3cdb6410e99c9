#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "critpoint/covariance.hpp"

namespace critpoint {

// Periodic grid, values row-major with the last axis fastest. Point i sits at i * spacing.
struct FieldGrid {
  int N = 0;
  int side = 0;
  double spacing = 0.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double length() const { return side * spacing; }
  double volume() const;
};

// Stationary Gaussian field with covariance r(|s-t|^2) by circulant embedding.
// Throws PreconditionError when r(L^2/4) >= 1e-8 (domain too small for the kernel) and
// NumericalError when negative spectral mass exceeds 1e-6 of the total.
FieldGrid synthesize(const CovarianceModel& model, int N, int side, double spacing,
                     std::uint64_t seed);

// Samples f on the grid, e.g. deterministic test surfaces.
FieldGrid grid_from_function(int N, int side, double spacing,
                             const std::function<double(std::span<const double>)>& f);

struct CriticalPointRecord {
  std::vector<double> location;
  double value = 0.0;
  int index = 0;
  std::vector<double> hessian_eigs;  // ascending
  double gradient_norm = 0.0;
};

struct DetectionStats {
  long long candidates = 0;
  long long newton_failures = 0;
  long long degenerate = 0;  // Hessian eigenvalue below 1e-8 |H|
  long long duplicates = 0;
};

struct Detection {
  std::vector<CriticalPointRecord> points;
  DetectionStats stats;
};

inline constexpr double kGradientTolerance = 1e-8;

// Periodic quintic B-spline interpolant of a grid.
class SplineField {
 public:
  explicit SplineField(const FieldGrid& grid);

  int dim() const { return N_; }
  double value(std::span<const double> x) const;
  // Value, gradient (N) and Hessian (N*N, row-major) at x.
  void evaluate(std::span<const double> x, double& value, std::span<double> grad,
                std::span<double> hess) const;

 private:
  int N_;
  int side_;
  double spacing_;
  std::vector<double> coef_;
};

Detection detect_critical_points(const FieldGrid& grid);

struct IndexFractions {
  int N = 0;
  long long total = 0;
  std::vector<long long> counts;
  std::vector<double> fractions;
  std::vector<double> lower, upper;  // Wilson score interval
};

// Needs at least min_records records.
IndexFractions empirical_index_fractions(std::span<const CriticalPointRecord> records, int N,
                                         double z = 1.96, long long min_records = 1000);

struct PairBin {
  double lo = 0.0, hi = 0.0;
  long long pairs = 0;
  double a = 0.0, a_error = 0.0;  // second-order density A
  double g = 0.0, g_error = 0.0;  // A / intensity^2
  bool empty = true;
};

// Ordered pairs at toroidal distance in each bin, averaged over realizations. With
// index_pair, only pairs (first of index i1, second of index i2) are counted; g is then
// normalized by the product of the two index intensities.
std::vector<PairBin> empirical_pair_correlation(
    std::span<const std::vector<CriticalPointRecord>> realizations, int N, double length,
    std::span<const double> edges, std::optional<std::pair<int, int>> index_pair = std::nullopt);

struct SimulationOptions {
  int N = 2;
  int side = 256;
  double spacing = 0.1;
  int realizations = 8;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct SimulationResult {
  std::vector<std::vector<CriticalPointRecord>> realizations;
  DetectionStats stats;
  double volume = 0.0;  // per realization
  double density = 0.0;
  double density_error = 0.0;
  std::vector<std::string> warnings;
};

// Synthesis seed of realization i under a base seed.
std::uint64_t realization_seed(std::uint64_t seed, std::size_t i);

// Realization i uses realization_seed(seed, i); results do not depend on the thread count.
SimulationResult simulate(const CovarianceModel& model, const SimulationOptions& opts);

// Snapshot: "CPLB", uint32 version (1), uint32 N, uint32 side, float64 spacing, then
// side^N float64 values, row-major, little-endian.
void write_snapshot(const FieldGrid& grid, std::ostream& out);
FieldGrid read_snapshot(std::istream& in);

}  // namespace critpoint
