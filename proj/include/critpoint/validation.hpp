#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace critpoint {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// quick: reduced Monte Carlo and simulation budgets, same tolerances.
enum class Suite { full, quick };

Suite parse_suite(std::string_view name);

inline constexpr int kCriterionCount = 11;

// Runs one acceptance criterion (1..11). Exceptions are reported as failures.
CriterionResult run_criterion(int id, Suite suite, std::uint64_t seed, unsigned threads);

// Runs all criteria in order; on_result is called as each one finishes.
std::vector<CriterionResult> run_acceptance(
    Suite suite, std::uint64_t seed, unsigned threads,
    const std::function<void(const CriterionResult&)>& on_result = {});

}  // namespace critpoint
