#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace asg {

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelfCheckReport {
  std::vector<CheckOutcome> checks;

  int passed() const;
  int failed() const;
};

/// Runs the built-in invariant battery on small seeded instances. When
/// `progress` is set it is called after each check.
SelfCheckReport run_selfcheck(std::uint64_t seed = 42,
                              const std::function<void(const CheckOutcome&)>& progress = {});

inline constexpr double kGradTolerance = 1e-4;

struct GradCheckSummary {
  std::string loss;
  int trials = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;

  bool passed() const { return max_rel_error < kGradTolerance; }
};

/// Checks weighted BCE, weighted IoU and Dice gradients against central
/// differences on `trials` random 4x4 instances each.
std::vector<GradCheckSummary> run_gradcheck(int trials, std::uint64_t seed = 42);

}  // namespace asg
