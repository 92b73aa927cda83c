#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dgflow {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  /// Measured values behind the verdict, one line.
  std::string detail;
  double runtime = 0.0;  // seconds
};

inline constexpr int acceptance_criteria = 8;

/// Runs criterion 1..8. Throws InvalidArgument for other ids.
CriterionResult run_criterion(int id, std::ostream* log = nullptr);

/// Runs the given criteria (all when empty) and prints one PASS/FAIL line each to out.
std::vector<CriterionResult> run_acceptance(std::ostream& out, const std::vector<int>& ids = {},
                                            std::ostream* log = nullptr);

}  // namespace dgflow
