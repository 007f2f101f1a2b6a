#pragma once

#include <string>
#include <vector>

namespace kadapt {

struct CheckResult {
  std::string id;     // "A1".."A16" for acceptance criteria, "P..." for properties
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs the sixteen acceptance criteria at their stated tolerances.
std::vector<CheckResult> run_acceptance(unsigned threads = 0);

/// Runs the per-module invariant and property checks.
std::vector<CheckResult> run_property_checks(unsigned threads = 0);

/// "PASS A1 title: detail (0.12 s)".
std::string format_check(const CheckResult& result);

}  // namespace kadapt
