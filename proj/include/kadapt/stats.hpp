#pragma once

#include <span>

namespace kadapt::stats {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares y ≈ intercept + slope·x.
LinearFit ols(std::span<const double> x, std::span<const double> y);

/// Slope of log y against log x.
double power_law_exponent(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> values);

/// Spearman rank correlation (average ranks for ties).
double rank_correlation(std::span<const double> x, std::span<const double> y);

/// z such that P(|Z| ≤ z) = mass for a standard normal Z.
double central_interval_z(double mass);

}  // namespace kadapt::stats
