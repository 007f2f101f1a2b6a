#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kadapt/linear_filter.hpp"

namespace kadapt {

/// Finite-horizon observability Gramian W_{t,T} and its smallest eigenvalue α.
struct GramianReport {
  Matrix gramian;
  std::size_t window_start = 0;
  std::size_t window_length = 0;
  double min_eigenvalue = 0.0;
  Index rank = 0;
};

/// W = Σ_{k=t}^{t+T-1} (A^{k-t})ᵀ H_kᵀ R_k⁻¹ H_k A^{k-t}. Throws WindowTooShort.
GramianReport gramian(const StateSpaceModel& model, std::span<const Observation> observations,
                      std::size_t start, std::size_t length);

/// Gramians of every window [t, t+T) that fits, stepping t by `stride`.
std::vector<GramianReport> sliding_gramians(const StateSpaceModel& model,
                                            std::span<const Observation> observations,
                                            std::size_t length, std::size_t stride = 1);

/// Precision of the predicted prior entering each step, plus one entry
/// after the final posterior (n + 1 matrices for n steps).
std::vector<Matrix> prior_precisions(const StateSpaceModel& model,
                                     std::span<const FilterStep> trace);

struct WindowCheck {
  std::size_t window_start = 0;
  double slack = 0.0;  // λ_min of the checked difference; pass iff ≥ −tol
  double residual = 0.0;
  bool passed = false;
};

struct AccumulationReport {
  std::vector<WindowCheck> windows;
  bool all_passed = true;
};

/**
 * Checks (A^T)ᵀ Λ_{t+T} A^T ⪰ Λ_t + αI for every Gramian window, where Λ_j is
 * prior precision j. For A = I this is Λ_{t+T} ⪰ Λ_t + αI. `residual` is
 * ‖(A^T)ᵀ Λ_{t+T} A^T − Λ_t − W_{t,T}‖_F, zero in exact arithmetic when Q = 0.
 */
AccumulationReport check_information_accumulation(const StateSpaceModel& model,
                                                  std::span<const Matrix> precisions,
                                                  std::span<const GramianReport> gramians,
                                                  double tol = kLoewnerTolerance);

AccumulationReport check_information_accumulation(const StateSpaceModel& model,
                                                  std::span<const FilterStep> trace,
                                                  std::span<const GramianReport> gramians,
                                                  double tol = kLoewnerTolerance);

struct ContractionReport {
  std::vector<double> trace_series;              // tr(P_t), posteriors
  std::vector<double> precision_min_eig_series;  // λ_min(Λ_t)
  double fitted_rate = 1.0;                      // ρ per window
  double fit_constant = 1.0;                     // C relative to ‖P_0‖
  std::vector<WindowCheck> bound_checks;         // P_{t+T} ⪯ (Λ_t + αI)⁻¹
  bool bounds_passed = true;
};

/**
 * Fits log‖P_k‖₂ = log(C‖P_0‖) + ⌊k/T⌋ log ρ by least squares over the final
 * two thirds of the trace. When gramians are given, also checks the
 * covariance contraction bound per window (Q = 0 only).
 */
ContractionReport check_contraction(const StateSpaceModel& model,
                                    std::span<const FilterStep> trace, std::size_t window,
                                    std::span<const GramianReport> gramians = {},
                                    double tol = kLoewnerTolerance);

struct BoundednessReport {
  double sup_norm = 0.0;  // max ‖P_t‖₂ including P_0
  double first_half_sup = 0.0;
  double second_half_sup = 0.0;
  bool bounded = true;
  double initialization_gap = 0.0;  // max |P_n(P_0) − P_n(scale·P_0)|
  bool initialization_independent = false;
};

/// Runs the filter from P_0 and scale·P_0 and compares the final covariances.
BoundednessReport check_boundedness(const StateSpaceModel& model, const GaussianBelief& init,
                                    std::span<const Observation> observations,
                                    double init_scale = 100.0, double tol = 1e-6);

struct MseReport {
  std::vector<double> mean_sq_error;
  std::vector<double> mean_trace;
  std::vector<double> envelope;  // factor · (mean tr P_t + q-term)
  bool within_envelope = true;
  std::size_t first_violation = 0;
};

/**
 * Averages ‖μ_t − x*_t‖² and tr(P_t) over replicate runs. `q_term` is the
 * trace-equivalent of the process-noise contribution (tr Q).
 */
MseReport mse_vs_trace(std::span<const std::vector<FilterStep>> traces,
                       std::span<const std::vector<Vector>> truths, double q_term = 0.0,
                       double factor = 1.1);

}  // namespace kadapt
