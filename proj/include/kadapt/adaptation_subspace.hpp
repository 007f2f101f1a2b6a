#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kadapt/linear_filter.hpp"
#include "kadapt/observability.hpp"

namespace kadapt {

/// θ = θ_0 + B x with B ∈ ℝ^{D×d}, d < D.
class AdaptationSubspace {
 public:
  AdaptationSubspace(Vector base_params, Matrix embedding);

  const Vector& base_params() const noexcept { return base_params_; }
  const Matrix& embedding() const noexcept { return embedding_; }
  Index latent_dim() const noexcept { return embedding_.cols(); }
  Index ambient_dim() const noexcept { return embedding_.rows(); }

  Vector params(const Vector& state) const;
  double min_singular_value() const;
  /// Throws unless the columns of B are linearly independent (σ_min > 1e-8).
  void require_full_rank() const;

 private:
  Vector base_params_;
  Matrix embedding_;
};

struct ToyModelShape {
  Index vocab_size = 16;
  Index feature_dim = 4;
  Index context_length = 2;
  Index embedding_dim = 8;
};

/// A target token and the tokens preceding it (most recent last).
struct TokenEvent {
  std::vector<int> context;
  int target = 0;
};

/**
 * Frozen toy autoregressive model. A seeded random token embedding and a
 * tanh mixing layer map the last `context_length` tokens to features f;
 * logits are Θ f with Θ = reshape(θ) ∈ ℝ^{V×F} (row-major, θ[v·F + j]).
 * Only the head is parameterized by θ, so the extractor has no gradient.
 */
class ToyTokenModel {
 public:
  static ToyTokenModel random(const ToyModelShape& shape, std::uint64_t seed);

  Index vocab_size() const noexcept { return shape_.vocab_size; }
  Index feature_dim() const noexcept { return shape_.feature_dim; }
  Index context_length() const noexcept { return shape_.context_length; }
  Index param_dim() const noexcept { return shape_.vocab_size * shape_.feature_dim; }
  const ToyModelShape& shape() const noexcept { return shape_; }

  const Matrix& token_embeddings() const noexcept { return embeddings_; }
  const Matrix& mixing() const noexcept { return mixing_; }
  const Vector& mixing_bias() const noexcept { return bias_; }

  Vector features(std::span<const int> context) const;
  Vector logits(const Vector& params, std::span<const int> context) const;
  Vector probabilities(const Vector& params, std::span<const int> context) const;

 private:
  ToyTokenModel(ToyModelShape shape, Matrix embeddings, Matrix mixing, Vector bias);

  ToyModelShape shape_;
  Matrix embeddings_;  // V × E
  Matrix mixing_;      // F × (C·E)
  Vector bias_;        // F
};

/// ℓ = −log softmax(logits)[target].
double token_nll(const ToyTokenModel& model, const Vector& params, std::span<const int> context,
                 int target);

/// ∇_θ ℓ = (p − e_target) ⊗ f, laid out like θ.
Vector token_gradient(const ToyTokenModel& model, const Vector& params,
                      std::span<const int> context, int target);

/// How the pseudo-measured nll level of a token is chosen.
enum class NllLevelRule {
  /// z = ℓ(μ) − R: the update becomes the Fisher/Laplace step on the token likelihood.
  kSurrogate,
  /// z = fixed level (e.g. 0, "predict the token with certainty").
  kFixed,
};

struct LinearizationOptions {
  NllLevelRule rule = NllLevelRule::kSurrogate;
  double fixed_level = 0.0;
  bool relinearize = true;  // EKF: evaluate at θ_0 + Bμ; otherwise at θ_0
};

/// Scalar token observation y = H x + v with H = ∇_θℓᵀ B.
struct TokenObservation {
  RowVector op;
  double value = 0.0;
  double noise_var = 1.0;
  double raw_nll = 0.0;        // ℓ at θ_0
  double predicted_nll = 0.0;  // model prediction of ℓ at the linearization mean
  std::size_t token_index = 0;

  Observation to_observation() const { return Observation::scalar(op, noise_var, value); }
};

/**
 * Linearizes token `event` around `mean`. The observation value is
 * Hμ + (z − ℓ̂(μ)), so the innovation against prior mean μ is the nll
 * residual z − ℓ̂(μ) with z chosen by `options.rule`.
 */
TokenObservation linearize_token(const ToyTokenModel& model, const AdaptationSubspace& subspace,
                                 const Vector& mean, const TokenEvent& event, double noise_var,
                                 const LinearizationOptions& options = {},
                                 std::size_t token_index = 0);

double mean_nll(const ToyTokenModel& model, const Vector& params,
                std::span<const TokenEvent> events);

struct AdaptationRun {
  std::vector<FilterStep> steps;
  std::vector<TokenObservation> observations;
  std::vector<double> heldout_nll;  // after each demonstration token
  double base_heldout_nll = 0.0;    // at θ_0
};

/**
 * Extended-Kalman adaptation: per demonstration token, linearize at the
 * current mean, predict with A = I and `process_noise`, update. θ_0 and the
 * model are read-only; the adapted parameters exist only as θ_0 + Bμ_t.
 */
AdaptationRun ekf_adapt(const ToyTokenModel& model, const AdaptationSubspace& subspace,
                        const GaussianBelief& prior, std::span<const TokenEvent> demonstration,
                        std::span<const TokenEvent> heldout, double noise_var,
                        const Matrix& process_noise, const LinearizationOptions& options = {});

/// Observability Gramian of the first `length` token observations.
GramianReport prompt_gramian(std::span<const TokenObservation> observations,
                             const StateSpaceModel& model, std::size_t length);

struct ToyTaskConfig {
  ToyModelShape shape;
  Index latent_dim = 2;
  double shift = 3.0;
  double base_scale = 0.5;
  std::size_t demo_tokens = 32;
  std::size_t heldout_tokens = 64;
  bool orthogonal_subspace = false;
};

/// A generated task: data come from θ_0 + B_gen·x*; the filter gets `subspace`,
/// which is B_gen or, if requested, a basis orthogonal to the true shift B_gen·x*.
struct ToyTask {
  ToyTokenModel model;
  AdaptationSubspace subspace;
  Vector true_state;      // x* = shift · direction
  Vector true_direction;  // unit
  Vector true_params;
  std::vector<TokenEvent> demonstration;
  std::vector<TokenEvent> heldout;
};

ToyTask make_toy_task(const ToyTaskConfig& config, std::uint64_t seed);

/// Samples `count` events autoregressively from `params`, continuing `history`.
std::vector<TokenEvent> sample_events(const ToyTokenModel& model, const Vector& params,
                                      std::vector<int>& history, std::size_t count,
                                      std::uint64_t seed);

}  // namespace kadapt
