#include "kadapt/adaptation_subspace.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <random>

#include "kadapt/rng.hpp"

namespace kadapt {

AdaptationSubspace::AdaptationSubspace(Vector base_params, Matrix embedding)
    : base_params_(std::move(base_params)), embedding_(std::move(embedding)) {
  require_same(embedding_.rows(), base_params_.size(), "embedding rows vs base params");
  if (embedding_.cols() < 1 || embedding_.cols() >= embedding_.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "adaptation subspace needs 0 < d < D");
  }
  if (!base_params_.allFinite() || !embedding_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "subspace has non-finite entries");
  }
}

Vector AdaptationSubspace::params(const Vector& state) const {
  require_same(state.size(), latent_dim(), "latent state dimension");
  return base_params_ + embedding_ * state;
}

double AdaptationSubspace::min_singular_value() const {
  const Eigen::JacobiSVD<Matrix> svd(embedding_);
  return svd.singularValues().minCoeff();
}

void AdaptationSubspace::require_full_rank() const {
  if (!(min_singular_value() > 1e-8)) {
    throw Error(ErrorCode::kInvalidArgument, "embedding columns are not linearly independent");
  }
}

ToyTokenModel::ToyTokenModel(ToyModelShape shape, Matrix embeddings, Matrix mixing, Vector bias)
    : shape_(shape),
      embeddings_(std::move(embeddings)),
      mixing_(std::move(mixing)),
      bias_(std::move(bias)) {}

ToyTokenModel ToyTokenModel::random(const ToyModelShape& shape, std::uint64_t seed) {
  if (shape.vocab_size < 2 || shape.feature_dim < 1 || shape.context_length < 1 ||
      shape.embedding_dim < 1) {
    throw Error(ErrorCode::kInvalidArgument, "toy model shape must be positive (V >= 2)");
  }
  Rng rng(seed, Stream::kModel);
  const Index input = shape.context_length * shape.embedding_dim;
  Matrix embeddings = rng.normal_matrix(shape.vocab_size, shape.embedding_dim);
  Matrix mixing = rng.normal_matrix(shape.feature_dim, input) / std::sqrt(static_cast<double>(input));
  Vector bias = 0.5 * rng.normal_vector(shape.feature_dim);
  return ToyTokenModel(shape, std::move(embeddings), std::move(mixing), std::move(bias));
}

Vector ToyTokenModel::features(std::span<const int> context) const {
  const Index c = shape_.context_length;
  const Index e = shape_.embedding_dim;
  Vector input(c * e);
  for (Index slot = 0; slot < c; ++slot) {
    // Slot c-1 is the most recent token; missing history pads with token 0.
    const Index back = c - 1 - slot;
    const Index pos = static_cast<Index>(context.size()) - 1 - back;
    const int token = pos >= 0 ? context[static_cast<std::size_t>(pos)] : 0;
    if (token < 0 || token >= shape_.vocab_size) {
      throw Error(ErrorCode::kInvalidArgument, "context token out of vocabulary");
    }
    input.segment(slot * e, e) = embeddings_.row(token).transpose();
  }
  return (mixing_ * input + bias_).array().tanh().matrix();
}

Vector ToyTokenModel::logits(const Vector& params, std::span<const int> context) const {
  require_same(params.size(), param_dim(), "parameter dimension");
  const Vector f = features(context);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      head(params.data(), shape_.vocab_size, shape_.feature_dim);
  return head * f;
}

Vector ToyTokenModel::probabilities(const Vector& params, std::span<const int> context) const {
  const Vector z = logits(params, context);
  const Vector ez = (z.array() - z.maxCoeff()).exp().matrix();
  return ez / ez.sum();
}

double token_nll(const ToyTokenModel& model, const Vector& params, std::span<const int> context,
                 int target) {
  if (target < 0 || target >= model.vocab_size()) {
    throw Error(ErrorCode::kInvalidArgument, "target token out of vocabulary");
  }
  const Vector z = model.logits(params, context);
  const double zmax = z.maxCoeff();
  const double lse = zmax + std::log((z.array() - zmax).exp().sum());
  return std::max(0.0, lse - z(target));
}

Vector token_gradient(const ToyTokenModel& model, const Vector& params,
                      std::span<const int> context, int target) {
  if (target < 0 || target >= model.vocab_size()) {
    throw Error(ErrorCode::kInvalidArgument, "target token out of vocabulary");
  }
  Vector residual = model.probabilities(params, context);
  residual(target) -= 1.0;
  const Vector f = model.features(context);
  const Index nf = model.feature_dim();
  Vector grad(model.param_dim());
  for (Index v = 0; v < model.vocab_size(); ++v) grad.segment(v * nf, nf) = residual(v) * f;
  return grad;
}

TokenObservation linearize_token(const ToyTokenModel& model, const AdaptationSubspace& subspace,
                                 const Vector& mean, const TokenEvent& event, double noise_var,
                                 const LinearizationOptions& options, std::size_t token_index) {
  if (!(noise_var > 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise_var must be positive");
  require_same(subspace.ambient_dim(), model.param_dim(), "subspace/model parameter dimension");
  const Vector& theta0 = subspace.base_params();

  TokenObservation obs;
  obs.noise_var = noise_var;
  obs.token_index = token_index;
  obs.raw_nll = token_nll(model, theta0, event.context, event.target);

  if (options.relinearize) {
    const Vector theta = subspace.params(mean);
    obs.op = (token_gradient(model, theta, event.context, event.target).transpose() *
              subspace.embedding());
    obs.predicted_nll = token_nll(model, theta, event.context, event.target);
  } else {
    obs.op = (token_gradient(model, theta0, event.context, event.target).transpose() *
              subspace.embedding());
    obs.predicted_nll = obs.raw_nll + obs.op.dot(mean);
  }

  const double level = options.rule == NllLevelRule::kSurrogate ? obs.predicted_nll - noise_var
                                                                  : options.fixed_level;
  obs.value = obs.op.dot(mean) + (level - obs.predicted_nll);
  return obs;
}

double mean_nll(const ToyTokenModel& model, const Vector& params,
                std::span<const TokenEvent> events) {
  if (events.empty()) return 0.0;
  double total = 0.0;
  for (const TokenEvent& e : events) total += token_nll(model, params, e.context, e.target);
  return total / static_cast<double>(events.size());
}

AdaptationRun ekf_adapt(const ToyTokenModel& model, const AdaptationSubspace& subspace,
                        const GaussianBelief& prior, std::span<const TokenEvent> demonstration,
                        std::span<const TokenEvent> heldout, double noise_var,
                        const Matrix& process_noise, const LinearizationOptions& options) {
  require_same(prior.dim(), subspace.latent_dim(), "prior/subspace dimension");
  subspace.require_full_rank();
  const Index d = subspace.latent_dim();
  const StateSpaceModel dynamics(Matrix::Identity(d, d), process_noise);

  AdaptationRun run;
  run.base_heldout_nll = mean_nll(model, subspace.base_params(), heldout);
  run.steps.reserve(demonstration.size());
  GaussianBelief current = prior;
  for (std::size_t t = 0; t < demonstration.size(); ++t) {
    try {
      TokenObservation obs =
          linearize_token(model, subspace, current.mean(), demonstration[t], noise_var, options, t);
      run.steps.push_back(update(predict(dynamics, current), obs.to_observation()));
      run.observations.push_back(std::move(obs));
    } catch (const Error& e) {
      throw StepError(t, e);
    }
    current = run.steps.back().posterior;
    run.heldout_nll.push_back(mean_nll(model, subspace.params(current.mean()), heldout));
  }
  return run;
}

GramianReport prompt_gramian(std::span<const TokenObservation> observations,
                             const StateSpaceModel& model, std::size_t length) {
  std::vector<Observation> converted;
  converted.reserve(observations.size());
  for (const TokenObservation& o : observations) converted.push_back(o.to_observation());
  return gramian(model, converted, 0, length);
}

std::vector<TokenEvent> sample_events(const ToyTokenModel& model, const Vector& params,
                                      std::vector<int>& history, std::size_t count,
                                      std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TokenEvent> events;
  events.reserve(count);
  const auto c = static_cast<std::size_t>(model.context_length());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t from = history.size() > c ? history.size() - c : 0;
    TokenEvent event;
    event.context.assign(history.begin() + static_cast<std::ptrdiff_t>(from), history.end());
    const Vector p = model.probabilities(params, event.context);
    // Inverse-CDF draw keeps sampling independent of library distribution internals.
    const double u = rng.uniform();
    double acc = 0.0;
    int token = static_cast<int>(model.vocab_size()) - 1;
    for (Index v = 0; v < p.size(); ++v) {
      acc += p(v);
      if (u < acc) {
        token = static_cast<int>(v);
        break;
      }
    }
    event.target = token;
    history.push_back(token);
    events.push_back(std::move(event));
  }
  return events;
}

ToyTask make_toy_task(const ToyTaskConfig& config, std::uint64_t seed) {
  if (config.latent_dim < 1) throw Error(ErrorCode::kInvalidArgument, "latent_dim must be >= 1");
  ToyTokenModel model = ToyTokenModel::random(config.shape, seed);
  const Index big_d = model.param_dim();
  const Index d = config.latent_dim;

  Rng subspace_rng(seed, Stream::kSubspace);
  Vector theta0 = config.base_scale * subspace_rng.normal_vector(big_d);
  Matrix generating =
      subspace_rng.normal_matrix(big_d, d) / std::sqrt(static_cast<double>(model.feature_dim()));

  Rng truth_rng(seed, Stream::kTruth);
  Vector direction = truth_rng.normal_vector(d);
  direction.normalize();
  Vector true_state = config.shift * direction;
  Vector true_params = theta0 + generating * true_state;

  Matrix filter_basis = generating;
  if (config.orthogonal_subspace) {
    // Columns orthogonal to the true parameter shift, with the generating column scale.
    const Vector shift_dir = (generating * true_state).normalized();
    Matrix raw = subspace_rng.normal_matrix(big_d, d);
    raw -= shift_dir * (shift_dir.transpose() * raw);
    Matrix q = Eigen::HouseholderQR<Matrix>(raw).householderQ() * Matrix::Identity(big_d, d);
    q -= shift_dir * (shift_dir.transpose() * q);
    const double scale = generating.colwise().norm().mean();
    filter_basis = q * scale;
  }

  std::vector<int> history;
  auto demo = sample_events(model, true_params, history, config.demo_tokens,
                            derive_seed(seed, static_cast<std::uint64_t>(Stream::kTokens)));
  auto held = sample_events(model, true_params, history, config.heldout_tokens,
                            derive_seed(seed, static_cast<std::uint64_t>(Stream::kHeldout)));

  return ToyTask{std::move(model),
                 AdaptationSubspace(std::move(theta0), std::move(filter_basis)),
                 std::move(true_state),
                 std::move(direction),
                 std::move(true_params),
                 std::move(demo),
                 std::move(held)};
}

}  // namespace kadapt
