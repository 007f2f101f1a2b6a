#include <gtest/gtest.h>

#include "kadapt/adaptation_subspace.hpp"
#include "kadapt/stats.hpp"
#include "oracles.hpp"

using namespace kadapt;

namespace {

Vector finite_difference(const ToyTokenModel& model, const Vector& params, std::span<const int> context,
                         int target, double h) {
  Vector fd(params.size());
  for (Index i = 0; i < params.size(); ++i) {
    Vector up = params, down = params;
    up(i) += h;
    down(i) -= h;
    fd(i) = (token_nll(model, up, context, target) - token_nll(model, down, context, target)) / (2 * h);
  }
  return fd;
}

GaussianBelief default_prior(Index d) { return GaussianBelief::isotropic(Vector::Zero(d), 2.0); }

AdaptationRun adapt(const ToyTask& task, const LinearizationOptions& options = {}) {
  const Index d = task.subspace.latent_dim();
  return ekf_adapt(task.model, task.subspace, default_prior(d), task.demonstration, task.heldout, 1.0,
                   Matrix::Zero(d, d), options);
}

}  // namespace

TEST(AdaptationSubspace, Validation) {
  EXPECT_THROW(AdaptationSubspace(Vector::Zero(4), Matrix::Zero(4, 4)), Error);
  EXPECT_THROW(AdaptationSubspace(Vector::Zero(4), Matrix::Zero(3, 2)), Error);
  const AdaptationSubspace s(Vector::Ones(4), Matrix::Identity(4, 2));
  EXPECT_EQ(s.params(Vector::Constant(2, 2.0)), (Vector(4) << 3, 3, 1, 1).finished());
  EXPECT_THROW(AdaptationSubspace(Vector::Zero(4), Matrix::Zero(4, 2)).require_full_rank(), Error);
}

TEST(ToyModel, SoftmaxNormalized) {
  const auto model = ToyTokenModel::random(ToyModelShape{}, 1);
  Rng rng(40);
  for (int i = 0; i < 50; ++i) {
    const Vector params = 2.0 * rng.normal_vector(model.param_dim());
    const std::vector<int> context{static_cast<int>(rng.index(16)), static_cast<int>(rng.index(16))};
    EXPECT_NEAR(model.probabilities(params, context).sum(), 1.0, 1e-12);
  }
}

TEST(ToyModel, DeterministicGivenSeed) {
  const auto a = ToyTokenModel::random(ToyModelShape{}, 7);
  const auto b = ToyTokenModel::random(ToyModelShape{}, 7);
  EXPECT_EQ(a.token_embeddings(), b.token_embeddings());
  EXPECT_EQ(a.mixing(), b.mixing());
  EXPECT_EQ(a.mixing_bias(), b.mixing_bias());
}

TEST(TokenNll, UniformLogits) {
  const auto model = ToyTokenModel::random(ToyModelShape{}, 2);
  const std::vector<int> context{1, 2};
  EXPECT_NEAR(token_nll(model, Vector::Zero(model.param_dim()), context, 5), std::log(16.0), 1e-12);
}

TEST(TokenNll, Saturation) {
  const auto model = ToyTokenModel::random(ToyModelShape{}, 3);
  const std::vector<int> context{4, 9};
  const Vector f = model.features(context);
  Vector params = Vector::Zero(model.param_dim());
  params.segment(3 * model.feature_dim(), model.feature_dim()) = 1e3 * f / f.squaredNorm();
  EXPECT_LT(token_nll(model, params, context, 3), 1e-12);
  EXPECT_LT(token_gradient(model, params, context, 3).norm(), 1e-12);
}

TEST(TokenNll, MatchesIndependentCrossEntropy) {
  Rng rng(41);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto model = ToyTokenModel::random(ToyModelShape{}, seed);
    const Vector params = rng.normal_vector(model.param_dim());
    const std::vector<int> context{static_cast<int>(rng.index(16)), static_cast<int>(rng.index(16))};
    const int target = static_cast<int>(rng.index(16));
    const double want = oracle::cross_entropy(model.logits(params, context), target);
    EXPECT_NEAR(token_nll(model, params, context, target), want, 1e-12);
  }
}

TEST(TokenGradient, MatchesFiniteDifferences) {
  Rng rng(42);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto model = ToyTokenModel::random(ToyModelShape{}, 100 + seed);
    const Vector params = rng.normal_vector(model.param_dim());
    const std::vector<int> context{static_cast<int>(rng.index(16)), static_cast<int>(rng.index(16))};
    const int target = static_cast<int>(rng.index(16));
    const Vector g = token_gradient(model, params, context, target);
    const Vector fd = finite_difference(model, params, context, target, 1e-6);
    EXPECT_LT((g - fd).lpNorm<Eigen::Infinity>() / g.lpNorm<Eigen::Infinity>(), 1e-4);
  }
}

TEST(TokenGradient, CoversOnlyHeadParameters) {
  const auto model = ToyTokenModel::random(ToyModelShape{}, 4);
  const std::vector<int> context{0, 1};
  EXPECT_EQ(token_gradient(model, Vector::Zero(model.param_dim()), context, 2).size(),
            model.vocab_size() * model.feature_dim());
}

TEST(LinearizeToken, ZeroEmbeddingIsUninformative) {
  const auto model = ToyTokenModel::random(ToyModelShape{}, 5);
  const AdaptationSubspace subspace(Vector::Zero(model.param_dim()), Matrix::Zero(model.param_dim(), 2));
  const auto obs = linearize_token(model, subspace, Vector::Zero(2), TokenEvent{{1, 2}, 3}, 1.0);
  EXPECT_EQ(obs.op.norm(), 0.0);
}

TEST(LinearizeToken, MatchesDirectionalDerivative) {
  ToyTaskConfig config;
  config.latent_dim = 1;
  const ToyTask task = make_toy_task(config, 6);
  for (const auto& event : task.demonstration) {
    const auto obs = linearize_token(task.model, task.subspace, Vector::Zero(1), event, 1.0);
    const Vector dir = task.subspace.embedding().col(0);
    const double h = 1e-6;
    const Vector base = task.subspace.base_params();
    const double fd = (token_nll(task.model, base + h * dir, event.context, event.target) -
                       token_nll(task.model, base - h * dir, event.context, event.target)) /
                      (2 * h);
    EXPECT_NEAR(obs.op(0), fd, 1e-6 * std::max(1.0, std::abs(fd)));
    EXPECT_GT(std::abs(obs.op(0)), 0.0);
  }
}

TEST(LinearizeToken, RelinearizationChangesOperator) {
  const ToyTask task = make_toy_task(ToyTaskConfig{}, 7);
  const auto& event = task.demonstration.front();
  const auto a = linearize_token(task.model, task.subspace, Vector::Zero(2), event, 1.0);
  const auto b = linearize_token(task.model, task.subspace, Vector::Constant(2, 1.5), event, 1.0);
  EXPECT_GT((a.op - b.op).norm(), 1e-6);

  LinearizationOptions frozen;
  frozen.relinearize = false;
  const auto c = linearize_token(task.model, task.subspace, Vector::Constant(2, 1.5), event, 1.0, frozen);
  EXPECT_EQ(a.op, c.op);
}

TEST(LinearizeToken, SurrogateInnovationIsMinusNoise) {
  const ToyTask task = make_toy_task(ToyTaskConfig{}, 8);
  const Vector mean = Vector::Constant(2, 0.3);
  const auto obs = linearize_token(task.model, task.subspace, mean, task.demonstration[0], 0.7);
  EXPECT_NEAR(obs.value - obs.op.dot(mean), -0.7, 1e-12);
}

TEST(EkfAdapt, NullTaskStaysNearZero) {
  ToyTaskConfig config;
  config.shift = 0.0;
  const ToyTask task = make_toy_task(config, 9);
  const auto run = adapt(task);
  EXPECT_LT(run.steps.back().posterior.mean().norm(), 1.0);
  EXPECT_LT(run.steps.back().posterior.covariance().trace(), 0.5 * default_prior(2).covariance().trace());
}

TEST(EkfAdapt, ContractsAndImprovesHeldout) {
  const ToyTask task = make_toy_task(ToyTaskConfig{}, 10);
  const Vector base = task.subspace.base_params();
  const Matrix embeddings = task.model.token_embeddings();
  const auto run = adapt(task);
  EXPECT_LT(run.steps.back().posterior.covariance().trace(), 0.1 * default_prior(2).covariance().trace());
  EXPECT_LT(run.heldout_nll.back(), run.base_heldout_nll);
  EXPECT_LT(run.steps[29].gain.norm(), run.steps[2].gain.norm());
  EXPECT_TRUE((task.subspace.base_params().array() == base.array()).all());
  EXPECT_TRUE((task.model.token_embeddings().array() == embeddings.array()).all());
}

TEST(EkfAdapt, GainMonotoneOverSecondHalf) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto run = adapt(make_toy_task(ToyTaskConfig{}, seed));
    std::size_t rises = 0;
    for (std::size_t t = run.steps.size() / 2 + 1; t < run.steps.size(); ++t) {
      if (run.steps[t].gain.norm() > run.steps[t - 1].gain.norm()) ++rises;
    }
    EXPECT_EQ(rises, 0u) << "seed " << seed;
  }
}

TEST(EkfAdapt, GainMonotoneForFixedOperator) {
  const ToyTask task = make_toy_task(ToyTaskConfig{}, 14);
  std::vector<TokenEvent> prompt;
  for (std::size_t i = 0; i < 32; ++i) prompt.push_back(task.demonstration[i % 2]);
  LinearizationOptions frozen;
  frozen.relinearize = false;
  const auto run = ekf_adapt(task.model, task.subspace, default_prior(2), prompt, task.heldout, 1.0,
                             Matrix::Zero(2, 2), frozen);
  for (std::size_t t = 3; t < run.steps.size(); t += 2) {
    EXPECT_LT(run.steps[t].gain.norm(), run.steps[t - 2].gain.norm()) << "token " << t;
  }
}

TEST(PromptGramian, RepeatedTokenRankOne) {
  const ToyTask task = make_toy_task(ToyTaskConfig{}, 11);
  const TokenEvent event = task.demonstration.front();
  std::vector<TokenObservation> obs;
  for (int i = 0; i < 6; ++i) obs.push_back(linearize_token(task.model, task.subspace, Vector::Zero(2), event, 1.0));
  EXPECT_EQ(prompt_gramian(obs, StateSpaceModel::random_walk(2), 6).rank, 1);
}

TEST(PromptGramian, SpanningPromptHasPositiveAlpha) {
  const ToyTask task = make_toy_task(ToyTaskConfig{}, 12);
  const auto run = adapt(task);
  const auto g = prompt_gramian(run.observations, StateSpaceModel::random_walk(2), 8);
  EXPECT_GT(g.min_eigenvalue, 0.0);
  EXPECT_EQ(g.rank, 2);
  EXPECT_THROW(prompt_gramian(run.observations, StateSpaceModel::random_walk(2), 100), Error);
}

TEST(PromptGramian, InformativenessTracksImprovement) {
  // Ten random prompts per task; averaged over tasks so one draw cannot decide.
  constexpr std::size_t kLength = 8;
  double total = 0.0;
  for (std::uint64_t task_seed = 0; task_seed < 20; ++task_seed) {
    const ToyTask task = make_toy_task(ToyTaskConfig{}, task_seed);
    std::vector<double> alpha, improvement;
    for (std::uint64_t p = 0; p < 10; ++p) {
      std::vector<int> history;
      const auto prompt = sample_events(task.model, task.true_params, history, kLength, 5000 + 100 * task_seed + p);
      const auto run = ekf_adapt(task.model, task.subspace, default_prior(2), prompt, task.heldout, 1.0,
                                 Matrix::Zero(2, 2));
      alpha.push_back(prompt_gramian(run.observations, StateSpaceModel::random_walk(2), kLength).min_eigenvalue);
      improvement.push_back(run.base_heldout_nll - run.heldout_nll.back());
    }
    total += stats::rank_correlation(alpha, improvement);
  }
  EXPECT_GT(total / 20.0, 0.0);
}

TEST(ToyTask, OrthogonalSubspaceMissesShift) {
  ToyTaskConfig config;
  config.orthogonal_subspace = true;
  const ToyTask task = make_toy_task(config, 13);
  const Vector shift = task.true_params - task.subspace.base_params();
  EXPECT_LT((task.subspace.embedding().transpose() * shift).norm(), 1e-10 * shift.norm());
}
