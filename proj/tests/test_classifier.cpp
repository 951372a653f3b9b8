#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace mixsel;
using testutil::obs;

namespace {

// One cell, Sigma given, group means and P(U=1 | Z=l) set by hand.
LocationModelFit hand_fit(const std::vector<Eigen::VectorXd>& means, const Eigen::MatrixXd& sigma,
                          const std::vector<double>& p_cell, const std::vector<double>& beta) {
  LocationModelFit f;
  f.p = static_cast<int>(sigma.rows());
  f.q = static_cast<int>(means.size());
  f.M = 1;
  f.mu = means;
  f.defined.assign(means.size(), true);
  f.sigma = sigma;
  f.p_ml.resize(1, f.q);
  f.beta.resize(f.q);
  for (int l = 0; l < f.q; ++l) {
    f.p_ml(0, l) = p_cell[l];
    f.beta(l) = beta[l];
  }
  return f;
}

const CellIndex first_cell(1);

}  // namespace

TEST(TwoGroup, MidpointGoesToFirstGroup) {
  const auto fit = hand_fit({Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0)}, Eigen::Matrix2d::Identity(), {1, 1},
                            {0.5, 0.5});
  const ClassifierModel model(fit, VariableSet{0, 1});
  EXPECT_EQ(model.classify_two_group(Eigen::Vector2d(0, 0), first_cell), 1);
  EXPECT_EQ(model.classify_two_group(Eigen::Vector2d(0, 5), first_cell), 1);
  EXPECT_EQ(model.classify_two_group(Eigen::Vector2d(-1e-9, 0), first_cell), 2);
}

TEST(TwoGroup, SignOfLinearScore) {
  const auto fit = hand_fit({Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0)}, Eigen::Matrix2d::Identity(), {0.5, 0.5},
                            {0.5, 0.5});
  const ClassifierModel model(fit, VariableSet{0, 1});
  EXPECT_EQ(model.classify_two_group(Eigen::Vector2d(3, 0), first_cell), 1);
  EXPECT_EQ(model.classify_two_group(Eigen::Vector2d(-3, 0), first_cell), 2);
}

TEST(TwoGroup, CellProbabilityRatioShiftsThreshold) {
  // score = (2, 0) . (0.5, 0) = 1 < log(e^2) = 2
  const double e2 = std::exp(2.0);
  const auto fit = hand_fit({Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0)}, Eigen::Matrix2d::Identity(),
                            {1 / (1 + e2), e2 / (1 + e2)}, {0.5, 0.5});
  const ClassifierModel model(fit, VariableSet{0, 1});
  EXPECT_EQ(model.classify_two_group(Eigen::Vector2d(0.5, 0), first_cell), 2);
  EXPECT_EQ(model.classify_two_group(Eigen::Vector2d(1.01, 0), first_cell), 1);
  // a cost ratio of e^-2 cancels the cell ratio
  const ClassifierModel cheap(fit, VariableSet{0, 1}, std::exp(-2.0));
  EXPECT_EQ(cheap.classify_two_group(Eigen::Vector2d(0.5, 0), first_cell), 1);
}

TEST(TwoGroup, EqualsFisherSignOnRandomInputs) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::MatrixXd S = testutil::random_spd(rng, 3);
    Eigen::VectorXd a(3), b(3), x(3);
    for (int j = 0; j < 3; ++j) {
      a(j) = normal(rng);
      b(j) = normal(rng);
      x(j) = normal(rng);
    }
    const ClassifierModel model(hand_fit({a, b}, S, {0.3, 0.3}, {0.5, 0.5}), VariableSet::full(3));
    const double fisher = (a - b).dot(S.ldlt().solve(x - 0.5 * (a + b)));
    EXPECT_EQ(model.classify_two_group(x, first_cell), fisher >= 0 ? 1 : 2);
  }
}

TEST(MultiGroup, AgreesWithTwoGroupRuleAtPriorRatio) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ExperimentSpec spec = reference_experiment(60);
    spec.n_train = {40, 80};
    spec.n_test = {500, 500};
    spec.seed = seed;
    const SamplePair pair = generate_dataset(spec, 0);
    const auto fit = fit_location_model(summarize(pair.train));
    const ClassifierModel multi(fit, VariableSet{1, 2, 4});
    const ClassifierModel two(fit, VariableSet{1, 2, 4}, fit.beta(1) / fit.beta(0));
    int agree = 0;
    for (int i = 0; i < pair.test.size(); ++i) {
      const CellIndex cell(pair.test.cell(i) + 1);
      agree += multi.classify_multi_group(pair.test[i].x, cell) == two.classify_two_group(pair.test[i].x, cell);
    }
    EXPECT_EQ(agree, pair.test.size());
  }
}

TEST(MultiGroup, IdenticalGroupsTieToFirst) {
  const Eigen::Vector2d mu(1, 2);
  const ClassifierModel model(hand_fit({mu, mu, mu}, Eigen::Matrix2d::Identity(), {0.5, 0.5, 0.5}, {1, 1, 1}),
                              VariableSet{0, 1});
  EXPECT_EQ(model.classify(Eigen::Vector2d(4, -3), first_cell), 1);
}

TEST(MultiGroup, NearestMeanWithIdentityCovariance) {
  const ClassifierModel model(hand_fit({Eigen::Vector2d(0, 0), Eigen::Vector2d(3, 0), Eigen::Vector2d(0, 3)},
                                       Eigen::Matrix2d::Identity(), {0.4, 0.4, 0.4}, {1.0 / 3, 1.0 / 3, 1.0 / 3}),
                              VariableSet{0, 1});
  EXPECT_EQ(model.classify(Eigen::Vector2d(3, 0), first_cell), 2);
  EXPECT_EQ(model.classify(Eigen::Vector2d(0.2, 2.5), first_cell), 3);
  EXPECT_EQ(model.classify(Eigen::Vector2d(-1, -1), first_cell), 1);
}

TEST(MultiGroup, InvariantUnderCommonPriorScaling) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  std::vector<Eigen::VectorXd> means;
  for (int l = 0; l < 3; ++l) means.push_back(Eigen::Vector2d(normal(rng), normal(rng)));
  const Eigen::MatrixXd S = testutil::random_spd(rng, 2);
  const ClassifierModel a(hand_fit(means, S, {0.2, 0.5, 0.3}, {0.2, 0.3, 0.5}), VariableSet{0, 1});
  const ClassifierModel b(hand_fit(means, S, {0.2, 0.5, 0.3}, {2, 3, 5}), VariableSet{0, 1});
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector2d x(2 * normal(rng), 2 * normal(rng));
    EXPECT_EQ(a.classify(x, first_cell), b.classify(x, first_cell));
  }
}

TEST(Classifier, UnusableCellRaisesUndefinedCell) {
  // group 2 never appears in cell 2
  Dataset ds(1, 1, 2,
             {obs({0.0}, {0}, 1), obs({0.5}, {0}, 1), obs({3.0}, {0}, 2), obs({3.4}, {0}, 2), obs({0.2}, {1}, 1),
              obs({0.1}, {1}, 1)});
  const auto model = fit_classifier(ds, VariableSet{0});
  EXPECT_NO_THROW(model.classify(Eigen::VectorXd::Constant(1, 1.0), CellIndex(1)));
  try {
    model.classify_two_group(Eigen::VectorXd::Constant(1, 1.0), CellIndex(2));
    FAIL();
  } catch (const UndefinedCell& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
  }
  // the multi-group rule drops the empty group instead
  EXPECT_EQ(model.classify_multi_group(Eigen::VectorXd::Constant(1, 9.0), CellIndex(2)), 1);
  // smoothing borrows group 2 from the neighbouring cell
  const auto smooth = fit_classifier(ds, VariableSet{0}, ClassifierOptions{0.3, 1.0});
  EXPECT_EQ(smooth.classify_two_group(Eigen::VectorXd::Constant(1, 3.2), CellIndex(2)), 2);

  const Dataset test(1, 1, 2, {obs({0.1}, {0}, 1), obs({3.1}, {0}, 2), obs({0.1}, {1}, 1)});
  const auto cap = classification_capacity(model, test);
  EXPECT_EQ(cap.total, 3);
  EXPECT_EQ(cap.correct, 2);
  EXPECT_EQ(cap.undefined, 1);
  EXPECT_DOUBLE_EQ(cap.cc, 2.0 / 3.0);
}

TEST(Classifier, DegenerateVarianceIsSingular) {
  Dataset ds(1, 1, 2, {obs({0.0}, {0}, 1), obs({0.0}, {0}, 1), obs({2.0}, {0}, 2), obs({2.0}, {0}, 2)});
  EXPECT_THROW(fit_classifier(ds, VariableSet{0}), SingularSubmatrix);
}

TEST(Classifier, FitRejectsEmptyGroupAndBadSets) {
  Dataset ds(1, 1, 3, {obs({0.0}, {0}, 1), obs({1.0}, {0}, 1), obs({2.0}, {0}, 2), obs({2.5}, {0}, 2)});
  EXPECT_THROW(fit_classifier(ds, VariableSet{0}), ValidationError);
  Dataset two(1, 1, 2, {obs({0.0}, {0}, 1), obs({1.0}, {0}, 1), obs({2.0}, {0}, 2), obs({2.5}, {0}, 2)});
  EXPECT_THROW(fit_classifier(two, VariableSet{}), ValidationError);
  EXPECT_THROW(fit_classifier(two, VariableSet{3}), ValidationError);
}

TEST(Classifier, FittedParametersOnGenerator) {
  ExperimentSpec spec = reference_experiment(1000);
  spec.seed = 21;
  const SamplePair pair = generate_dataset(spec, 0);
  const auto fit = fit_location_model(summarize(pair.train));
  EXPECT_DOUBLE_EQ(fit.beta(0), 0.5);
  EXPECT_DOUBLE_EQ(fit.beta(1), 0.5);
  for (int l = 0; l < 2; ++l) EXPECT_NEAR(fit.p_ml.col(l).sum(), 1.0, 1e-12);
  const VariableSet K{1, 2, 3, 4};
  const ClassifierModel model(fit, K);
  EXPECT_TRUE(model.sigma_K().isApprox(model.sigma_K().transpose()));
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(model.sigma_K()).eigenvalues().minCoeff(), 0.0);
  for (int l = 0; l < 2; ++l)
    for (int m = 0; m < 8; ++m) {
      ASSERT_TRUE(model.usable(l, m));
      const Eigen::VectorXd target = model.restrict(spec.group_means[l]);
      // about 125 draws per stratum, marginal variance 1
      EXPECT_LT((model.mean(l, m) - target).cwiseAbs().maxCoeff(), 4.5 / std::sqrt(125.0));
    }
}

TEST(Capacity, PerfectOnSeparatedPrototypes) {
  std::vector<MixedObservation> train;
  for (int i = 0; i < 10; ++i) {
    train.push_back(obs({0.1 * i, -0.05 * i}, {static_cast<std::uint8_t>(i % 2)}, 1));
    train.push_back(obs({20 + 0.1 * i, 0.07 * i}, {static_cast<std::uint8_t>(i % 2)}, 2));
  }
  const Dataset ds(2, 1, 2, train);
  const auto model = fit_classifier(ds, VariableSet{0, 1});
  const auto cap = classification_capacity(model, ds);
  EXPECT_EQ(cap.cc, 1.0);
  EXPECT_EQ(cap.undefined, 0);
}

TEST(Capacity, NoSignalIsNearHalf) {
  ExperimentSpec spec = reference_experiment(100);
  spec.group_means[1] = spec.group_means[0];
  spec.n_test = {2000, 2000};
  spec.seed = 8;
  const SamplePair pair = generate_dataset(spec, 0);
  const auto cap = classification_capacity(fit_classifier(pair.train, VariableSet::full(5)), pair.test);
  // binomial sd at n = 4000 is 0.0079
  EXPECT_NEAR(cap.cc, 0.5, 4 * 0.0079);
  EXPECT_GE(cap.cc, 0.0);
  EXPECT_LE(cap.cc, 1.0);
}
