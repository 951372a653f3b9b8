#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace mixsel;

TEST(Mvn, StandardNormalMoments) {
  const int N = 100000;
  RandomStream rng(stream_seed(1, 0, StreamRole::train, 0, N));
  const Eigen::MatrixXd L = cholesky_factor(Eigen::MatrixXd::Identity(3, 3));
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3), sq = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < N; ++i) {
    const Eigen::VectorXd x = sample_mvn(Eigen::VectorXd::Zero(3), L, rng);
    sum += x;
    sq += x.cwiseProduct(x);
  }
  const Eigen::VectorXd mean = sum / N;
  const Eigen::VectorXd var = sq / N - mean.cwiseProduct(mean);
  for (int j = 0; j < 3; ++j) {
    EXPECT_LT(std::abs(mean(j)), 4 / std::sqrt(double(N)));
    EXPECT_LT(std::abs(var(j) - 1), 4 * std::sqrt(2.0 / N));
  }
}

TEST(Mvn, ReferenceCovarianceRecovered) {
  const int N = 100000;
  const ExperimentSpec spec = reference_experiment();
  RandomStream rng(stream_seed(3, 0, StreamRole::train, 0, N));
  const Eigen::MatrixXd L = cholesky_factor(spec.covariance);
  Eigen::MatrixXd X(N, 5);
  for (int i = 0; i < N; ++i) X.row(i) = sample_mvn(Eigen::VectorXd::Zero(5), L, rng).transpose();
  const Eigen::MatrixXd centred = X.rowwise() - X.colwise().mean();
  const Eigen::MatrixXd S = centred.transpose() * centred / N;
  EXPECT_LT((S - spec.covariance).norm(), 0.05);
}

TEST(Mvn, RejectsNonPositiveDefinite) {
  EXPECT_THROW(cholesky_factor(Eigen::MatrixXd::Zero(3, 3)), ValidationError);
  Eigen::Matrix2d asym;
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(cholesky_factor(asym), ValidationError);
  ExperimentSpec spec = reference_experiment();
  spec.covariance = Eigen::MatrixXd::Zero(5, 5);
  EXPECT_THROW(spec.validate(), ValidationError);
}

TEST(Generator, SizesAndBalance) {
  ExperimentSpec spec = reference_experiment(50);
  spec.seed = 3;
  const SamplePair pair = generate_dataset(spec, 0);
  EXPECT_EQ(pair.train.size(), 100);
  EXPECT_EQ(pair.train.group_sizes(), (std::vector<int>{50, 50}));
  EXPECT_EQ(pair.test.size(), 100);
  EXPECT_EQ(pair.train.cells(), 8);
}

TEST(Generator, UniformCellsPassChiSquare) {
  ExperimentSpec spec = reference_experiment(50000);
  spec.n_test = {1, 1};
  spec.seed = 4;
  const SamplePair pair = generate_dataset(spec, 0);
  std::vector<double> counts(8, 0);
  for (int i = 0; i < pair.train.size(); ++i) counts[static_cast<std::size_t>(pair.train.cell(i))] += 1;
  const double expected = pair.train.size() / 8.0;
  double chi2 = 0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 99.9% quantile of chi-square with 7 degrees of freedom
  EXPECT_LT(chi2, 24.322);
}

TEST(Generator, StreamsAreReproducibleAndDistinct) {
  ExperimentSpec spec = reference_experiment(20);
  spec.seed = 5;
  const SamplePair a = generate_dataset(spec, 3), b = generate_dataset(spec, 3), c = generate_dataset(spec, 4);
  spec.seed = 6;
  const SamplePair d = generate_dataset(spec, 3);
  bool differ_rep = false, differ_seed = false, differ_role = false;
  for (int i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].x, b.train[i].x);
    EXPECT_EQ(a.train[i].y, b.train[i].y);
    EXPECT_EQ(a.test[i].x, b.test[i].x);
    differ_rep = differ_rep || a.train[i].x != c.train[i].x;
    differ_seed = differ_seed || a.train[i].x != d.train[i].x;
    differ_role = differ_role || a.train[i].x != a.test[i].x;
  }
  EXPECT_TRUE(differ_rep);
  EXPECT_TRUE(differ_seed);
  EXPECT_TRUE(differ_role);
}

TEST(Generator, GroupDependentCells) {
  ExperimentSpec spec = reference_experiment(2000);
  Eigen::VectorXd only_first = Eigen::VectorXd::Zero(8), only_last = Eigen::VectorXd::Zero(8);
  only_first(0) = 1;
  only_last(7) = 1;
  spec.cell_probs = {only_first, only_last};
  spec.seed = 7;
  const SamplePair pair = generate_dataset(spec, 0);
  for (int i = 0; i < pair.train.size(); ++i) EXPECT_EQ(pair.train.cell(i), pair.train.group(i) == 0 ? 0 : 7);
  const auto pop = population_of(spec);
  EXPECT_NEAR(pop.p_m(0), 0.5, 1e-15);
  EXPECT_NEAR(pop.p_m(7), 0.5, 1e-15);
}

TEST(Experiment, NoSignalGivesHalf) {
  ExperimentSpec spec = reference_experiment(50);
  spec.group_means[1] = spec.group_means[0];
  spec.replications = 200;
  spec.seed = 8;
  const CcSummary s = run_experiment(spec);
  EXPECT_NEAR(s.mean_cc, 0.5, 0.015);
  EXPECT_EQ(static_cast<int>(s.selection_frequency.size()), 5);
}

TEST(Experiment, WiderSeparationRaisesCapacity) {
  ExperimentSpec spec = reference_experiment(100);
  spec.replications = 200;
  spec.seed = 9;
  const double base = run_experiment(spec).mean_cc;
  spec.group_means[1] *= 3.0;
  const double wide = run_experiment(spec).mean_cc;
  EXPECT_GT(wide, base + 0.05);
}

// Under the reference means the population criteria of the single-variable
// deletions (about 3e-6) are far below f_n(1) - f_n(2) at n = 500, so the
// first coordinate is ranked first and kept in every replication.
TEST(Experiment, ReferenceSignalTooWeakToDropFirstCoordinate) {
  ExperimentSpec spec = reference_experiment(250);
  spec.replications = 200;
  spec.seed = 10;
  const CcSummary s = run_experiment(spec);
  EXPECT_EQ(s.selection_frequency[0], 1.0);
  EXPECT_EQ(s.failures, 0);
}

// One cell (p_m = 1), triple separation and alpha = 0.45 put the criteria
// above the f_n gaps; the irrelevant first coordinate then drops out, but only
// when g_n is charged at the rank.
TEST(Experiment, FirstCoordinateSelectedLeastOftenWhenSignalBeatsPenalty) {
  ExperimentSpec spec = reference_experiment(250);
  spec.d = 0;
  spec.group_means[1] *= 3.0;
  spec.replications = 200;
  spec.seed = 10;
  spec.selection.alpha = 0.45;
  spec.selection.dimension_index = DimensionIndex::rank;
  const CcSummary s = run_experiment(spec);
  for (int j = 1; j < 5; ++j) EXPECT_LT(s.selection_frequency[0], s.selection_frequency[static_cast<std::size_t>(j)]);
  EXPECT_LT(s.selection_frequency[0], 0.5);
  spec.selection.dimension_index = DimensionIndex::variable;
  EXPECT_EQ(run_experiment(spec).selection_frequency[0], 1.0);
}

TEST(Experiment, IndependentOfThreadCount) {
  ExperimentSpec spec = reference_experiment(40);
  spec.replications = 24;
  spec.seed = 11;
  const CcSummary a = run_experiment(spec, 1), b = run_experiment(spec, 4);
  EXPECT_EQ(a.mean_cc, b.mean_cc);
  EXPECT_EQ(a.se_cc, b.se_cc);
  EXPECT_EQ(a.failures, b.failures);
  EXPECT_EQ(a.selection_frequency, b.selection_frequency);
}

TEST(Experiment, SmallCellsFailWithoutAborting) {
  // 10 observations spread over 8 cells leave singular cell covariances
  ExperimentSpec spec = reference_experiment(5);
  spec.replications = 10;
  spec.seed = 12;
  const CcSummary s = run_experiment(spec);
  EXPECT_EQ(s.replications, 10);
  EXPECT_GT(s.failures, 0);
}

TEST(Curves, RowCountAndConsistency) {
  ExperimentSpec spec = reference_experiment(50);
  spec.replications = 20;
  spec.seed = 13;
  const auto rows = sweep_beta_curves(spec, {0.1, 0.3}, {0.2, 0.5, 0.8});
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[1].alpha, 0.1);
  EXPECT_EQ(rows[1].beta, 0.5);
  for (const auto& r : rows) {
    EXPECT_GE(r.summary.mean_cc, 0.0);
    EXPECT_LE(r.summary.mean_cc, 1.0);
  }
  spec.selection.alpha = 0.3;
  spec.selection.beta = 0.8;
  const CcSummary direct = run_experiment(spec);
  const auto single = sweep_beta_curves(spec, {0.3}, {0.8});
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].summary.mean_cc, direct.mean_cc);
  EXPECT_EQ(single[0].summary.mean_cc, rows[5].summary.mean_cc);
}

TEST(Curves, VaryWithBetaAtHundred) {
  ExperimentSpec spec = reference_experiment(50);
  spec.replications = 100;
  spec.seed = 14;
  const auto rows = sweep_beta_curves(spec, {0.25}, arithmetic_grid(0.05, 0.1, 10));
  double lo = 1, hi = 0;
  for (const auto& r : rows) {
    lo = std::min(lo, r.summary.mean_cc);
    hi = std::max(hi, r.summary.mean_cc);
  }
  EXPECT_GT(hi, lo);
}

TEST(Tuned, ChoicesStayOnGrid) {
  ExperimentSpec spec = reference_experiment(20);
  spec.replications = 3;
  spec.seed = 15;
  TuningGrid grid;
  grid.alphas = {0.1, 0.3};
  grid.betas = {0.3, 0.6};
  const TunedSummary s = run_tuned_experiment(spec, grid);
  EXPECT_GE(s.mean_alpha_opt, 0.1);
  EXPECT_LE(s.mean_alpha_opt, 0.3);
  EXPECT_GE(s.mean_beta_opt, 0.3);
  EXPECT_LE(s.mean_beta_opt, 0.6);
  EXPECT_EQ(s.cc.replications, 3);
}

TEST(PenaltyTable, OneRowPerPenalty) {
  ExperimentSpec spec = reference_experiment(50);
  spec.replications = 4;
  spec.seed = 16;
  const auto rows = run_penalty_table(spec, {Penalty::h1, Penalty::h7, Penalty::h13}, true, {0.0, 0.3});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2].penalty, Penalty::h13);
  for (const auto& r : rows) {
    ASSERT_TRUE(r.smoothed.has_value());
    EXPECT_GE(r.mean_lambda, 0.0);
    EXPECT_LE(r.mean_lambda, 0.3);
  }
  SelectionConfig cfg;
  cfg.penalty = Penalty::h7;
  spec.selection = cfg;
  EXPECT_EQ(rows[1].empirical.mean_cc, run_experiment(spec).mean_cc);
}
