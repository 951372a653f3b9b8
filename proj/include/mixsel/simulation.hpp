#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "mixsel/classifier.hpp"
#include "mixsel/criterion.hpp"
#include "mixsel/data_model.hpp"
#include "mixsel/errors.hpp"
#include "mixsel/estimators.hpp"
#include "mixsel/parallel.hpp"
#include "mixsel/selection.hpp"
#include "mixsel/tuning.hpp"

namespace mixsel {

// ---------------------------------------------------------------------------
// Random streams

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

enum class StreamRole : std::uint64_t { train = 1, test = 2 };

/// Seed of the stream for (master seed, replication, role, group, per-group size).
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replication, StreamRole role, int group,
                                 int group_size) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t part : {replication, static_cast<std::uint64_t>(role), static_cast<std::uint64_t>(group),
                             static_cast<std::uint64_t>(group_size)})
    h = splitmix64(h ^ splitmix64(part));
  return h;
}

using RandomStream = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(RandomStream& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Lower Cholesky factor of an SPD covariance.
inline Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols() || cov.rows() == 0) throw ValidationError("covariance must be square and non-empty");
  if (!cov.isApprox(cov.transpose(), 1e-12)) throw ValidationError("covariance is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw ValidationError("covariance is not positive definite");
  Eigen::MatrixXd L = llt.matrixL();
  if (!(L.diagonal().minCoeff() > 0)) throw ValidationError("covariance is not positive definite");
  return L;
}

/// mean + L z with z standard normal.
inline Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& factor, RandomStream& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = normal(rng);
  return mean + factor.triangularView<Eigen::Lower>() * z;
}

/// Inverse-CDF draw from a probability vector; returns a zero-based index.
inline int sample_discrete(const Eigen::VectorXd& probs, RandomStream& rng) {
  const double u = uniform01(rng);
  double acc = 0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    acc += probs(k);
    if (u < acc) return static_cast<int>(k);
  }
  for (Eigen::Index k = probs.size() - 1; k > 0; --k)
    if (probs(k) > 0) return static_cast<int>(k);
  return 0;
}

// ---------------------------------------------------------------------------
// Experiment description

struct ExperimentSpec {
  int p = 5;
  int d = 3;
  int q = 2;
  std::vector<Eigen::VectorXd> group_means;
  Eigen::MatrixXd covariance;
  /// One probability vector over the M cells per group; uniform when empty.
  std::vector<Eigen::VectorXd> cell_probs;
  std::vector<int> n_train;  ///< per group
  std::vector<int> n_test;   ///< per group
  int replications = 1000;
  std::uint64_t seed = 0;
  SelectionConfig selection;
  double alpha_cost = 1.0;

  int cells() const { return cell_count(d); }
  int train_size() const {
    int n = 0;
    for (int v : n_train) n += v;
    return n;
  }

  const Eigen::VectorXd cell_distribution(int group) const {
    if (cell_probs.empty()) return Eigen::VectorXd::Constant(cells(), 1.0 / cells());
    return cell_probs[static_cast<std::size_t>(cell_probs.size() == 1 ? 0 : group)];
  }

  void validate() const {
    if (p < 1 || q < 1) throw ValidationError("experiment: p and q must be >= 1");
    const int M = cells();
    if (static_cast<int>(group_means.size()) != q) throw ValidationError("experiment: need one mean per group");
    for (const auto& mu : group_means)
      if (mu.size() != p) throw ValidationError("experiment: group mean has wrong length");
    if (covariance.rows() != p) throw ValidationError("experiment: covariance has wrong size");
    cholesky_factor(covariance);
    if (!cell_probs.empty() && cell_probs.size() != 1 && static_cast<int>(cell_probs.size()) != q)
      throw ValidationError("experiment: cell_probs needs one vector or one per group");
    for (const auto& pr : cell_probs) {
      if (pr.size() != M) throw ValidationError("experiment: cell probability vector has wrong length");
      if (pr.minCoeff() < 0 || std::abs(pr.sum() - 1.0) > 1e-9)
        throw ValidationError("experiment: cell probabilities must be non-negative and sum to 1");
    }
    if (static_cast<int>(n_train.size()) != q || static_cast<int>(n_test.size()) != q)
      throw ValidationError("experiment: need train and test sizes per group");
    for (int v : n_train)
      if (v < 1) throw ValidationError("experiment: train sizes must be >= 1");
    for (int v : n_test)
      if (v < 1) throw ValidationError("experiment: test sizes must be >= 1");
    if (replications < 1) throw ValidationError("experiment: replications must be >= 1");
  }
};

/// Gamma = (I + J)/2 in R^5, mu_1 = 0, mu_2 = (1/4, 0, 1/2, 0, 3/4), three uniform binary variables.
inline ExperimentSpec reference_experiment(int n_per_group = 50) {
  ExperimentSpec spec;
  spec.p = 5;
  spec.d = 3;
  spec.q = 2;
  spec.covariance = 0.5 * (Eigen::MatrixXd::Identity(5, 5) + Eigen::MatrixXd::Ones(5, 5));
  spec.group_means = {Eigen::VectorXd::Zero(5), (Eigen::VectorXd(5) << 0.25, 0.0, 0.5, 0.0, 0.75).finished()};
  spec.n_train = {n_per_group, n_per_group};
  spec.n_test = {n_per_group, n_per_group};
  return spec;
}

/// Exact cell parameters implied by an experiment with group priors proportional to the training sizes.
inline PopulationSpec population_of(const ExperimentSpec& spec) {
  spec.validate();
  const int M = spec.cells();
  const double n = spec.train_size();
  Eigen::VectorXd cell = Eigen::VectorXd::Zero(M);
  Eigen::MatrixXd joint(spec.q, M);
  for (int l = 0; l < spec.q; ++l) {
    joint.row(l) = (spec.n_train[static_cast<std::size_t>(l)] / n) * spec.cell_distribution(l).transpose();
    cell += joint.row(l).transpose();
  }
  Eigen::MatrixXd given(spec.q, M);
  std::vector<Eigen::VectorXd> means(static_cast<std::size_t>(spec.q * M));
  for (int m = 0; m < M; ++m)
    for (int l = 0; l < spec.q; ++l) {
      given(l, m) = cell(m) > 0 ? joint(l, m) / cell(m) : 0.0;
      means[static_cast<std::size_t>(l * M + m)] = spec.group_means[static_cast<std::size_t>(l)];
    }
  for (int m = 0; m < M; ++m)
    if (cell(m) == 0) given(0, m) = 1.0;
  PopulationSpec pop = PopulationSpec::from_strata(cell / cell.sum(), given, means,
                                                   std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(M), spec.covariance));
  for (int m = 0; m < M; ++m)
    if (cell(m) == 0) pop.cell_defined[static_cast<std::size_t>(m)] = false;
  return pop;
}

struct SamplePair {
  Dataset train;
  Dataset test;
};

namespace detail {

inline std::vector<MixedObservation> draw_role(const ExperimentSpec& spec, const Eigen::MatrixXd& factor,
                                               std::uint64_t replication, StreamRole role,
                                               const std::vector<int>& sizes) {
  std::vector<MixedObservation> obs;
  for (int l = 0; l < spec.q; ++l) {
    const int size = sizes[static_cast<std::size_t>(l)];
    RandomStream rng(stream_seed(spec.seed, replication, role, l, size));
    const Eigen::VectorXd probs = spec.cell_distribution(l);
    for (int i = 0; i < size; ++i) {
      MixedObservation o;
      o.x = sample_mvn(spec.group_means[static_cast<std::size_t>(l)], factor, rng);
      o.y = decode_cell(CellIndex(sample_discrete(probs, rng) + 1), spec.d);
      o.z = l + 1;
      obs.push_back(std::move(o));
    }
  }
  return obs;
}

}  // namespace detail

/// Independent training and test samples for one replication.
inline SamplePair generate_dataset(const ExperimentSpec& spec, std::uint64_t replication) {
  spec.validate();
  const Eigen::MatrixXd L = cholesky_factor(spec.covariance);
  return {Dataset(spec.p, spec.d, spec.q, detail::draw_role(spec, L, replication, StreamRole::train, spec.n_train)),
          Dataset(spec.p, spec.d, spec.q, detail::draw_role(spec, L, replication, StreamRole::test, spec.n_test))};
}

// ---------------------------------------------------------------------------
// One replication, many configurations

/// Test-set classification capacity of location-model rules fitted on the
/// training sample, memoized by (lambda, variable set).
class ReplicationScorer {
public:
  ReplicationScorer(const SamplePair& data, double alpha_cost)
      : data_(&data), alpha_cost_(alpha_cost), summary_(summarize(data.train)) {}

  const SampleSummary& summary() const noexcept { return summary_; }
  const SamplePair& data() const noexcept { return *data_; }

  /// Criterion evaluator on the training estimates for lambda; throws SingularSubmatrix.
  CriterionEvaluator& criterion(double lambda) {
    auto& slot = slot_for(lambda);
    if (!slot.xi) {
      slot.estimates = std::make_unique<CellEstimates>(estimate(summary_, lambda));
      slot.xi = std::make_unique<CriterionEvaluator>(*slot.estimates);
    }
    return *slot.xi;
  }

  std::optional<SelectionResult> select(const SelectionConfig& cfg) {
    try {
      return select_with(criterion(cfg.effective_lambda()), summary_.n, cfg);
    } catch (const SingularSubmatrix&) {
      return std::nullopt;
    }
  }

  /// Test CC of the rule restricted to K; empty when the rule cannot be fitted.
  std::optional<CapacityReport> capacity(const VariableSet& K, double lambda) {
    auto& slot = slot_for(lambda);
    const auto it = slot.cc.find(K.mask());
    if (it != slot.cc.end()) return it->second;
    std::optional<CapacityReport> out;
    try {
      if (!slot.fit) slot.fit = std::make_unique<LocationModelFit>(fit_location_model(summary_, lambda));
      out = classification_capacity(ClassifierModel(*slot.fit, K, alpha_cost_), data_->test);
    } catch (const SingularSubmatrix&) {
    }
    slot.cc.emplace(K.mask(), out);
    return out;
  }

private:
  struct Slot {
    std::unique_ptr<CellEstimates> estimates;
    std::unique_ptr<CriterionEvaluator> xi;
    std::unique_ptr<LocationModelFit> fit;
    std::unordered_map<std::uint64_t, std::optional<CapacityReport>> cc;
  };

  Slot& slot_for(double lambda) { return slots_[lambda]; }

  const SamplePair* data_;
  double alpha_cost_;
  SampleSummary summary_;
  std::unordered_map<double, Slot> slots_;
};

/// Outcome of one configuration on one replication.
struct ReplicationOutcome {
  bool failed = false;
  double cc = 0;
  int undefined = 0;
  VariableSet selected;
};

inline ReplicationOutcome score_selection(ReplicationScorer& scorer, const SelectionConfig& cfg) {
  ReplicationOutcome out;
  const auto sel = scorer.select(cfg);
  if (!sel) {
    out.failed = true;
    return out;
  }
  out.selected = sel->selected;
  const auto cap = scorer.capacity(sel->selected, cfg.effective_lambda());
  if (!cap) {
    out.failed = true;
    return out;
  }
  out.cc = cap->cc;
  out.undefined = cap->undefined;
  return out;
}

/// Mean CC with its standard error, and how often each variable was selected.
struct CcSummary {
  int replications = 0;
  int failures = 0;
  double mean_cc = 0;
  double se_cc = 0;
  long undefined = 0;
  std::vector<double> selection_frequency;  ///< per variable, over successful replications
};

/// Folds outcomes in replication order.
inline CcSummary summarize_outcomes(const std::vector<ReplicationOutcome>& outcomes, int p) {
  CcSummary s;
  s.replications = static_cast<int>(outcomes.size());
  s.selection_frequency.assign(static_cast<std::size_t>(p), 0.0);
  double sum = 0, sum_sq = 0;
  int ok = 0;
  for (const auto& o : outcomes) {
    if (o.failed) {
      ++s.failures;
      continue;
    }
    ++ok;
    sum += o.cc;
    sum_sq += o.cc * o.cc;
    s.undefined += o.undefined;
    for (int j = 0; j < p; ++j)
      if (o.selected.contains(j)) s.selection_frequency[static_cast<std::size_t>(j)] += 1;
  }
  if (ok > 0) {
    s.mean_cc = sum / ok;
    const double var = ok > 1 ? std::max(0.0, (sum_sq - ok * s.mean_cc * s.mean_cc) / (ok - 1)) : 0.0;
    s.se_cc = std::sqrt(var / ok);
    for (auto& f : s.selection_frequency) f /= ok;
  }
  return s;
}

/// Replicated train/test evaluation of one selection configuration.
inline CcSummary run_experiment(const ExperimentSpec& spec, int threads = 1) {
  spec.validate();
  spec.selection.validate();
  std::vector<ReplicationOutcome> outcomes(static_cast<std::size_t>(spec.replications));
  parallel_for(spec.replications, threads, [&](int r) {
    const SamplePair data = generate_dataset(spec, static_cast<std::uint64_t>(r));
    ReplicationScorer scorer(data, spec.alpha_cost);
    outcomes[static_cast<std::size_t>(r)] = score_selection(scorer, spec.selection);
  });
  return summarize_outcomes(outcomes, spec.p);
}

struct CurveRow {
  double alpha = 0;
  double beta = 0;
  CcSummary summary;
};

/// Mean CC over replications for every (alpha, beta), on common simulated samples.
inline std::vector<CurveRow> sweep_beta_curves(const ExperimentSpec& spec, const std::vector<double>& alphas,
                                               const std::vector<double>& betas, int threads = 1) {
  spec.validate();
  for (double a : alphas) check_alpha(a);
  for (double b : betas) check_beta(b);
  const std::size_t A = alphas.size(), B = betas.size();
  std::vector<std::vector<ReplicationOutcome>> grid(A * B,
                                                    std::vector<ReplicationOutcome>(static_cast<std::size_t>(spec.replications)));
  parallel_for(spec.replications, threads, [&](int r) {
    const SamplePair data = generate_dataset(spec, static_cast<std::uint64_t>(r));
    ReplicationScorer scorer(data, spec.alpha_cost);
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < B; ++b) {
        SelectionConfig cfg = spec.selection;
        cfg.alpha = alphas[a];
        cfg.beta = betas[b];
        grid[a * B + b][static_cast<std::size_t>(r)] = score_selection(scorer, cfg);
      }
  });
  std::vector<CurveRow> rows;
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t b = 0; b < B; ++b) rows.push_back({alphas[a], betas[b], summarize_outcomes(grid[a * B + b], spec.p)});
  return rows;
}

/// Replications where (alpha, beta) is chosen by leave-one-out on each training sample.
struct TunedSummary {
  CcSummary cc;
  double mean_alpha_opt = 0;
  double mean_beta_opt = 0;
};

inline TunedSummary run_tuned_experiment(const ExperimentSpec& spec, const TuningGrid& grid, int threads = 1) {
  spec.validate();
  grid.validate();
  std::vector<ReplicationOutcome> outcomes(static_cast<std::size_t>(spec.replications));
  std::vector<std::pair<double, double>> chosen(static_cast<std::size_t>(spec.replications));
  parallel_for(spec.replications, threads, [&](int r) {
    const SamplePair data = generate_dataset(spec, static_cast<std::uint64_t>(r));
    const CvReport cv = loocv_alpha_beta(data.train, grid.alphas, grid.betas, spec.selection, spec.alpha_cost, 1);
    SelectionConfig cfg = spec.selection;
    cfg.alpha = cv.alpha_opt;
    cfg.beta = cv.beta_opt;
    ReplicationScorer scorer(data, spec.alpha_cost);
    outcomes[static_cast<std::size_t>(r)] = score_selection(scorer, cfg);
    chosen[static_cast<std::size_t>(r)] = {cv.alpha_opt, cv.beta_opt};
  });
  TunedSummary s;
  s.cc = summarize_outcomes(outcomes, spec.p);
  for (const auto& [a, b] : chosen) {
    s.mean_alpha_opt += a;
    s.mean_beta_opt += b;
  }
  s.mean_alpha_opt /= spec.replications;
  s.mean_beta_opt /= spec.replications;
  return s;
}

/// Per-penalty CC with the empirical estimator and, optionally, with the
/// smoothed estimator whose lambda is tuned by leave-one-out on each training sample.
struct PenaltyRow {
  Penalty penalty = Penalty::h1;
  CcSummary empirical;
  std::optional<CcSummary> smoothed;
  double mean_lambda = 0;
};

inline std::vector<PenaltyRow> run_penalty_table(const ExperimentSpec& spec, const std::vector<Penalty>& penalties,
                                                 bool with_smoothed, const std::vector<double>& lambdas,
                                                 int threads = 1) {
  spec.validate();
  const std::size_t H = penalties.size();
  const auto reps = static_cast<std::size_t>(spec.replications);
  std::vector<std::vector<ReplicationOutcome>> emp(H, std::vector<ReplicationOutcome>(reps));
  std::vector<std::vector<ReplicationOutcome>> smo(H, std::vector<ReplicationOutcome>(reps));
  std::vector<std::vector<double>> lam(H, std::vector<double>(reps, 0.0));
  parallel_for(spec.replications, threads, [&](int r) {
    const SamplePair data = generate_dataset(spec, static_cast<std::uint64_t>(r));
    ReplicationScorer scorer(data, spec.alpha_cost);
    std::vector<SelectionConfig> configs;
    for (std::size_t h = 0; h < H; ++h) {
      SelectionConfig cfg = spec.selection;
      cfg.estimator = EstimatorKind::empirical;
      cfg.penalty = penalties[h];
      configs.push_back(cfg);
      emp[h][static_cast<std::size_t>(r)] = score_selection(scorer, cfg);
    }
    if (!with_smoothed) return;
    const auto tally = loocv_tally(data.train, lambdas, configs, spec.alpha_cost, 1);
    for (std::size_t h = 0; h < H; ++h) {
      std::size_t best = 0;
      for (std::size_t l = 1; l < lambdas.size(); ++l) {
        const int c = tally[l][h].correct, cb = tally[best][h].correct;
        if (c > cb || (c == cb && lambdas[l] < lambdas[best])) best = l;
      }
      SelectionConfig cfg = configs[h];
      cfg.estimator = EstimatorKind::smoothed;
      cfg.lambda = lambdas[best];
      lam[h][static_cast<std::size_t>(r)] = lambdas[best];
      smo[h][static_cast<std::size_t>(r)] = score_selection(scorer, cfg);
    }
  });
  std::vector<PenaltyRow> rows;
  for (std::size_t h = 0; h < H; ++h) {
    PenaltyRow row;
    row.penalty = penalties[h];
    row.empirical = summarize_outcomes(emp[h], spec.p);
    if (with_smoothed) {
      row.smoothed = summarize_outcomes(smo[h], spec.p);
      for (double v : lam[h]) row.mean_lambda += v;
      row.mean_lambda /= spec.replications;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mixsel
