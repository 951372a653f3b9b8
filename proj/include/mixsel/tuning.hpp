#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mixsel/classifier.hpp"
#include "mixsel/data_model.hpp"
#include "mixsel/errors.hpp"
#include "mixsel/estimators.hpp"
#include "mixsel/parallel.hpp"
#include "mixsel/selection.hpp"

namespace mixsel {

inline std::vector<double> arithmetic_grid(double first, double step, int count) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  // integer multiples keep values such as 0.3 exactly as a literal would produce them
  for (int k = 0; k < count; ++k) out.push_back(static_cast<double>(std::llround((first + k * step) * 1e9)) / 1e9);
  return out;
}

struct TuningGrid {
  std::vector<double> alphas = arithmetic_grid(0.05, 0.05, 9);
  std::vector<double> betas = arithmetic_grid(0.05, 0.05, 19);
  std::vector<double> lambdas = arithmetic_grid(0.0, 0.1, 10);

  void validate() const {
    if (alphas.empty() || betas.empty() || lambdas.empty()) throw UsageError("tuning grid must be non-empty");
    for (double a : alphas) check_alpha(a);
    for (double b : betas) check_beta(b);
    for (double l : lambdas)
      if (!(l >= 0.0 && l < 1.0)) throw UsageError("lambda=" + std::to_string(l) + " outside allowed range [0, 1[");
  }
};

/// Selection and classification on the sample with observation k held out,
/// caching everything that does not depend on (alpha, beta, penalty).
class LeaveOneOutFold {
public:
  LeaveOneOutFold(const Dataset& ds, int k, double lambda, double alpha_cost = 1.0)
      : LeaveOneOutFold(ds, k, std::make_shared<const SampleSummary>(summarize(ds, k)), lambda, alpha_cost) {}

  /// `summary` must be summarize(ds, k); folds over several lambdas can share it.
  /// `full_sample`, when given, caches per-cell criteria of the empirical
  /// estimates on all of ds and is only consulted for lambda = 0.
  LeaveOneOutFold(const Dataset& ds, int k, std::shared_ptr<const SampleSummary> summary, double lambda,
                  double alpha_cost = 1.0, CellCriterionCache* full_sample = nullptr)
      : ds_(&ds), k_(k), lambda_(lambda), alpha_cost_(alpha_cost), summary_(std::move(summary)) {
    try {
      estimates_ = std::make_unique<CellEstimates>(estimate(*summary_, lambda));
      if (lambda == 0.0 && full_sample != nullptr)
        xi_ = std::make_unique<CriterionEvaluator>(*estimates_, full_sample, ds.cell(k));
      else
        xi_ = std::make_unique<CriterionEvaluator>(*estimates_);
    } catch (const SingularSubmatrix&) {
      estimation_failed_ = true;
    }
  }

  int held_out() const noexcept { return k_; }
  const SampleSummary& summary() const noexcept { return *summary_; }

  /// Variables selected on the reduced sample; empty optional on a numerical failure.
  std::optional<SelectionResult> selection(const SelectionConfig& cfg) {
    if (estimation_failed_) return std::nullopt;
    try {
      return select_with(*xi_, summary_->n, cfg);
    } catch (const SingularSubmatrix&) {
      return std::nullopt;
    }
  }

  /// Classifier fitted on the reduced sample restricted to K; null on failure.
  const ClassifierModel* classifier(const VariableSet& K) {
    auto it = models_.find(K.mask());
    if (it != models_.end()) return it->second ? &*it->second : nullptr;
    std::optional<ClassifierModel> model;
    try {
      if (!fit_) fit_ = std::make_unique<LocationModelFit>(fit_location_model(*summary_, lambda_));
      model.emplace(*fit_, K, alpha_cost_);
    } catch (const SingularSubmatrix&) {
    }
    it = models_.emplace(K.mask(), std::move(model)).first;
    return it->second ? &*it->second : nullptr;
  }

  /// Group predicted for the held-out observation; empty on a fold failure.
  std::optional<int> predict(const SelectionConfig& cfg) {
    const auto sel = selection(cfg);
    if (!sel) return std::nullopt;
    const ClassifierModel* model = classifier(sel->selected);
    if (model == nullptr) return std::nullopt;
    try {
      return model->classify((*ds_)[k_].x, CellIndex(ds_->cell(k_) + 1));
    } catch (const UndefinedCell&) {
      return std::nullopt;
    }
  }

private:
  const Dataset* ds_;
  int k_;
  double lambda_;
  double alpha_cost_;
  std::shared_ptr<const SampleSummary> summary_;
  std::unique_ptr<CellEstimates> estimates_;
  std::unique_ptr<CriterionEvaluator> xi_;
  bool estimation_failed_ = false;
  std::unique_ptr<LocationModelFit> fit_;
  std::unordered_map<std::uint64_t, std::optional<ClassifierModel>> models_;
};

inline void check_loocv_sample(const Dataset& ds) {
  if (ds.size() < 10) throw ValidationError("leave-one-out tuning needs n >= 10");
  const auto sizes = ds.group_sizes();
  for (std::size_t l = 0; l < sizes.size(); ++l)
    if (sizes[l] < 3)
      throw ValidationError("leave-one-out tuning needs >= 3 observations in every group; group " +
                            std::to_string(l + 1) + " has " + std::to_string(sizes[l]));
}

struct LoocvTally {
  int correct = 0;
  int failures = 0;
};

/// Leave-one-out tallies for every (lambda, config) pair: result[l][c].
inline std::vector<std::vector<LoocvTally>> loocv_tally(const Dataset& ds, const std::vector<double>& lambdas,
                                                        const std::vector<SelectionConfig>& configs,
                                                        double alpha_cost = 1.0, int threads = 1) {
  check_loocv_sample(ds);
  for (const auto& c : configs) c.validate();
  const int n = ds.size();
  const std::size_t L = lambdas.size(), C = configs.size();
  // per-fold outcome codes: 0 wrong, 1 correct, 2 failure
  std::vector<std::vector<std::uint8_t>> outcome(static_cast<std::size_t>(n));
  std::unique_ptr<CellEstimates> full;
  std::unique_ptr<CellCriterionCache> shared;
  if (std::find(lambdas.begin(), lambdas.end(), 0.0) != lambdas.end()) {
    full = std::make_unique<CellEstimates>(estimate_empirical(summarize(ds)));
    shared = std::make_unique<CellCriterionCache>(*full);
  }
  parallel_for(n, threads, [&](int k) {
    auto& out = outcome[static_cast<std::size_t>(k)];
    out.assign(L * C, 0);
    const auto summary = std::make_shared<const SampleSummary>(summarize(ds, k));
    for (std::size_t l = 0; l < L; ++l) {
      LeaveOneOutFold fold(ds, k, summary, lambdas[l], alpha_cost, shared.get());
      for (std::size_t c = 0; c < C; ++c) {
        SelectionConfig cfg = configs[c];
        cfg.estimator = lambdas[l] == 0.0 ? EstimatorKind::empirical : EstimatorKind::smoothed;
        cfg.lambda = lambdas[l];
        const auto g = fold.predict(cfg);
        out[l * C + c] = !g ? 2 : (*g == ds[k].z ? 1 : 0);
      }
    }
  });
  std::vector<std::vector<LoocvTally>> tally(L, std::vector<LoocvTally>(C));
  for (const auto& out : outcome)
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t c = 0; c < C; ++c) {
        const auto v = out[l * C + c];
        tally[l][c].correct += v == 1;
        tally[l][c].failures += v == 2;
      }
  return tally;
}

struct CvEntry {
  double alpha = 0;
  double beta = 0;
  double cv = 0;
  int failures = 0;
};

struct CvReport {
  std::vector<CvEntry> cv_table;  ///< in grid enumeration order (alpha major)
  double alpha_opt = 0;
  double beta_opt = 0;
  double cv_opt = 0;
  double lambda = 0;
  int fold_failures = 0;  ///< summed over the table
};

/// Leave-one-out choice of (alpha, beta) maximising the proportion of correctly
/// reallocated held-out observations. Ties go to the smallest alpha, then the smallest beta.
inline CvReport loocv_alpha_beta(const Dataset& ds, const std::vector<double>& alphas, const std::vector<double>& betas,
                                 const SelectionConfig& base, double alpha_cost = 1.0, int threads = 1) {
  if (alphas.empty() || betas.empty()) throw UsageError("tuning grid must be non-empty");
  std::vector<SelectionConfig> configs;
  for (double a : alphas)
    for (double b : betas) {
      SelectionConfig c = base;
      c.alpha = a;
      c.beta = b;
      configs.push_back(c);
    }
  const double lambda = base.effective_lambda();
  const auto tally = loocv_tally(ds, {lambda}, configs, alpha_cost, threads).front();

  CvReport r;
  r.lambda = lambda;
  bool have = false;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    const CvEntry e{configs[c].alpha, configs[c].beta, static_cast<double>(tally[c].correct) / ds.size(),
                    tally[c].failures};
    r.cv_table.push_back(e);
    r.fold_failures += e.failures;
    const bool better = !have || e.cv > r.cv_opt ||
                        (e.cv == r.cv_opt && (e.alpha < r.alpha_opt || (e.alpha == r.alpha_opt && e.beta < r.beta_opt)));
    if (better) {
      r.alpha_opt = e.alpha;
      r.beta_opt = e.beta;
      r.cv_opt = e.cv;
      have = true;
    }
  }
  return r;
}

inline CvReport loocv_alpha_beta(const Dataset& ds, const TuningGrid& grid, const SelectionConfig& base,
                                 double alpha_cost = 1.0, int threads = 1) {
  grid.validate();
  return loocv_alpha_beta(ds, grid.alphas, grid.betas, base, alpha_cost, threads);
}

struct LambdaEntry {
  double lambda = 0;
  double cv = 0;
  int failures = 0;
};

struct LambdaReport {
  std::vector<LambdaEntry> table;
  double lambda_best = 0;
};

/// Leave-one-out choice of the smoothing parameter for fixed (alpha, beta, penalty); ties to the smallest lambda.
inline LambdaReport tune_lambda(const Dataset& ds, const std::vector<double>& lambdas, const SelectionConfig& cfg,
                                double alpha_cost = 1.0, int threads = 1) {
  if (lambdas.empty()) throw UsageError("lambda grid must be non-empty");
  for (double l : lambdas)
    if (!(l >= 0.0 && l < 1.0)) throw UsageError("lambda=" + std::to_string(l) + " outside allowed range [0, 1[");
  const auto tally = loocv_tally(ds, lambdas, {cfg}, alpha_cost, threads);
  LambdaReport r;
  double best_cv = -1;
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    const LambdaEntry e{lambdas[l], static_cast<double>(tally[l][0].correct) / ds.size(), tally[l][0].failures};
    r.table.push_back(e);
    if (e.cv > best_cv || (e.cv == best_cv && e.lambda < r.lambda_best)) {
      best_cv = e.cv;
      r.lambda_best = e.lambda;
    }
  }
  return r;
}

}  // namespace mixsel
