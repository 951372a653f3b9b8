#pragma once

#include <bit>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixsel/criterion.hpp"
#include "mixsel/data_model.hpp"
#include "mixsel/errors.hpp"
#include "mixsel/estimators.hpp"
#include "mixsel/variable_set.hpp"

namespace mixsel {

/// Location-model parameters on all p coordinates, before restriction to a variable subset.
struct LocationModelFit {
  int p = 0;
  int q = 0;
  int M = 0;
  std::vector<Eigen::VectorXd> mu;  ///< index l*M + m
  std::vector<bool> defined;        ///< stratum mean exists
  Eigen::MatrixXd sigma;            ///< pooled within-(group, cell) covariance
  Eigen::MatrixXd p_ml;             ///< M×q, P(U=m | Z=l)
  Eigen::VectorXd beta;             ///< group priors n_l / n
};

inline LocationModelFit fit_location_model(const SampleSummary& s, double lambda = 0.0) {
  LocationModelFit fit;
  fit.p = s.p;
  fit.q = s.q;
  fit.M = s.M;
  std::vector<double> n_l(static_cast<std::size_t>(s.q), 0.0);
  for (int l = 0; l < s.q; ++l)
    for (int m = 0; m < s.M; ++m) n_l[static_cast<std::size_t>(l)] += s.at(l, m).count;
  for (int l = 0; l < s.q; ++l)
    if (n_l[static_cast<std::size_t>(l)] == 0)
      throw ValidationError("group " + std::to_string(l + 1) + " has no training observations");

  const CellEstimates est = estimate(s, lambda);
  fit.mu = est.mu_lm;
  fit.defined = est.stratum_defined;
  fit.sigma = pooled_within_covariance(s, est);
  fit.beta.resize(s.q);
  for (int l = 0; l < s.q; ++l) fit.beta(l) = n_l[static_cast<std::size_t>(l)] / s.n;

  fit.p_ml = Eigen::MatrixXd::Zero(s.M, s.q);
  if (lambda == 0.0) {
    for (int l = 0; l < s.q; ++l)
      for (int m = 0; m < s.M; ++m) fit.p_ml(m, l) = s.at(l, m).count / n_l[static_cast<std::size_t>(l)];
  } else {
    const auto sw = smoothing_weights(std::countr_zero(static_cast<unsigned>(s.M)), lambda);
    for (int l = 0; l < s.q; ++l) {
      Eigen::VectorXd mass = Eigen::VectorXd::Zero(s.M);
      for (int m = 0; m < s.M; ++m)
        for (int j = 0; j < s.M; ++j) mass(m) += sw.w(m, j) * s.at(l, j).count;
      fit.p_ml.col(l) = mass / mass.sum();
    }
  }
  return fit;
}

/// Location-model classification rule restricted to the coordinates K.
class ClassifierModel {
public:
  ClassifierModel(const LocationModelFit& fit, const VariableSet& K, double alpha_cost = 1.0)
      : K_(K), idx_(K.indices()), q_(fit.q), M_(fit.M), alpha_cost_(alpha_cost), p_ml_(fit.p_ml), beta_(fit.beta) {
    if (K.empty()) throw ValidationError("classifier needs at least one variable");
    if (K.extent() > fit.p) throw ValidationError("variable set " + K.to_string() + " exceeds p");
    if (!(alpha_cost > 0)) throw UsageError("alpha_cost must be positive");
    sigma_K_ = detail::submatrix(fit.sigma, idx_);
    sigma_inv_ = detail::guarded_inverse(sigma_K_, 0, K);
    mu_.resize(fit.mu.size());
    defined_ = fit.defined;
    for (std::size_t k = 0; k < fit.mu.size(); ++k)
      if (defined_[k]) mu_[k] = restrict(fit.mu[k]);
  }

  const VariableSet& variables() const noexcept { return K_; }
  int groups() const noexcept { return q_; }
  int cells() const noexcept { return M_; }
  double alpha_cost() const noexcept { return alpha_cost_; }
  const Eigen::MatrixXd& sigma_K() const noexcept { return sigma_K_; }
  const Eigen::MatrixXd& p_ml() const noexcept { return p_ml_; }
  const Eigen::VectorXd& beta() const noexcept { return beta_; }
  /// Stratum mean on K, l and m zero-based.
  const Eigen::VectorXd& mean(int l, int m) const { return mu_[static_cast<std::size_t>(l * M_ + m)]; }

  /// A stratum is usable when its mean exists and its cell probability is positive.
  bool usable(int l, int m) const {
    return defined_[static_cast<std::size_t>(l * M_ + m)] && p_ml_(m, l) > 0.0;
  }

  Eigen::VectorXd restrict(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx_.size()));
    for (std::size_t a = 0; a < idx_.size(); ++a) out(static_cast<Eigen::Index>(a)) = x(idx_[a]);
    return out;
  }

  /// (mu_m1 - mu_m2)^T Sigma^-1 (x - (mu_m1 + mu_m2)/2) >= log(p_m2/p_m1) + log(alpha) allocates to group 1.
  int classify_two_group(const Eigen::VectorXd& x, CellIndex cell) const {
    if (q_ != 2) throw UsageError("two-group rule needs q = 2");
    const int m = check_cell(cell);
    if (!usable(0, m) || !usable(1, m)) throw UndefinedCell(cell.value());
    const Eigen::VectorXd xk = restrict(x);
    const auto& m1 = mean(0, m);
    const auto& m2 = mean(1, m);
    const double score = (m1 - m2).dot(sigma_inv_ * (xk - 0.5 * (m1 + m2)));
    const double threshold = std::log(p_ml_(m, 1) / p_ml_(m, 0)) + std::log(alpha_cost_);
    return score >= threshold ? 1 : 2;
  }

  /// argmax_l mu_ml^T Sigma^-1 x - mu_ml^T Sigma^-1 mu_ml / 2 + log p_ml + log beta_l,
  /// over groups with positive cell probability; ties go to the smaller group.
  int classify_multi_group(const Eigen::VectorXd& x, CellIndex cell) const {
    const int m = check_cell(cell);
    const Eigen::VectorXd xk = restrict(x);
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < q_; ++l) {
      if (!usable(l, m)) continue;
      const auto& mu = mean(l, m);
      const Eigen::VectorXd a = sigma_inv_ * mu;
      const double score = a.dot(xk) - 0.5 * a.dot(mu) + std::log(p_ml_(m, l)) + std::log(beta_(l));
      if (best < 0 || score > best_score) {
        best = l;
        best_score = score;
      }
    }
    if (best < 0) throw UndefinedCell(cell.value());
    return best + 1;
  }

  /// Two-group rule when q = 2, multi-group rule otherwise.
  int classify(const Eigen::VectorXd& x, CellIndex cell) const {
    return q_ == 2 ? classify_two_group(x, cell) : classify_multi_group(x, cell);
  }

  template <class Range>
  int classify(const Eigen::VectorXd& x, const Range& y) const {
    return classify(x, encode_cell(y));
  }

private:
  int check_cell(CellIndex cell) const {
    if (cell.value() < 1 || cell.value() > M_)
      throw ValidationError("cell " + std::to_string(cell.value()) + " outside 1.." + std::to_string(M_));
    return cell.zero_based();
  }

  VariableSet K_;
  std::vector<int> idx_;
  int q_;
  int M_;
  double alpha_cost_;
  Eigen::MatrixXd p_ml_;
  Eigen::VectorXd beta_;
  Eigen::MatrixXd sigma_K_;
  Eigen::MatrixXd sigma_inv_;
  std::vector<Eigen::VectorXd> mu_;
  std::vector<bool> defined_;
};

struct ClassifierOptions {
  double lambda = 0.0;
  double alpha_cost = 1.0;
};

inline ClassifierModel fit_classifier(const Dataset& ds, const VariableSet& K, const ClassifierOptions& opt = {}) {
  return ClassifierModel(fit_location_model(summarize(ds), opt.lambda), K, opt.alpha_cost);
}

struct CapacityReport {
  double cc = 0;
  int correct = 0;
  int undefined = 0;  ///< observations whose cell had no usable rule (counted wrong)
  int total = 0;
};

/// Proportion of correctly allocated test observations.
inline CapacityReport classification_capacity(const ClassifierModel& model, const Dataset& test) {
  CapacityReport r;
  r.total = test.size();
  for (int i = 0; i < test.size(); ++i) {
    try {
      if (model.classify(test[i].x, CellIndex(test.cell(i) + 1)) == test[i].z) ++r.correct;
    } catch (const UndefinedCell&) {
      ++r.undefined;
    }
  }
  r.cc = static_cast<double>(r.correct) / r.total;
  return r;
}

}  // namespace mixsel
