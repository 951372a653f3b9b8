#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <unordered_map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mixsel/errors.hpp"
#include "mixsel/estimators.hpp"
#include "mixsel/variable_set.hpp"

namespace mixsel {

inline constexpr double max_condition_number = 1e12;
inline constexpr double default_rank_tolerance = 1e-8;

/// Exact population parameters, same layout as CellEstimates.
struct PopulationSpec : CellModel {
  /// Builds p_{l|m}, mu_m and V_m = W_m + B_m from a location-type description:
  /// cell probabilities, group-in-cell probabilities (q×M), stratum means
  /// (index l*M + m) and one within-stratum covariance per cell.
  static PopulationSpec from_strata(const Eigen::VectorXd& cell_probs, const Eigen::MatrixXd& group_given_cell,
                                    const std::vector<Eigen::VectorXd>& stratum_means,
                                    const std::vector<Eigen::MatrixXd>& within) {
    PopulationSpec s;
    s.M = static_cast<int>(cell_probs.size());
    s.q = static_cast<int>(group_given_cell.rows());
    s.p = stratum_means.empty() ? 0 : static_cast<int>(stratum_means.front().size());
    if (group_given_cell.cols() != s.M || static_cast<int>(stratum_means.size()) != s.q * s.M ||
        static_cast<int>(within.size()) != s.M)
      throw ValidationError("population spec: inconsistent shapes");
    if (std::abs(cell_probs.sum() - 1.0) > 1e-12) throw ValidationError("population spec: p_m must sum to 1");
    s.p_m = cell_probs;
    s.p_lm = group_given_cell;
    s.mu_lm = stratum_means;
    s.mu_m.assign(static_cast<std::size_t>(s.M), Eigen::VectorXd::Zero(s.p));
    s.V_m.resize(static_cast<std::size_t>(s.M));
    s.cell_defined.assign(static_cast<std::size_t>(s.M), true);
    s.stratum_defined.assign(static_cast<std::size_t>(s.q * s.M), true);
    for (int m = 0; m < s.M; ++m) {
      if (std::abs(group_given_cell.col(m).sum() - 1.0) > 1e-12)
        throw ValidationError("population spec: p_{l|m} must sum to 1 in cell " + std::to_string(m + 1));
      auto& mu = s.mu_m[static_cast<std::size_t>(m)];
      for (int l = 0; l < s.q; ++l) mu += group_given_cell(l, m) * s.mu(l, m);
      Eigen::MatrixXd V = within[static_cast<std::size_t>(m)];
      for (int l = 0; l < s.q; ++l) {
        const Eigen::VectorXd dev = s.mu(l, m) - mu;
        const Eigen::MatrixXd outer = dev * dev.transpose();
        V += group_given_cell(l, m) * outer;
      }
      s.V_m[static_cast<std::size_t>(m)] = V;
    }
    return s;
  }
};

namespace detail {

inline Eigen::MatrixXd submatrix(const Eigen::MatrixXd& V, const std::vector<int>& idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd S(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) S(a, b) = V(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
  return S;
}

/// Cholesky factor of the K-block of V, rejected when the block is not
/// positive definite or its estimated condition number exceeds the guard.
struct BlockFactor {
  std::vector<int> idx;
  Eigen::LLT<Eigen::MatrixXd> llt;
};

inline BlockFactor factor_block(const Eigen::MatrixXd& V, const VariableSet& K, int cell) {
  BlockFactor f{K.indices(), {}};
  f.llt.compute(submatrix(V, f.idx));
  const double rcond = f.llt.info() == Eigen::Success ? f.llt.rcond() : 0.0;
  if (!(rcond > 0) || 1.0 / rcond > max_condition_number)
    throw SingularSubmatrix(cell, K.to_string(), rcond > 0 ? 1.0 / rcond : std::numeric_limits<double>::infinity());
  return f;
}

inline Eigen::MatrixXd guarded_inverse(const Eigen::MatrixXd& S, int cell, const VariableSet& K) {
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (!(rcond > 0) || 1.0 / rcond > max_condition_number)
    throw SingularSubmatrix(cell, K.to_string(), rcond > 0 ? 1.0 / rcond : std::numeric_limits<double>::infinity());
  return llt.solve(Eigen::MatrixXd::Identity(S.rows(), S.cols()));
}

}  // namespace detail

/// A_K^T (A_K V A_K^T)^{-1} A_K: the inverse of V's K-block scattered back
/// into a p×p matrix, zero outside rows and columns K. `cell` (one-based) only
/// labels the error.
inline Eigen::MatrixXd q_operator(const Eigen::MatrixXd& V, const VariableSet& K, int cell = 0) {
  const auto p = V.rows();
  if (K.extent() > p) throw ValidationError("variable set " + K.to_string() + " exceeds p=" + std::to_string(p));
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(p, p);
  if (K.empty()) return Q;
  const auto f = detail::factor_block(V, K, cell);
  const auto k = static_cast<Eigen::Index>(f.idx.size());
  const Eigen::MatrixXd inv = f.llt.solve(Eigen::MatrixXd::Identity(k, k));
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) Q(f.idx[static_cast<std::size_t>(a)], f.idx[static_cast<std::size_t>(b)]) = inv(a, b);
  return Q;
}

/// xi_{K|m} = sum_l p_{l|m}^2 ||(I - V_m Q_{K|m})(mu_{l,m} - mu_m)||^2, m zero-based.
/// Q is applied through the block factorisation rather than formed.
inline double criterion_cell(const CellModel& model, int m, const VariableSet& K) {
  if (m < 0 || m >= model.M) throw ValidationError("cell " + std::to_string(m + 1) + " out of range");
  if (!model.defined(m)) throw ValidationError("cell " + std::to_string(m + 1) + " is empty");
  if (K.extent() > model.p) throw ValidationError("variable set " + K.to_string() + " exceeds p=" + std::to_string(model.p));
  const auto& V = model.V_m[static_cast<std::size_t>(m)];
  const auto& centre = model.mu_m[static_cast<std::size_t>(m)];
  std::optional<detail::BlockFactor> f;
  if (!K.empty()) f = detail::factor_block(V, K, m + 1);
  const auto k = static_cast<Eigen::Index>(K.size());
  Eigen::VectorXd dev(model.p), dev_K(k), residual(model.p);
  double xi = 0;
  for (int l = 0; l < model.q; ++l) {
    const double pl = model.p_lm(l, m);
    if (pl == 0.0 || !model.defined(l, m)) continue;
    dev.noalias() = model.mu(l, m) - centre;
    residual = dev;
    if (f) {
      for (Eigen::Index a = 0; a < k; ++a) dev_K(a) = dev(f->idx[static_cast<std::size_t>(a)]);
      const Eigen::VectorXd y = f->llt.solve(dev_K);  // Q (mu_l - mu) restricted to K
      for (Eigen::Index a = 0; a < k; ++a) residual.noalias() -= y(a) * V.col(f->idx[static_cast<std::size_t>(a)]);
    }
    xi += pl * pl * residual.squaredNorm();
  }
  return xi;
}

/// xi_K = sum_m p_m^2 xi_{K|m}; empty cells contribute nothing.
inline double criterion(const CellModel& model, const VariableSet& K) {
  double xi = 0;
  for (int m = 0; m < model.M; ++m) {
    const double pm = model.p_m(m);
    if (pm == 0.0 || !model.defined(m)) continue;
    xi += pm * pm * criterion_cell(model, m, K);
  }
  return xi;
}

/// Thread-safe memo of xi_{K|m} for one model. Leave-one-out samples share
/// every cell but one with the full sample, so their evaluations reuse it.
class CellCriterionCache {
public:
  explicit CellCriterionCache(const CellModel& model) : model_(&model) {}

  const CellModel& model() const noexcept { return *model_; }

  /// Throws SingularSubmatrix again for a cached failure.
  double cell(int m, const VariableSet& K) {
    const std::uint64_t key = K.mask() * 64u + static_cast<std::uint64_t>(m);
    {
      std::lock_guard lock(mutex_);
      const auto it = memo_.find(key);
      if (it != memo_.end()) {
        if (std::isnan(it->second)) throw SingularSubmatrix(m + 1, K.to_string(), std::numeric_limits<double>::infinity());
        return it->second;
      }
    }
    double xi = std::numeric_limits<double>::quiet_NaN();
    try {
      xi = criterion_cell(*model_, m, K);
    } catch (const SingularSubmatrix&) {
      std::lock_guard lock(mutex_);
      memo_.emplace(key, xi);
      throw;
    }
    std::lock_guard lock(mutex_);
    memo_.emplace(key, xi);
    return xi;
  }

private:
  const CellModel* model_;
  std::mutex mutex_;
  std::unordered_map<std::uint64_t, double> memo_;
};

/// Between-groups covariance B_m = sum_l p_{l|m} (mu_{l,m} - mu_m)(mu_{l,m} - mu_m)^T.
inline Eigen::MatrixXd between_covariance(const CellModel& model, int m) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(model.p, model.p);
  for (int l = 0; l < model.q; ++l) {
    if (model.p_lm(l, m) == 0.0 || !model.defined(l, m)) continue;
    const Eigen::VectorXd dev = model.mu(l, m) - model.mu_m[static_cast<std::size_t>(m)];
    const Eigen::MatrixXd outer = dev * dev.transpose();
    B += model.p_lm(l, m) * outer;
  }
  return B;
}

/// Union over cells of the supports of the eigenvectors of V_m^{-1} B_m with
/// non-negligible eigenvalue. Eigenvalues of V^{-1}B are dimensionless, so the
/// cut-off is rank_tolerance * max(largest eigenvalue, 1).
inline VariableSet population_irrelevant_set(const CellModel& spec, double rank_tolerance = default_rank_tolerance) {
  VariableSet I1;
  for (int m = 0; m < spec.M; ++m) {
    if (spec.p_m(m) == 0.0 || !spec.defined(m)) continue;
    const auto& V = spec.V_m[static_cast<std::size_t>(m)];
    // condition guard on the full covariance
    detail::guarded_inverse(V, m + 1, VariableSet::full(spec.p));
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(between_covariance(spec, m), V);
    const auto& values = ges.eigenvalues();
    const double cut = rank_tolerance * std::max(values.maxCoeff(), 1.0);
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      if (values(i) <= cut) continue;
      Eigen::VectorXd v = ges.eigenvectors().col(i);
      v.normalize();
      for (int k = 0; k < spec.p; ++k)
        if (std::abs(v(k)) > rank_tolerance) I1.insert(k);
    }
  }
  return I1;
}

}  // namespace mixsel
