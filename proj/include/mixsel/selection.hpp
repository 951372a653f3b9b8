#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mixsel/criterion.hpp"
#include "mixsel/data_model.hpp"
#include "mixsel/errors.hpp"
#include "mixsel/estimators.hpp"
#include "mixsel/variable_set.hpp"

namespace mixsel {

/// The thirteen penalty shapes h1..h13. Every ln(x) is evaluated as ln(x + 1)
/// so that h is positive and strictly increasing on {1, 2, ...}.
enum class Penalty { h1 = 1, h2, h3, h4, h5, h6, h7, h8, h9, h10, h11, h12, h13 };

inline constexpr std::array<Penalty, 13> all_penalties = {
    Penalty::h1, Penalty::h2, Penalty::h3,  Penalty::h4,  Penalty::h5,  Penalty::h6, Penalty::h7,
    Penalty::h8, Penalty::h9, Penalty::h10, Penalty::h11, Penalty::h12, Penalty::h13};

inline double penalty_shape(Penalty h, double x) {
  const double lg = std::log(x + 1.0);
  switch (h) {
    case Penalty::h1: return x;
    case Penalty::h2: return std::pow(x, 0.1);
    case Penalty::h3: return std::pow(x, 0.5);
    case Penalty::h4: return std::pow(x, 0.9);
    case Penalty::h5: return std::pow(x, 10.0);
    case Penalty::h6: return lg;
    case Penalty::h7: return std::pow(lg, 0.1);
    case Penalty::h8: return std::pow(lg, 0.5);
    case Penalty::h9: return std::pow(lg, 0.9);
    case Penalty::h10: return x * lg;
    case Penalty::h11: return std::pow(x * lg, 0.1);
    case Penalty::h12: return std::pow(x * lg, 0.5);
    case Penalty::h13: return std::pow(x * lg, 0.9);
  }
  return x;
}

inline std::string to_string(Penalty h) { return "h" + std::to_string(static_cast<int>(h)); }

inline Penalty parse_penalty(std::string_view s) {
  for (auto h : all_penalties)
    if (s == to_string(h)) return h;
  throw UsageError("unknown penalty '" + std::string(s) + "' (expected h1..h13)");
}

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5))
    throw UsageError("alpha=" + std::to_string(alpha) + " outside allowed range ]0, 1/2[");
}

inline void check_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0))
    throw UsageError("beta=" + std::to_string(beta) + " outside allowed range ]0, 1[");
}

/// f_n(i) = n^-alpha / h(i), i one-based; strictly decreasing in i.
inline double penalty_f(int n, int i, double alpha, Penalty h) {
  check_alpha(alpha);
  if (n < 1 || i < 1) throw UsageError("penalty_f: n and i must be >= 1");
  return std::pow(static_cast<double>(n), -alpha) / penalty_shape(h, i);
}

/// g_n(i) = n^-beta h(i), i one-based; strictly increasing in i.
inline double penalty_g(int n, int i, double beta, Penalty h) {
  check_beta(beta);
  if (n < 1 || i < 1) throw UsageError("penalty_g: n and i must be >= 1");
  return std::pow(static_cast<double>(n), -beta) * penalty_shape(h, i);
}

enum class EstimatorKind { empirical, smoothed };

/// Which index the dimension penalty g_n is evaluated at in psi_i.
enum class DimensionIndex {
  variable,  ///< g_n(sigma(i)), the selected variable's own index
  rank,      ///< g_n(i), the position in the ordering
};

struct SelectionConfig {
  double alpha = 0.25;
  double beta = 0.5;
  Penalty penalty = Penalty::h7;
  EstimatorKind estimator = EstimatorKind::empirical;
  double lambda = 0.0;
  DimensionIndex dimension_index = DimensionIndex::variable;

  /// Smoothing parameter actually applied (0 for the empirical estimator).
  double effective_lambda() const { return estimator == EstimatorKind::smoothed ? lambda : 0.0; }

  void validate() const {
    check_alpha(alpha);
    check_beta(beta);
    if (estimator == EstimatorKind::smoothed && !(lambda >= 0.0 && lambda < 1.0))
      throw UsageError("lambda=" + std::to_string(lambda) + " outside allowed range [0, 1[");
  }
};

struct SelectionResult {
  std::vector<int> sigma;          ///< zero-based variables, best first
  int s_hat = 0;                   ///< number of selected variables
  VariableSet selected;            ///< {sigma[0..s_hat-1]}
  std::vector<double> phi;         ///< per variable: xi_{K_i} + f_n(i)
  std::vector<double> psi;         ///< per rank: xi_{J_i} + g_n(.)
  std::vector<double> xi_drop;     ///< per variable: xi_{I \ {i}}
  std::vector<double> xi_nested;   ///< per rank: xi_{J_i}
};

/// Ordering by phi descending; equal values keep the smaller variable first.
inline std::vector<int> order_by_phi(const std::vector<double>& phi) {
  std::vector<int> sigma(phi.size());
  std::iota(sigma.begin(), sigma.end(), 0);
  std::stable_sort(sigma.begin(), sigma.end(), [&](int a, int b) {
    return phi[static_cast<std::size_t>(a)] > phi[static_cast<std::size_t>(b)];
  });
  return sigma;
}

inline std::vector<int> estimate_sigma(const std::vector<double>& xi_drop, const std::vector<double>& penalties) {
  if (xi_drop.size() != penalties.size()) throw ValidationError("estimate_sigma: length mismatch");
  std::vector<double> phi(xi_drop.size());
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = xi_drop[i] + penalties[i];
  return order_by_phi(phi);
}

/// Smallest one-based index attaining min psi.
inline int estimate_s(const std::vector<double>& psi) {
  if (psi.empty()) throw ValidationError("estimate_s: empty input");
  return static_cast<int>(std::min_element(psi.begin(), psi.end()) - psi.begin()) + 1;
}

/// Memoized xi_K over one set of cell parameters.
class CriterionEvaluator {
public:
  explicit CriterionEvaluator(const CellModel& model) : model_(&model) {}

  /// Cells other than `changed_cell` (zero-based) are taken from `shared`, whose
  /// model must agree with `model` on them apart from p_m.
  CriterionEvaluator(const CellModel& model, CellCriterionCache* shared, int changed_cell)
      : model_(&model), shared_(shared), changed_(changed_cell) {}

  double operator()(const VariableSet& K) {
    const auto it = memo_.find(K.mask());
    if (it != memo_.end()) return it->second;
    double xi = 0;
    if (shared_ == nullptr) {
      xi = criterion(*model_, K);
    } else {
      for (int m = 0; m < model_->M; ++m) {
        const double pm = model_->p_m(m);
        if (pm == 0.0 || !model_->defined(m)) continue;
        xi += pm * pm * (m == changed_ ? criterion_cell(*model_, m, K) : shared_->cell(m, K));
      }
    }
    memo_.emplace(K.mask(), xi);
    return xi;
  }

  const CellModel& model() const noexcept { return *model_; }

private:
  const CellModel* model_;
  CellCriterionCache* shared_ = nullptr;
  int changed_ = -1;
  std::unordered_map<std::uint64_t, double> memo_;
};

/// Permutation and dimension estimation on already computed cell parameters; n is the sample size.
inline SelectionResult select_with(CriterionEvaluator& xi, int n, const SelectionConfig& cfg) {
  cfg.validate();
  const int p = xi.model().p;
  if (p < 2) throw ValidationError("variable selection needs p >= 2");
  const VariableSet all = VariableSet::full(p);

  SelectionResult r;
  r.xi_drop.resize(static_cast<std::size_t>(p));
  r.phi.resize(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) {
    VariableSet K = all;
    K.erase(i);
    r.xi_drop[static_cast<std::size_t>(i)] = xi(K);
    r.phi[static_cast<std::size_t>(i)] = r.xi_drop[static_cast<std::size_t>(i)] + penalty_f(n, i + 1, cfg.alpha, cfg.penalty);
  }
  r.sigma = order_by_phi(r.phi);

  r.xi_nested.resize(static_cast<std::size_t>(p));
  r.psi.resize(static_cast<std::size_t>(p));
  VariableSet J;
  for (int i = 0; i < p; ++i) {
    J.insert(r.sigma[static_cast<std::size_t>(i)]);
    r.xi_nested[static_cast<std::size_t>(i)] = xi(J);
    const int at = cfg.dimension_index == DimensionIndex::variable ? r.sigma[static_cast<std::size_t>(i)] + 1 : i + 1;
    r.psi[static_cast<std::size_t>(i)] = r.xi_nested[static_cast<std::size_t>(i)] + penalty_g(n, at, cfg.beta, cfg.penalty);
  }
  r.s_hat = estimate_s(r.psi);
  for (int i = 0; i < r.s_hat; ++i) r.selected.insert(r.sigma[static_cast<std::size_t>(i)]);
  return r;
}

inline SelectionResult select_variables(const Dataset& ds, const SelectionConfig& cfg) {
  cfg.validate();
  if (ds.p() < 2) throw ValidationError("variable selection needs p >= 2");
  const CellEstimates est = estimate(summarize(ds), cfg.effective_lambda());
  CriterionEvaluator xi(est);
  return select_with(xi, ds.size(), cfg);
}

}  // namespace mixsel
