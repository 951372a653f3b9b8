#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mixsel/estimators.hpp"
#include "mixsel/selection.hpp"
#include "mixsel/tuning.hpp"

namespace mixsel {

namespace detail {

inline nlohmann::json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline nlohmann::json to_json(const Eigen::MatrixXd& a) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const Eigen::VectorXd row = a.row(r).transpose();
    rows.push_back(to_json(row));
  }
  return rows;
}

inline std::vector<int> one_based(const std::vector<int>& v) {
  std::vector<int> out(v);
  for (auto& x : out) ++x;
  return out;
}

}  // namespace detail

/// Cell estimates keyed by one-based cell ("1".."M"); empty cells carry "empty": true.
inline nlohmann::json estimates_to_json(const CellEstimates& e) {
  using nlohmann::json;
  json cells = json::array();
  for (int m = 0; m < e.M; ++m) {
    json c;
    c["cell"] = m + 1;
    c["N_m"] = e.n_m(m);
    c["p_m"] = e.p_m(m);
    c["empty"] = !e.defined(m);
    std::vector<double> plm(static_cast<std::size_t>(e.q));
    for (int l = 0; l < e.q; ++l) plm[static_cast<std::size_t>(l)] = e.p_lm(l, m);
    c["p_l_given_m"] = plm;
    if (e.defined(m)) {
      c["mu_m"] = detail::to_json(e.mu_m[static_cast<std::size_t>(m)]);
      c["V_m"] = detail::to_json(e.V_m[static_cast<std::size_t>(m)]);
    }
    json mu_lm = json::array();
    for (int l = 0; l < e.q; ++l)
      mu_lm.push_back(e.defined(l, m) ? detail::to_json(e.mu(l, m)) : json(nullptr));
    c["mu_lm"] = mu_lm;
    cells.push_back(c);
  }
  return json{{"n", e.n}, {"p", e.p}, {"q", e.q}, {"M", e.M}, {"lambda", e.lambda}, {"cells", cells}};
}

/// Variables and ranks are one-based.
inline nlohmann::json selection_to_json(const SelectionResult& r) {
  return nlohmann::json{{"sigma", detail::one_based(r.sigma)},
                        {"s_hat", r.s_hat},
                        {"selected", detail::one_based(r.selected.indices())},
                        {"phi", r.phi},
                        {"psi", r.psi},
                        {"xi_drop", r.xi_drop},
                        {"xi_nested", r.xi_nested}};
}

inline nlohmann::json config_to_json(const SelectionConfig& c) {
  return nlohmann::json{{"alpha", c.alpha},
                        {"beta", c.beta},
                        {"penalty", to_string(c.penalty)},
                        {"estimator", c.estimator == EstimatorKind::empirical ? "empirical" : "smoothed"},
                        {"lambda", c.effective_lambda()},
                        {"dimension_index", c.dimension_index == DimensionIndex::variable ? "variable" : "rank"}};
}

}  // namespace mixsel
