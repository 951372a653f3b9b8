#pragma once

#include <bit>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixsel/data_model.hpp"
#include "mixsel/errors.hpp"

namespace mixsel {

/// Count, coordinate sum and scatter (about the stratum's own mean) of a set of observations.
struct StratumMoments {
  double count = 0;
  Eigen::VectorXd sum;
  Eigen::MatrixXd scatter;

  Eigen::VectorXd mean() const { return sum / count; }
};

/// Sufficient statistics of a sample, per cell and per (group, cell) stratum.
/// Every estimator in the library is a function of this summary.
struct SampleSummary {
  int n = 0;
  int p = 0;
  int q = 0;
  int M = 0;
  std::vector<StratumMoments> cell;     ///< size M
  std::vector<StratumMoments> stratum;  ///< size q*M, index l*M + m

  const StratumMoments& at(int l, int m) const { return stratum[static_cast<std::size_t>(l * M + m)]; }
};

namespace detail {

inline void accumulate_scatter(StratumMoments& s, const Eigen::VectorXd& x, Eigen::VectorXd& centre,
                               Eigen::VectorXd& tmp) {
  tmp.noalias() = x - centre;
  s.scatter.selfadjointView<Eigen::Lower>().rankUpdate(tmp);
}

}  // namespace detail

/// Two-pass per-stratum moments. `skip` removes one observation (leave-one-out).
inline SampleSummary summarize(const Dataset& ds, int skip = -1) {
  SampleSummary s;
  s.p = ds.p();
  s.q = ds.q();
  s.M = ds.cells();
  const int p = s.p;
  auto blank = [p] {
    StratumMoments m;
    m.sum = Eigen::VectorXd::Zero(p);
    m.scatter = Eigen::MatrixXd::Zero(p, p);
    return m;
  };
  s.cell.assign(static_cast<std::size_t>(s.M), blank());
  s.stratum.assign(static_cast<std::size_t>(s.q * s.M), blank());

  for (int i = 0; i < ds.size(); ++i) {
    if (i == skip) continue;
    const int m = ds.cell(i);
    const int l = ds.group(i);
    const auto& x = ds[i].x;
    auto& c = s.cell[static_cast<std::size_t>(m)];
    auto& g = s.stratum[static_cast<std::size_t>(l * s.M + m)];
    c.count += 1;
    c.sum += x;
    g.count += 1;
    g.sum += x;
    ++s.n;
  }
  std::vector<Eigen::VectorXd> cell_mean(static_cast<std::size_t>(s.M)), strat_mean(s.stratum.size());
  for (std::size_t m = 0; m < s.cell.size(); ++m)
    if (s.cell[m].count > 0) cell_mean[m] = s.cell[m].mean();
  for (std::size_t k = 0; k < s.stratum.size(); ++k)
    if (s.stratum[k].count > 0) strat_mean[k] = s.stratum[k].mean();

  Eigen::VectorXd tmp(p);
  for (int i = 0; i < ds.size(); ++i) {
    if (i == skip) continue;
    const int m = ds.cell(i);
    const auto k = static_cast<std::size_t>(ds.group(i) * s.M + m);
    detail::accumulate_scatter(s.cell[static_cast<std::size_t>(m)], ds[i].x, cell_mean[static_cast<std::size_t>(m)], tmp);
    detail::accumulate_scatter(s.stratum[k], ds[i].x, strat_mean[k], tmp);
  }
  for (auto* group : {&s.cell, &s.stratum})
    for (auto& st : *group) st.scatter.triangularView<Eigen::StrictlyUpper>() = st.scatter.transpose();
  if (s.n == 0) throw ValidationError("no observations");
  return s;
}

/// Per-cell parameters entering the criterion: p_m, p_{l|m}, mu_m, mu_{l,m}, V_m.
/// Shared by sample estimates and exact population specifications.
struct CellModel {
  int p = 0;
  int q = 0;
  int M = 0;
  Eigen::VectorXd p_m;                ///< M
  Eigen::MatrixXd p_lm;               ///< q×M, P(Z=l | U=m)
  std::vector<Eigen::VectorXd> mu_m;  ///< M
  std::vector<Eigen::VectorXd> mu_lm; ///< q*M, index l*M + m
  std::vector<Eigen::MatrixXd> V_m;   ///< M
  std::vector<bool> cell_defined;     ///< moments of cell m exist
  std::vector<bool> stratum_defined;  ///< mu_{l,m} exists

  const Eigen::VectorXd& mu(int l, int m) const { return mu_lm[static_cast<std::size_t>(l * M + m)]; }
  bool defined(int m) const { return cell_defined[static_cast<std::size_t>(m)]; }
  bool defined(int l, int m) const { return stratum_defined[static_cast<std::size_t>(l * M + m)]; }
};

/// Estimated cell parameters together with the raw counts they came from.
struct CellEstimates : CellModel {
  int n = 0;
  Eigen::VectorXd n_m;   ///< N_m
  Eigen::MatrixXd n_lm;  ///< N_{l,m}
  double lambda = 0;     ///< smoothing parameter, 0 for empirical
};

struct SmoothingWeights {
  double lambda = 0;
  Eigen::MatrixXi D;  ///< Hamming distance between decoded cells
  Eigen::MatrixXd w;  ///< lambda^D, with 0^0 = 1
};

inline SmoothingWeights smoothing_weights(int d, double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0))
    throw UsageError("smoothing parameter lambda=" + std::to_string(lambda) + " outside [0, 1)");
  const int M = cell_count(d);
  SmoothingWeights sw;
  sw.lambda = lambda;
  sw.D.resize(M, M);
  sw.w.resize(M, M);
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < M; ++k) {
      const int dist = std::popcount(static_cast<unsigned>(m ^ k));
      sw.D(m, k) = dist;
      sw.w(m, k) = dist == 0 ? 1.0 : std::pow(lambda, dist);
    }
  return sw;
}

namespace detail {

inline CellEstimates blank_estimates(const SampleSummary& s) {
  CellEstimates e;
  e.p = s.p;
  e.q = s.q;
  e.M = s.M;
  e.n = s.n;
  e.p_m = Eigen::VectorXd::Zero(s.M);
  e.p_lm = Eigen::MatrixXd::Zero(s.q, s.M);
  e.mu_m.assign(static_cast<std::size_t>(s.M), Eigen::VectorXd());
  e.mu_lm.assign(static_cast<std::size_t>(s.q * s.M), Eigen::VectorXd());
  e.V_m.assign(static_cast<std::size_t>(s.M), Eigen::MatrixXd());
  e.cell_defined.assign(static_cast<std::size_t>(s.M), false);
  e.stratum_defined.assign(static_cast<std::size_t>(s.q * s.M), false);
  e.n_m.resize(s.M);
  e.n_lm.resize(s.q, s.M);
  for (int m = 0; m < s.M; ++m) {
    e.n_m(m) = s.cell[static_cast<std::size_t>(m)].count;
    for (int l = 0; l < s.q; ++l) e.n_lm(l, m) = s.at(l, m).count;
  }
  return e;
}

}  // namespace detail

/// Cell frequencies, group-in-cell frequencies, cell and stratum means, and the
/// biased (1/N_m) within-cell covariance. Empty cells are flagged undefined with p_m = 0.
inline CellEstimates estimate_empirical(const SampleSummary& s) {
  CellEstimates e = detail::blank_estimates(s);
  const double n = static_cast<double>(s.n);
  for (int m = 0; m < s.M; ++m) {
    const auto& c = s.cell[static_cast<std::size_t>(m)];
    e.p_m(m) = c.count / n;
    if (c.count == 0) continue;
    e.cell_defined[static_cast<std::size_t>(m)] = true;
    e.mu_m[static_cast<std::size_t>(m)] = c.sum / c.count;
    e.V_m[static_cast<std::size_t>(m)] = c.scatter / c.count;
    for (int l = 0; l < s.q; ++l) {
      const auto& g = s.at(l, m);
      e.p_lm(l, m) = g.count / c.count;
      if (g.count == 0) continue;
      e.stratum_defined[static_cast<std::size_t>(l * s.M + m)] = true;
      e.mu_lm[static_cast<std::size_t>(l * s.M + m)] = g.sum / g.count;
    }
  }
  return e;
}

inline CellEstimates estimate_empirical(const Dataset& ds) { return estimate_empirical(summarize(ds)); }

/// Kernel-smoothed estimates: every cell borrows counts and moments from the
/// others with weight lambda^D(m,j). At lambda = 0 this reproduces
/// estimate_empirical bit for bit on non-empty cells.
inline CellEstimates estimate_smoothed(const SampleSummary& s, const SmoothingWeights& sw) {
  if (sw.w.rows() != s.M) throw UsageError("smoothing weights do not match the number of cells");
  CellEstimates e = detail::blank_estimates(s);
  e.lambda = sw.lambda;
  const int M = s.M;

  Eigen::VectorXd mass(M);  // sum_j w(m,j) N_j
  for (int m = 0; m < M; ++m) {
    double acc = 0;
    for (int j = 0; j < M; ++j)
      if (sw.w(m, j) != 0.0) acc += sw.w(m, j) * s.cell[static_cast<std::size_t>(j)].count;
    mass(m) = acc;
  }
  const double total = mass.sum();
  if (!(total > 0)) throw ValidationError("smoothed cell masses are all zero");

  Eigen::VectorXd dev(s.p);
  Eigen::MatrixXd outer(s.p, s.p);
  for (int m = 0; m < M; ++m) {
    e.p_m(m) = mass(m) / total;
    if (mass(m) == 0.0) {
      if (sw.lambda > 0) throw ValidationError("smoothed mass of cell " + std::to_string(m + 1) + " is zero");
      continue;
    }
    e.cell_defined[static_cast<std::size_t>(m)] = true;

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(s.p);
    for (int j = 0; j < M; ++j) {
      const auto& c = s.cell[static_cast<std::size_t>(j)];
      if (sw.w(m, j) != 0.0 && c.count > 0) sum += sw.w(m, j) * c.sum;
    }
    Eigen::VectorXd mu = sum / mass(m);

    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(s.p, s.p);
    for (int j = 0; j < M; ++j) {
      const auto& c = s.cell[static_cast<std::size_t>(j)];
      if (sw.w(m, j) == 0.0 || c.count == 0) continue;
      dev.noalias() = c.sum / c.count - mu;
      outer.noalias() = dev * dev.transpose();  // exact symmetry needs the product formed before scaling
      V += sw.w(m, j) * (c.scatter + c.count * outer);
    }
    e.V_m[static_cast<std::size_t>(m)] = V / mass(m);
    e.mu_m[static_cast<std::size_t>(m)] = std::move(mu);

    for (int l = 0; l < s.q; ++l) {
      double gmass = 0;
      Eigen::VectorXd gsum = Eigen::VectorXd::Zero(s.p);
      for (int j = 0; j < M; ++j) {
        const auto& g = s.at(l, j);
        if (sw.w(m, j) == 0.0 || g.count == 0) continue;
        gmass += sw.w(m, j) * g.count;
        gsum += sw.w(m, j) * g.sum;
      }
      e.p_lm(l, m) = gmass / mass(m);
      if (gmass == 0.0) continue;
      e.stratum_defined[static_cast<std::size_t>(l * M + m)] = true;
      e.mu_lm[static_cast<std::size_t>(l * M + m)] = gsum / gmass;
    }
  }
  return e;
}

inline CellEstimates estimate_smoothed(const SampleSummary& s, double lambda) {
  int d = std::countr_zero(static_cast<unsigned>(s.M));
  return estimate_smoothed(s, smoothing_weights(d, lambda));
}

inline CellEstimates estimate_smoothed(const Dataset& ds, double lambda) {
  return estimate_smoothed(summarize(ds), smoothing_weights(ds.d(), lambda));
}

/// Estimates chosen by lambda: 0 means empirical.
inline CellEstimates estimate(const SampleSummary& s, double lambda) {
  return lambda == 0.0 ? estimate_empirical(s) : estimate_smoothed(s, lambda);
}

/// Pooled within-(group, cell) covariance (1/n) sum_i (X_i - mu_{Z_i,U_i})(X_i - mu_{Z_i,U_i})^T.
inline Eigen::MatrixXd pooled_within_covariance(const SampleSummary& s, const CellModel& est) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(s.p, s.p);
  Eigen::VectorXd dev(s.p);
  Eigen::MatrixXd outer(s.p, s.p);
  for (int l = 0; l < s.q; ++l)
    for (int m = 0; m < s.M; ++m) {
      const auto& g = s.at(l, m);
      if (g.count == 0) continue;
      if (!est.defined(l, m))
        throw ValidationError("stratum (group " + std::to_string(l + 1) + ", cell " + std::to_string(m + 1) +
                              ") has observations but no mean");
      dev.noalias() = g.sum / g.count - est.mu(l, m);
      outer.noalias() = dev * dev.transpose();
      S += g.scatter + g.count * outer;
    }
  return S / static_cast<double>(s.n);
}

inline Eigen::MatrixXd pooled_within_covariance(const Dataset& ds, const CellModel& est) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(ds.p(), ds.p());
  for (int i = 0; i < ds.size(); ++i) {
    const int l = ds.group(i);
    const int m = ds.cell(i);
    if (!est.defined(l, m))
      throw ValidationError("stratum (group " + std::to_string(l + 1) + ", cell " + std::to_string(m + 1) +
                            ") has observations but no mean");
    const Eigen::VectorXd dev = ds[i].x - est.mu(l, m);
    S += dev * dev.transpose();
  }
  return S / static_cast<double>(ds.size());
}

}  // namespace mixsel
