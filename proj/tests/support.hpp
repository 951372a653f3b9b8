#pragma once

// Fixtures and brute-force reference computations shared by the unit tests.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mixsel/mixsel.hpp"

namespace testutil {

using mixsel::Dataset;
using mixsel::MixedObservation;

inline MixedObservation obs(std::vector<double> x, std::vector<std::uint8_t> y, int z) {
  MixedObservation o;
  o.x = Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  o.y = std::move(y);
  o.z = z;
  return o;
}

/// Gaussian x, uniform y and z; labels cover 1..q when n >= q.
inline Dataset random_dataset(std::mt19937_64& rng, int p, int d, int q, int n) {
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin;
  std::uniform_int_distribution<int> label(1, q);
  std::vector<MixedObservation> all;
  for (int i = 0; i < n; ++i) {
    MixedObservation o;
    o.x.resize(p);
    for (int j = 0; j < p; ++j) o.x(j) = 3.0 * normal(rng) + j;
    for (int j = 0; j < d; ++j) o.y.push_back(coin(rng) ? 1 : 0);
    o.z = i < q ? i + 1 : label(rng);
    all.push_back(std::move(o));
  }
  return Dataset(p, d, q, std::move(all));
}

/// Straight per-observation sums, no shared code with the library estimators.
struct NaiveEstimates {
  std::vector<double> p_m;
  std::vector<std::vector<double>> p_lm;  // [m][l]
  std::vector<Eigen::VectorXd> mu_m;
  std::vector<std::vector<Eigen::VectorXd>> mu_lm;  // [m][l]
  std::vector<Eigen::MatrixXd> V_m;
  std::vector<double> mass;
};

/// Weighted estimates with weight w(m, U_i); lambda = 0 gives the empirical ones.
inline NaiveEstimates naive_estimates(const Dataset& ds, double lambda) {
  const int M = ds.cells(), p = ds.p(), q = ds.q(), n = ds.size();
  auto w = [&](int m, int k) {
    int dist = 0;
    for (int j = 0; j < ds.d(); ++j) dist += ((m >> j) & 1) != ((k >> j) & 1);
    double v = 1;
    for (int t = 0; t < dist; ++t) v *= lambda;
    return v;
  };
  NaiveEstimates e;
  e.p_m.assign(M, 0);
  e.mass.assign(M, 0);
  e.p_lm.assign(M, std::vector<double>(q, 0));
  e.mu_m.assign(M, Eigen::VectorXd::Zero(p));
  e.mu_lm.assign(M, std::vector<Eigen::VectorXd>(q, Eigen::VectorXd::Zero(p)));
  e.V_m.assign(M, Eigen::MatrixXd::Zero(p, p));
  double total = 0;
  for (int m = 0; m < M; ++m) {
    std::vector<double> gmass(q, 0);
    for (int i = 0; i < n; ++i) {
      const double wi = w(m, ds.cell(i));
      e.mass[m] += wi;
      gmass[ds.group(i)] += wi;
      e.mu_m[m] += wi * ds[i].x;
      e.mu_lm[m][ds.group(i)] += wi * ds[i].x;
    }
    total += e.mass[m];
    if (e.mass[m] == 0) continue;
    e.mu_m[m] /= e.mass[m];
    for (int l = 0; l < q; ++l) {
      e.p_lm[m][l] = gmass[l] / e.mass[m];
      if (gmass[l] > 0) e.mu_lm[m][l] /= gmass[l];
    }
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd dev = ds[i].x - e.mu_m[m];
      e.V_m[m] += w(m, ds.cell(i)) * dev * dev.transpose();
    }
    e.V_m[m] /= e.mass[m];
  }
  for (int m = 0; m < M; ++m) e.p_m[m] = e.mass[m] / total;
  return e;
}

/// Random symmetric positive definite matrix with eigenvalues in [0.5, 3].
inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, int p) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> eig(0.5, 3.0);
  Eigen::MatrixXd A(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) A(i, j) = normal(rng);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::MatrixXd Q = qr.householderQ();
  Eigen::VectorXd lambda(p);
  for (int i = 0; i < p; ++i) lambda(i) = eig(rng);
  return Q * lambda.asDiagonal() * Q.transpose();
}

/// xi_{K|m} through the Schur complement: the residual (I - V Q_K) delta vanishes
/// on K and equals delta_R - V_RK V_KK^{-1} delta_K on R = complement of K.
inline double schur_criterion_cell(const Eigen::MatrixXd& V, const std::vector<Eigen::VectorXd>& dev,
                                   const std::vector<double>& weight, const std::vector<int>& K) {
  const int p = static_cast<int>(V.rows());
  std::vector<int> R;
  for (int j = 0; j < p; ++j)
    if (std::find(K.begin(), K.end(), j) == K.end()) R.push_back(j);
  const int k = static_cast<int>(K.size()), r = static_cast<int>(R.size());
  Eigen::MatrixXd VKK(k, k), VRK(r, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) VKK(a, b) = V(K[a], K[b]);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < k; ++b) VRK(a, b) = V(R[a], K[b]);
  double xi = 0;
  for (std::size_t l = 0; l < dev.size(); ++l) {
    Eigen::VectorXd dK(k), dR(r);
    for (int a = 0; a < k; ++a) dK(a) = dev[l](K[a]);
    for (int a = 0; a < r; ++a) dR(a) = dev[l](R[a]);
    const Eigen::VectorXd res = k > 0 ? Eigen::VectorXd(dR - VRK * VKK.partialPivLu().solve(dK)) : dR;
    xi += weight[l] * weight[l] * res.squaredNorm();
  }
  return xi;
}

/// Population with a planted adequate set per cell: stratum deviations are
/// delta_l = W a_l with every a_l supported on S_m, so V_m^{-1} delta_l is
/// supported on S_m too. Returns the population and the union of the S_m.
struct PlantedPopulation {
  mixsel::PopulationSpec spec;
  mixsel::VariableSet support;
};

inline PlantedPopulation planted_population(std::mt19937_64& rng, int p, int q, int d) {
  const int M = 1 << d;
  std::uniform_real_distribution<double> prob(0.2, 1.0), coef(0.3, 1.5), loc(-2, 2);
  std::bernoulli_distribution coin;
  Eigen::VectorXd cell_probs(M);
  for (int m = 0; m < M; ++m) cell_probs(m) = prob(rng);
  cell_probs /= cell_probs.sum();
  Eigen::MatrixXd group_given_cell(q, M);
  std::vector<Eigen::VectorXd> means(static_cast<std::size_t>(q * M));
  std::vector<Eigen::MatrixXd> within;
  mixsel::VariableSet all_support;
  for (int m = 0; m < M; ++m) {
    Eigen::VectorXd pl(q);
    for (int l = 0; l < q; ++l) pl(l) = prob(rng);
    pl /= pl.sum();
    group_given_cell.col(m) = pl;
    mixsel::VariableSet S;
    for (int j = 0; j < p; ++j)
      if (coin(rng)) S.insert(j);
    if (q == 1) S = mixsel::VariableSet();
    const Eigen::MatrixXd W = random_spd(rng, p);
    within.push_back(W);
    std::vector<Eigen::VectorXd> a(static_cast<std::size_t>(q), Eigen::VectorXd::Zero(p));
    for (int l = 0; l < q; ++l)
      for (int j : S.indices()) a[l](j) = (coin(rng) ? 1 : -1) * coef(rng);
    Eigen::VectorXd centre = Eigen::VectorXd::Zero(p);
    for (int l = 0; l < q; ++l) centre += pl(l) * a[l];
    Eigen::VectorXd c(p);
    for (int j = 0; j < p; ++j) c(j) = loc(rng);
    for (int l = 0; l < q; ++l) means[static_cast<std::size_t>(l * M + m)] = c + W * (a[l] - centre);
    for (int j : S.indices()) {
      bool any = false;
      for (int l = 0; l < q; ++l) any = any || std::abs(a[l](j) - centre(j)) > 1e-9;
      if (any) all_support.insert(j);
    }
  }
  return {mixsel::PopulationSpec::from_strata(cell_probs, group_given_cell, means, within), all_support};
}

}  // namespace testutil
