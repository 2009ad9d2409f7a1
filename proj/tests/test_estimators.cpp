#include <cmath>

#include "ddd/estimators.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace ddd;
using namespace ddd::testhelpers;

namespace {

// 12-unit covariate panel: three units in each of the four (s,q) cells of a
// two-cohort design, used by the term-by-term oracles below.
PanelDataset twelve_unit_panel() {
  std::vector<std::tuple<EnablingPeriod, int, std::vector<double>>> units = {
      {EnablingPeriod::at(2), 1, {1.0, 4.0}},   {EnablingPeriod::at(2), 1, {2.0, 5.5}},
      {EnablingPeriod::at(2), 1, {0.5, 3.2}},   {EnablingPeriod::at(2), 0, {1.5, 2.5}},
      {EnablingPeriod::at(2), 0, {0.8, 2.1}},   {EnablingPeriod::at(2), 0, {2.2, 3.0}},
      {EnablingPeriod::never(), 1, {1.0, 1.8}}, {EnablingPeriod::never(), 1, {0.2, 1.4}},
      {EnablingPeriod::never(), 1, {1.9, 2.6}}, {EnablingPeriod::never(), 0, {0.7, 1.1}},
      {EnablingPeriod::never(), 0, {1.3, 1.6}}, {EnablingPeriod::never(), 0, {2.0, 2.9}},
  };
  std::vector<std::vector<double>> x = {{0.4},  {-0.8}, {1.2}, {0.9},
                                        {-0.2}, {1.6},  {0.3}, {-1.1},
                                        {0.7},  {1.4},  {-0.5}, {0.1}};
  return make_panel(units, 1, x);
}

// Independent spreadsheet-style recomputation of the weighted core: plain
// loops over units, one comparison-cell term at a time, using only the
// fitted nuisances' predict() interfaces.
double oracle_weighted(const PanelDataset& data, const NuisanceBundle& bundle,
                       bool use_reg, bool use_ps) {
  const int n = data.n();
  const double signs[3] = {+1.0, +1.0, -1.0};
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    const CellSpec& cell = bundle.cells[c];
    // Treated weight: normalized indicator of (g, 1).
    double trt_mean = 0;
    for (int i = 0; i < n; ++i)
      trt_mean += (data.S(i) == EnablingPeriod::at(bundle.g) && data.Q(i) == 1) ? 1.0 : 0.0;
    trt_mean /= n;
    // Comparison weight: Hajek-normalized odds over the cell when the
    // propensity model is in play, exactly zero otherwise (RA).
    std::vector<double> wc(n, 0.0);
    double wc_mean = 0;
    for (int i = 0; i < n; ++i) {
      if (use_ps && data.S(i) == cell.s && data.Q(i) == cell.q) {
        double p = bundle.ps[c].predict(data.covariates().row(i).transpose());
        wc[i] = p / (1.0 - p);
      }
      wc_mean += wc[i];
    }
    wc_mean /= n;
    double term = 0;
    for (int i = 0; i < n; ++i) {
      double w_trt =
          (data.S(i) == EnablingPeriod::at(bundle.g) && data.Q(i) == 1 ? 1.0 : 0.0) /
          trt_mean;
      double w_c = use_ps ? wc[i] / wc_mean : 0.0;
      double dy = data.y(i, bundle.t) - data.y(i, bundle.g - 1);
      double m = use_reg ? bundle.reg[c].predict(data.covariates().row(i).transpose())
                         : 0.0;
      term += (w_trt - w_c) * (dy - m);
    }
    total += signs[c] * term / n;
  }
  return total;
}

}  // namespace

TEST_CASE("d=0: dr, ra, ipw and the closed-form estimator coincide") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    PanelDataset data = random_nocov_panel(seed, 100, 4, 2);
    auto index = cohort_index(data);
    for (int g : index.treated_cohorts)
      for (int t = g; t <= data.T(); ++t)
        for (const auto& gc : index.comparisons(g, t)) {
          auto bundle = fit_nuisance_bundle(data, g, t, gc);
          auto nocov = att_no_covariates(data, index, g, t, gc);
          auto dr = att_dr(data, index, bundle, g, t, gc);
          auto ra = att_ra(data, index, bundle, g, t, gc);
          auto ipw = att_ipw(data, index, bundle, g, t, gc);
          for (const auto* cell : {&dr, &ra, &ipw}) {
            CHECK(std::abs(cell->estimate - nocov.estimate) < 1e-10);
            CHECK((cell->influence - nocov.influence).cwiseAbs().maxCoeff() < 1e-8);
          }
        }
  }
}

TEST_CASE("12-unit panel: dr/ra/ipw match the term-by-term oracle") {
  PanelDataset data = twelve_unit_panel();
  auto index = cohort_index(data);
  auto bundle = fit_nuisance_bundle(data, 2, 2, EnablingPeriod::never());
  auto dr = att_dr(data, index, bundle, 2, 2, EnablingPeriod::never());
  auto ra = att_ra(data, index, bundle, 2, 2, EnablingPeriod::never());
  auto ipw = att_ipw(data, index, bundle, 2, 2, EnablingPeriod::never());
  CHECK(dr.estimate ==
        doctest::Approx(oracle_weighted(data, bundle, true, true)).epsilon(1e-10));
  CHECK(ra.estimate ==
        doctest::Approx(oracle_weighted(data, bundle, true, false)).epsilon(1e-10));
  CHECK(ipw.estimate ==
        doctest::Approx(oracle_weighted(data, bundle, false, true)).epsilon(1e-10));
  // Influence columns are mean zero.
  CHECK(std::abs(dr.influence.mean()) < 1e-10);
  CHECK(std::abs(ra.influence.mean()) < 1e-10);
  CHECK(std::abs(ipw.influence.mean()) < 1e-10);
  CHECK(dr.diag.n_treated == 3);
}

TEST_CASE("8-unit integer panel: closed-form estimator equals hand arithmetic") {
  std::vector<std::tuple<EnablingPeriod, int, std::vector<double>>> units = {
      {EnablingPeriod::at(2), 1, {1, 9}},   {EnablingPeriod::at(2), 1, {3, 11}},
      {EnablingPeriod::at(2), 1, {2, 10}},  {EnablingPeriod::at(2), 0, {2, 5}},
      {EnablingPeriod::at(2), 0, {4, 7}},   {EnablingPeriod::at(2), 0, {0, 3}},
      {EnablingPeriod::never(), 1, {1, 3}}, {EnablingPeriod::never(), 1, {3, 5}},
      {EnablingPeriod::never(), 1, {5, 7}}, {EnablingPeriod::never(), 0, {2, 3}},
      {EnablingPeriod::never(), 0, {4, 5}}, {EnablingPeriod::never(), 0, {0, 1}},
  };
  PanelDataset data = make_panel(units);
  auto index = cohort_index(data);
  auto cell = att_no_covariates(data, index, 2, 2, EnablingPeriod::never());
  // dY means: (2,1)=8, (2,0)=3, (inf,1)=2, (inf,0)=1 -> (8-3)-(2-1)=4.
  CHECK(cell.estimate == doctest::Approx(4.0).epsilon(1e-12));
  // All four cell means equal -> zero.
  std::vector<std::tuple<EnablingPeriod, int, std::vector<double>>> flat = {
      {EnablingPeriod::at(2), 1, {1, 2}},   {EnablingPeriod::at(2), 1, {3, 4}},
      {EnablingPeriod::at(2), 1, {2, 3}},   {EnablingPeriod::at(2), 0, {0, 1}},
      {EnablingPeriod::at(2), 0, {5, 6}},   {EnablingPeriod::at(2), 0, {1, 2}},
      {EnablingPeriod::never(), 1, {2, 3}}, {EnablingPeriod::never(), 1, {0, 1}},
      {EnablingPeriod::never(), 1, {4, 5}}, {EnablingPeriod::never(), 0, {1, 2}},
      {EnablingPeriod::never(), 0, {3, 4}}, {EnablingPeriod::never(), 0, {0, 1}},
  };
  PanelDataset fdata = make_panel(flat);
  auto fcell = att_no_covariates(fdata, cohort_index(fdata), 2, 2, EnablingPeriod::never());
  CHECK(fcell.estimate == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ra recovers a planted ATT from a noiseless linear outcome") {
  Rng rng(23, 0);
  const double beta = 1.7;
  const double shift[2][2] = {{0.5, 2.0}, {1.0, 5.0}};  // [s==2][q]
  // Planted ATT = (5.0 - 1.0) - (2.0 - 0.5) = 2.5.
  std::vector<std::tuple<EnablingPeriod, int, std::vector<double>>> units;
  std::vector<std::vector<double>> x;
  for (int i = 0; i < 60; ++i) {
    int s2 = i % 2, q = (i / 2) % 2;
    double xv = rng.normal();
    double dy = beta * xv + shift[s2][q];
    units.push_back({s2 ? EnablingPeriod::at(2) : EnablingPeriod::never(), q, {0.0, dy}});
    x.push_back({xv});
  }
  PanelDataset data = make_panel(units, 1, x);
  auto index = cohort_index(data);
  auto bundle = fit_nuisance_bundle(data, 2, 2, EnablingPeriod::never());
  auto ra = att_ra(data, index, bundle, 2, 2, EnablingPeriod::never());
  CHECK(ra.estimate == doctest::Approx(2.5).epsilon(1e-8));
  auto dr = att_dr(data, index, bundle, 2, 2, EnablingPeriod::never());
  CHECK(dr.estimate == doctest::Approx(2.5).epsilon(1e-8));
}

TEST_CASE("pooled baseline equals the closed form when the pool is one cohort") {
  PanelDataset data = random_nocov_panel(31, 80, 2, 1);
  auto index = cohort_index(data);
  auto pooled = att_pooled_nyt_baseline(data, index, 2, 2);
  auto nocov = att_no_covariates(data, index, 2, 2, EnablingPeriod::never());
  CHECK(pooled.estimate == doctest::Approx(nocov.estimate).epsilon(1e-12));
  CHECK(pooled.diag.biased_baseline);
  CHECK(pooled.combiner == "pooled");
}

TEST_CASE("diff-of-DR-DiDs collapses to the closed form without covariates") {
  for (std::uint64_t seed : {41, 42, 43}) {
    PanelDataset data = random_nocov_panel(seed, 90, 2, 1);
    auto index = cohort_index(data);
    auto diff = att_diff_of_drdids_baseline(data, 2, 2);
    auto nocov = att_no_covariates(data, index, 2, 2, EnablingPeriod::never());
    CHECK(diff.estimate == doctest::Approx(nocov.estimate).epsilon(1e-8));
    CHECK(diff.influence.size() == 0);
    CHECK(diff.diag.biased_baseline);
  }
}

TEST_CASE("3wfe regressions recover planted coefficients on noiseless data") {
  Rng rng(7, 0);
  std::vector<std::tuple<EnablingPeriod, int, std::vector<double>>> units;
  std::vector<std::vector<double>> x;
  const double tau = 3.25;
  for (int i = 0; i < 80; ++i) {
    int s2 = i % 2, q = (i / 2) % 2;
    double xv = rng.normal();
    int d = s2 * q;  // treated in period 2
    // dY exactly linear in the interacted FD design (1, s2, q, D, X).
    double dy = 0.4 + 0.9 * s2 + 1.3 * q + tau * d - 0.6 * xv;
    units.push_back({s2 ? EnablingPeriod::at(2) : EnablingPeriod::never(), q, {1.0, 1.0 + dy}});
    x.push_back({xv});
  }
  PanelDataset data = make_panel(units, 1, x);
  auto cell = att_3wfe_two_period_baselines(data, ThreeWfeVariant::Interacted);
  CHECK(cell.estimate == doctest::Approx(tau).epsilon(1e-8));
  CHECK(cell.influence.size() == 0);

  // The Mundlak pooled regression also recovers tau when levels follow its
  // own design exactly.
  std::vector<std::tuple<EnablingPeriod, int, std::vector<double>>> units2;
  std::vector<std::vector<double>> x2;
  for (int i = 0; i < 80; ++i) {
    int s2 = i % 2, q = (i / 2) % 2;
    double xv = rng.normal();
    auto level = [&](int t2) {
      int d = s2 * q * t2;
      return 0.3 + 0.7 * s2 + 0.2 * q + 0.15 * s2 * q + 0.5 * t2 + 0.25 * s2 * t2 +
             0.35 * q * t2 + tau * d + 0.45 * xv;
    };
    units2.push_back({s2 ? EnablingPeriod::at(2) : EnablingPeriod::never(), q,
                      {level(0), level(1)}});
    x2.push_back({xv});
  }
  PanelDataset data2 = make_panel(units2, 1, x2);
  auto cell2 = att_3wfe_two_period_baselines(data2, ThreeWfeVariant::Mundlak);
  CHECK(cell2.estimate == doctest::Approx(tau).epsilon(1e-8));
}
