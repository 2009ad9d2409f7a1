#include <cmath>

#include "ddd/influence.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace ddd;
using namespace ddd::testhelpers;

namespace {

AttCell fake_cell(int g, int t, const std::string& gc_label, double est,
                  const Eigen::VectorXd& psi) {
  AttCell c;
  c.g = g;
  c.t = t;
  c.gc = gc_label == "Inf" ? EnablingPeriod::never()
                           : EnablingPeriod::at(std::stoi(gc_label));
  c.estimand = Estimand::DR;
  c.estimate = est;
  c.influence = psi;
  return c;
}

double column_variance(const Eigen::VectorXd& v) {
  Eigen::VectorXd c = v.array() - v.mean();
  return c.squaredNorm() / v.size();
}

}  // namespace

TEST_CASE("omega: k=1 is the scalar sample second moment") {
  Rng rng(5, 0);
  Eigen::VectorXd psi(200);
  for (int i = 0; i < 200; ++i) psi(i) = rng.normal();
  psi.array() -= psi.mean();
  InfluenceMatrix infl{psi, {"Inf"}};
  auto om = estimate_omega(infl);
  CHECK(om.retained == std::vector<int>{0});
  CHECK(om.omega(0, 0) == doctest::Approx(psi.squaredNorm() / 200).epsilon(1e-12));
}

TEST_CASE("omega: duplicate column is pruned, brute-force sum matches") {
  Rng rng(6, 0);
  const int n = 150;
  Eigen::MatrixXd psi(n, 3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) psi(i, j) = rng.normal() * (j + 1);
  psi.col(2) = psi.col(0);  // exact duplicate
  InfluenceMatrix infl{psi, {"3", "4", "Inf"}};
  auto om = estimate_omega(infl);
  CHECK(om.retained == std::vector<int>{0, 1});
  // Brute-force (1/n) sum psi_i psi_i'.
  Eigen::MatrixXd brute = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < n; ++i) brute += psi.row(i).transpose() * psi.row(i);
  brute /= n;
  CHECK((om.omega - brute).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gmm weights: hand-set diagonal omega gives (1/3, 2/3)") {
  const int n = 50;
  Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(n, -1, 1);
  std::vector<AttCell> cells = {fake_cell(2, 2, "3", 1.0, z),
                                fake_cell(2, 2, "Inf", 4.0, z)};
  OmegaHat om;
  om.omega.resize(2, 2);
  om.omega << 2, 0, 0, 1;
  om.retained = {0, 1};
  AttCell combined = gmm_combine(cells, om);
  REQUIRE(combined.combo_weights.size() == 2);
  CHECK(combined.combo_weights(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(combined.combo_weights(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(combined.estimate == doctest::Approx(1.0 / 3.0 + 8.0 / 3.0).epsilon(1e-12));
  CHECK(combined.combiner == "gmm");
}

TEST_CASE("gmm on a single cell returns it unchanged with weight one") {
  Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(40, -1, 1);
  std::vector<AttCell> cells = {fake_cell(2, 3, "Inf", 2.5, z)};
  auto om = estimate_omega(InfluenceMatrix::from_cells(cells));
  AttCell combined = gmm_combine(cells, om);
  CHECK(combined.estimate == 2.5);
  CHECK(combined.combo_weights(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((combined.influence - z).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("combined variance equals (1' Omega^{-1} 1)^{-1} exactly") {
  Rng rng(9, 0);
  const int n = 400;
  Eigen::MatrixXd psi(n, 3);
  for (int i = 0; i < n; ++i) {
    double common = rng.normal();
    for (int j = 0; j < 3; ++j) psi(i, j) = common + 0.7 * (j + 1) * rng.normal();
  }
  psi.rowwise() -= psi.colwise().mean();
  std::vector<AttCell> cells = {fake_cell(2, 2, "3", 1.0, psi.col(0)),
                                fake_cell(2, 2, "4", 1.1, psi.col(1)),
                                fake_cell(2, 2, "Inf", 0.9, psi.col(2))};
  auto om = estimate_omega(InfluenceMatrix::from_cells(cells));
  REQUIRE(om.retained.size() == 3);
  AttCell combined = gmm_combine(cells, om);
  double target = 1.0 / (Eigen::VectorXd::Ones(3).transpose() *
                         om.omega.inverse() * Eigen::VectorXd::Ones(3))(0);
  double var = combined.influence.squaredNorm() / n;  // psi columns are centered
  CHECK(var == doctest::Approx(target).epsilon(1e-12));

  SUBCASE("gmm variance dominates every weighted combination") {
    Rng wrng(77, 1);
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd w(3);
      for (int j = 0; j < 3; ++j) w(j) = wrng.uniform();
      w /= w.sum();
      AttCell wc = weighted_combine(cells, w);
      double wv = column_variance(wc.influence);
      CHECK(wv >= var - 1e-12);
    }
  }
}

TEST_CASE("weighted_combine: one-hot and equal weights") {
  Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(30, -1, 1);
  Eigen::VectorXd b = a.array().square().matrix();
  std::vector<AttCell> cells = {fake_cell(2, 2, "3", 2.0, a),
                                fake_cell(2, 2, "Inf", 6.0, b)};
  Eigen::VectorXd onehot(2);
  onehot << 0, 1;
  AttCell pick = weighted_combine(cells, onehot);
  CHECK(pick.estimate == 6.0);
  CHECK((pick.influence - b).cwiseAbs().maxCoeff() < 1e-14);
  Eigen::VectorXd eq(2);
  eq << 0.5, 0.5;
  AttCell mean = weighted_combine(cells, eq);
  CHECK(mean.estimate == doctest::Approx(4.0).epsilon(1e-14));
  Eigen::VectorXd bad(2);
  bad << 0.5, 0.6;
  CHECK_THROWS_AS(weighted_combine(cells, bad), EstimationError);
}

TEST_CASE("influence_dr equals the column att_dr assembles internally") {
  PanelDataset data = random_nocov_panel(13, 120, 4, 2);
  auto index = cohort_index(data);
  int g = index.treated_cohorts.front();
  int t = g;
  auto gc = index.comparisons(g, t).back();
  auto bundle = fit_nuisance_bundle(data, g, t, gc);
  auto cell = att_dr(data, index, bundle, g, t, gc);
  Eigen::VectorXd psi = influence_dr(data, index, bundle, g, t, gc);
  CHECK((psi - cell.influence).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(std::abs(psi.mean()) < 1e-10);
}

TEST_CASE("d=0 influence reproduces the closed-form four-cell variance") {
  // Variance of a difference of four independent cell means:
  // sum_cells var(dY | cell) / (n * share_cell).
  for (std::uint64_t seed : {3, 8}) {
    PanelDataset data = random_nocov_panel(seed, 200, 2, 1);
    auto index = cohort_index(data);
    auto cell = att_no_covariates(data, index, 2, 2, EnablingPeriod::never());
    const int n = data.n();
    double target = 0.0;
    for (int s2 : {0, 1})
      for (int q : {0, 1}) {
        double cnt = 0, mean = 0;
        for (int i = 0; i < n; ++i)
          if ((data.S(i).is_finite()) == (s2 == 1) && data.Q(i) == q) {
            cnt += 1;
            mean += data.y(i, 2) - data.y(i, 1);
          }
        mean /= cnt;
        double var = 0;
        for (int i = 0; i < n; ++i)
          if ((data.S(i).is_finite()) == (s2 == 1) && data.Q(i) == q) {
            double dy = data.y(i, 2) - data.y(i, 1);
            var += (dy - mean) * (dy - mean);
          }
        var /= cnt;  // population variance within the cell
        target += var / cnt;
      }
    double from_psi = cell.influence.squaredNorm() / double(n) / double(n);
    CHECK(std::abs(cell.influence.mean()) < 1e-12);
    CHECK(from_psi == doctest::Approx(target).epsilon(1e-10));
  }
}
