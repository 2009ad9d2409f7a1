#pragma once
// Parametric working models: OLS outcome regressions on subgroup outcome
// changes and pairwise-logit generalized propensity scores, plus their
// M-estimation score contributions used by the influence-function assembly.
//
// All fitting happens on internally standardized covariates (mean 0, sd 1
// over the full sample) for numerical stability; fitted values are invariant
// to the affine reparameterization and raw-scale coefficients are kept for
// reporting.  The cached inverse Gram / Fisher matrices and the score rows are
// all expressed in the standardized basis, so downstream code that contracts
// scores with M-vectors must use the same basis (the bundle carries it).

#include <Eigen/Dense>
#include <array>
#include <string>

#include "ddd/panel.hpp"

namespace ddd {

// One (S=s, Q=q) subgroup.
struct CellSpec {
  EnablingPeriod s;
  int q = 0;
  std::string label() const { return "(" + s.to_string() + "," + std::to_string(q) + ")"; }
};

// Full-sample covariate standardization and design-matrix construction.
struct Standardizer {
  Eigen::VectorXd mean, sd;  // length d

  static Standardizer fit(const Eigen::MatrixXd& X);
  // n x (d+1) design [1, (X - mean)/sd].
  Eigen::MatrixXd design(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd design_row(const Eigen::VectorXd& x_raw) const;
};

struct OutcomeRegressionFit {
  CellSpec cell;
  int t = 0, base = 0;          // outcome difference Y_t - Y_base
  Eigen::VectorXd gamma_std;    // coefficients on (1, standardized X)
  Eigen::VectorXd gamma_reg;    // back-transformed to (1, raw X), for reporting
  // inv( sum_{i in cell} x_i x_i' / n ) in the standardized basis, n = full
  // sample size: the Gram inverse already scaled by the inverse subgroup share.
  Eigen::MatrixXd design_gram_inv;
  Standardizer standardizer;
  int n_cell = 0, n_total = 0;

  double predict(const Eigen::VectorXd& x_raw) const;
  // Linear predictor for every unit given the shared design matrix.
  Eigen::VectorXd predict_all(const Eigen::MatrixXd& design) const {
    return design * gamma_std;
  }
};

struct PropensityFit {
  CellSpec treated, comparison;
  Eigen::VectorXd gamma_std;    // coefficients on (1, standardized X)
  Eigen::VectorXd gamma_ps;     // back-transformed, for reporting
  // inv( sum_{i in union} p(1-p) x x' / n ), standardized basis, n = full n.
  Eigen::MatrixXd fisher_info_inv;
  Standardizer standardizer;
  bool converged = false;
  int iterations = 0;
  int n_union = 0, n_total = 0;

  double predict(const Eigen::VectorXd& x_raw) const;
  Eigen::VectorXd predict_all(const Eigen::MatrixXd& design) const;
};

// The six fits needed by one DR ATT(g,t) cell with comparison cohort g_c: one
// outcome regression and one propensity model per comparison cell
// (g,0), (g_c,1), (g_c,0), all sharing base period g-1.
struct NuisanceBundle {
  int g = 0, t = 0;
  EnablingPeriod gc = EnablingPeriod::never();
  std::array<CellSpec, 3> cells;  // (g,0), (gc,1), (gc,0)
  std::array<OutcomeRegressionFit, 3> reg;
  std::array<PropensityFit, 3> ps;
  Standardizer standardizer;
};

// Subgroup mask helper: 1 for units with S = cell.s, Q = cell.q.
Eigen::ArrayXd cell_mask(const PanelDataset& data, const CellSpec& cell);

OutcomeRegressionFit fit_outcome_regression(const PanelDataset& data,
                                            const CellSpec& cell, int t, int base);

PropensityFit fit_generalized_pscore(const PanelDataset& data,
                                     const CellSpec& treated,
                                     const CellSpec& comparison);

NuisanceBundle fit_nuisance_bundle(const PanelDataset& data, int g, int t,
                                   EnablingPeriod gc);

double predict_pscore(const PropensityFit& fit, const Eigen::VectorXd& x_raw);
double predict_delta(const OutcomeRegressionFit& fit, const Eigen::VectorXd& x_raw);

// Per-unit influence rows of the fitted coefficients (standardized basis):
// zero outside the fitting subsample.  OLS: design_gram_inv * x_i * residual_i;
// logit: fisher_info_inv * x_i * (label_i - p_i).  Both Gram inverses are
// scaled by the inverse subgroup share (see the field comments), matching the
// standard M-estimation expansion sqrt(n)(gamma_hat - gamma) = n^{-1/2} sum l_i.
Eigen::MatrixXd score_contributions(const OutcomeRegressionFit& fit,
                                    const PanelDataset& data);
Eigen::MatrixXd score_contributions(const PropensityFit& fit,
                                    const PanelDataset& data);

}  // namespace ddd
