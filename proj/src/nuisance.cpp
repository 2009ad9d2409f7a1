#include "ddd/nuisance.hpp"

#include <cmath>

namespace ddd {

namespace {

// Outcome change Y_t - Y_base for every unit.
Eigen::VectorXd outcome_diff(const PanelDataset& data, int t, int base) {
  if (t < 1 || t > data.T() || base < 1 || base > data.T())
    throw EstimationError("period out of range in outcome difference");
  return data.outcomes().col(t - 1) - data.outcomes().col(base - 1);
}

// Back-transform coefficients on (1, (X-mu)/sigma) to coefficients on (1, X).
Eigen::VectorXd unstandardize(const Eigen::VectorXd& beta_std,
                              const Standardizer& st) {
  const int d = static_cast<int>(st.mean.size());
  Eigen::VectorXd out(d + 1);
  out[0] = beta_std[0];
  for (int j = 0; j < d; ++j) {
    out[j + 1] = beta_std[j + 1] / st.sd[j];
    out[0] -= beta_std[j + 1] * st.mean[j] / st.sd[j];
  }
  return out;
}

double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

}  // namespace

Standardizer Standardizer::fit(const Eigen::MatrixXd& X) {
  Standardizer st;
  const int d = static_cast<int>(X.cols());
  st.mean.resize(d);
  st.sd.resize(d);
  for (int j = 0; j < d; ++j) {
    st.mean[j] = X.col(j).mean();
    double var = (X.col(j).array() - st.mean[j]).square().mean();
    st.sd[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return st;
}

Eigen::MatrixXd Standardizer::design(const Eigen::MatrixXd& X) const {
  const int n = static_cast<int>(X.rows()), d = static_cast<int>(X.cols());
  Eigen::MatrixXd D(n, d + 1);
  D.col(0).setOnes();
  for (int j = 0; j < d; ++j)
    D.col(j + 1) = (X.col(j).array() - mean[j]) / sd[j];
  return D;
}

Eigen::VectorXd Standardizer::design_row(const Eigen::VectorXd& x_raw) const {
  const int d = static_cast<int>(mean.size());
  if (x_raw.size() != d) throw EstimationError("covariate row dimension mismatch");
  Eigen::VectorXd r(d + 1);
  r[0] = 1.0;
  for (int j = 0; j < d; ++j) r[j + 1] = (x_raw[j] - mean[j]) / sd[j];
  return r;
}

Eigen::ArrayXd cell_mask(const PanelDataset& data, const CellSpec& cell) {
  Eigen::ArrayXd m(data.n());
  for (int i = 0; i < data.n(); ++i)
    m[i] = (data.S(i) == cell.s && data.Q(i) == cell.q) ? 1.0 : 0.0;
  return m;
}

OutcomeRegressionFit fit_outcome_regression(const PanelDataset& data,
                                            const CellSpec& cell, int t, int base) {
  const int n = data.n(), d = data.d(), k = d + 1;
  Eigen::ArrayXd mask = cell_mask(data, cell);
  const int n_cell = static_cast<int>(mask.sum());
  if (n_cell < d + 2)
    throw EstimationError("subgroup " + cell.label() + " too small for outcome regression (" +
                          std::to_string(n_cell) + " units, need >= " + std::to_string(d + 2) + ")");

  Standardizer st = Standardizer::fit(data.covariates());
  Eigen::VectorXd dy = outcome_diff(data, t, base);

  Eigen::MatrixXd Xc(n_cell, k);
  Eigen::VectorXd yc(n_cell);
  Eigen::MatrixXd design = st.design(data.covariates());
  for (int i = 0, r = 0; i < n; ++i)
    if (mask[i] > 0) {
      Xc.row(r) = design.row(i);
      yc[r] = dy[i];
      ++r;
    }

  // Column-pivoted QR: numerically stable at any conditioning and detects
  // rank deficiency with a named-column diagnostic.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xc);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    const auto& perm = qr.colsPermutation().indices();
    std::string cols;
    for (int j = qr.rank(); j < k; ++j) {
      int col = perm[j];
      cols += (cols.empty() ? "" : ", ");
      cols += col == 0 ? std::string("intercept") : data.covariate_names()[col - 1];
    }
    throw EstimationError("collinear design in subgroup " + cell.label() +
                          " (columns: " + cols + ")");
  }

  OutcomeRegressionFit fit;
  fit.cell = cell;
  fit.t = t;
  fit.base = base;
  fit.standardizer = st;
  fit.n_cell = n_cell;
  fit.n_total = n;
  fit.gamma_std = qr.solve(yc);
  fit.gamma_reg = unstandardize(fit.gamma_std, st);
  // inv( X_cell' X_cell / n ) with n the full sample size.
  Eigen::MatrixXd gram = Xc.transpose() * Xc / static_cast<double>(n);
  fit.design_gram_inv = gram.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  return fit;
}

PropensityFit fit_generalized_pscore(const PanelDataset& data,
                                     const CellSpec& treated,
                                     const CellSpec& comparison) {
  const int n = data.n(), d = data.d(), k = d + 1;
  Eigen::ArrayXd m1 = cell_mask(data, treated), m0 = cell_mask(data, comparison);
  const int n1 = static_cast<int>(m1.sum()), n0 = static_cast<int>(m0.sum());
  if (n1 == 0) throw EstimationError("empty treated cell " + treated.label());
  if (n0 == 0) throw EstimationError("empty comparison cell " + comparison.label());
  const int nu = n1 + n0;
  if (nu < d + 2)
    throw EstimationError("cell union " + treated.label() + " vs " + comparison.label() +
                          " too small for propensity fit");

  Standardizer st = Standardizer::fit(data.covariates());
  Eigen::MatrixXd design = st.design(data.covariates());
  Eigen::MatrixXd Xu(nu, k);
  Eigen::VectorXd label(nu);
  for (int i = 0, r = 0; i < n; ++i)
    if (m1[i] > 0 || m0[i] > 0) {
      Xu.row(r) = design.row(i);
      label[r] = m1[i];
      ++r;
    }

  // Logit MLE via iteratively reweighted least squares (Newton with
  // step-halving so the log-likelihood is non-decreasing every iteration).
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  auto loglik = [&](const Eigen::VectorXd& b) {
    Eigen::ArrayXd eta = (Xu * b).array();
    // log L = sum y*eta - log(1 + e^eta), computed stably.
    return (label.array() * eta - eta.max(0.0) -
            (1.0 + (-eta.abs()).exp()).log())
        .sum();
  };
  double ll = loglik(beta);
  bool converged = false;
  int iter = 0;
  for (; iter < 100; ++iter) {
    Eigen::ArrayXd p = (Xu * beta).array().unaryExpr([](double e) { return logistic(e); });
    Eigen::ArrayXd w = p * (1.0 - p) + 1e-12;
    Eigen::VectorXd grad = Xu.transpose() * (label.array() - p).matrix();
    Eigen::MatrixXd hess = Xu.transpose() * (Xu.array().colwise() * w).matrix();
    Eigen::VectorXd step = hess.ldlt().solve(grad);
    double scale = 1.0;
    Eigen::VectorXd cand = beta + step;
    double ll_new = loglik(cand);
    for (int h = 0; h < 40 && !(ll_new >= ll - 1e-12); ++h) {
      scale *= 0.5;
      cand = beta + scale * step;
      ll_new = loglik(cand);
    }
    double max_change = (cand - beta).cwiseAbs().maxCoeff();
    beta = cand;
    ll = ll_new;
    if (beta.cwiseAbs().maxCoeff() > 30.0)
      throw EstimationError(
          "perfect separation suspected in propensity fit " + treated.label() + " vs " +
          comparison.label() + " (|coefficient| > 30 on standardized covariates); "
          "consider reducing the covariate set");
    if (max_change < 1e-10) {
      converged = true;
      ++iter;
      break;
    }
  }

  PropensityFit fit;
  fit.treated = treated;
  fit.comparison = comparison;
  fit.standardizer = st;
  fit.gamma_std = beta;
  fit.gamma_ps = unstandardize(beta, st);
  fit.converged = converged;
  fit.iterations = iter;
  fit.n_union = nu;
  fit.n_total = n;
  Eigen::ArrayXd p = (Xu * beta).array().unaryExpr([](double e) { return logistic(e); });
  Eigen::ArrayXd w = p * (1.0 - p);
  Eigen::MatrixXd info =
      Xu.transpose() * (Xu.array().colwise() * w).matrix() / static_cast<double>(n);
  fit.fisher_info_inv = info.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  return fit;
}

NuisanceBundle fit_nuisance_bundle(const PanelDataset& data, int g, int t,
                                   EnablingPeriod gc) {
  NuisanceBundle b;
  b.g = g;
  b.t = t;
  b.gc = gc;
  b.standardizer = Standardizer::fit(data.covariates());
  const CellSpec trt{EnablingPeriod::at(g), 1};
  b.cells = {CellSpec{EnablingPeriod::at(g), 0}, CellSpec{gc, 1}, CellSpec{gc, 0}};
  const int base = g - 1;
  for (int c = 0; c < 3; ++c) {
    b.reg[c] = fit_outcome_regression(data, b.cells[c], t, base);
    b.ps[c] = fit_generalized_pscore(data, trt, b.cells[c]);
  }
  return b;
}

double OutcomeRegressionFit::predict(const Eigen::VectorXd& x_raw) const {
  return standardizer.design_row(x_raw).dot(gamma_std);
}

double PropensityFit::predict(const Eigen::VectorXd& x_raw) const {
  return logistic(standardizer.design_row(x_raw).dot(gamma_std));
}

Eigen::VectorXd PropensityFit::predict_all(const Eigen::MatrixXd& design) const {
  return (design * gamma_std).array().unaryExpr([](double e) { return logistic(e); });
}

double predict_pscore(const PropensityFit& fit, const Eigen::VectorXd& x_raw) {
  return fit.predict(x_raw);
}

double predict_delta(const OutcomeRegressionFit& fit, const Eigen::VectorXd& x_raw) {
  return fit.predict(x_raw);
}

Eigen::MatrixXd score_contributions(const OutcomeRegressionFit& fit,
                                    const PanelDataset& data) {
  const int n = data.n(), k = data.d() + 1;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, k);
  Eigen::ArrayXd mask = cell_mask(data, fit.cell);
  Eigen::MatrixXd design = fit.standardizer.design(data.covariates());
  Eigen::VectorXd dy = data.outcomes().col(fit.t - 1) - data.outcomes().col(fit.base - 1);
  for (int i = 0; i < n; ++i)
    if (mask[i] > 0) {
      double resid = dy[i] - design.row(i).dot(fit.gamma_std);
      out.row(i) = (fit.design_gram_inv * design.row(i).transpose() * resid).transpose();
    }
  return out;
}

Eigen::MatrixXd score_contributions(const PropensityFit& fit,
                                    const PanelDataset& data) {
  const int n = data.n(), k = data.d() + 1;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, k);
  Eigen::ArrayXd m1 = cell_mask(data, fit.treated), m0 = cell_mask(data, fit.comparison);
  Eigen::MatrixXd design = fit.standardizer.design(data.covariates());
  for (int i = 0; i < n; ++i)
    if (m1[i] > 0 || m0[i] > 0) {
      double p = logistic(design.row(i).dot(fit.gamma_std));
      double score = m1[i] - p;
      out.row(i) = (fit.fisher_info_inv * design.row(i).transpose() * score).transpose();
    }
  return out;
}

}  // namespace ddd
