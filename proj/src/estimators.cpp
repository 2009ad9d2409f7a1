#include "ddd/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace ddd {

std::string to_string(Estimand e) {
  switch (e) {
    case Estimand::DR: return "dr";
    case Estimand::RA: return "ra";
    case Estimand::IPW: return "ipw";
    case Estimand::NoCov: return "nocov";
    case Estimand::PooledNYT: return "pooled-nyt";
    case Estimand::DiffDRDiD: return "diff-drdid";
    case Estimand::ThreeWFE: return "3wfe";
    case Estimand::Mundlak3WFE: return "mundlak-3wfe";
  }
  return "?";
}

namespace {

Eigen::VectorXd outcome_diff(const PanelDataset& data, int t, int base) {
  if (t < 1 || t > data.T() || base < 1 || base > data.T())
    throw EstimationError("period out of range in outcome difference");
  return data.outcomes().col(t - 1) - data.outcomes().col(base - 1);
}

// The baseline cell t = g-1 is an exact zero with zero influence by
// construction (the event-study normalization point).
AttCell baseline_zero_cell(int n, int g, int t, std::optional<EnablingPeriod> gc,
                           Estimand estimand) {
  AttCell cell;
  cell.g = g;
  cell.t = t;
  cell.gc = gc;
  cell.estimand = estimand;
  cell.estimate = 0.0;
  cell.influence = Eigen::VectorXd::Zero(n);
  cell.diag.warnings.push_back("baseline period: exact zero by construction");
  return cell;
}

void require_comparison(const CohortIndex& index, int g, int t, EnablingPeriod gc) {
  const auto& set = index.comparisons(g, t);
  for (auto c : set)
    if (c == gc) return;
  throw EstimationError("comparison cohort " + gc.to_string() +
                        " not admissible for (g=" + std::to_string(g) +
                        ", t=" + std::to_string(t) + ")");
}

int mask_count(const Eigen::ArrayXd& m) { return static_cast<int>(m.sum()); }

// Shared worker for DR / RA / IPW.  All three are the same three-cell sum
// with pieces switched off: RA drops the propensity weighting, IPW drops the
// outcome regression.  The influence function is assembled alongside the
// estimate, including the nuisance estimation-effect terms (l'M) when
// requested:
//   psi = sum_cells sign * (psi1 - psi0 - psi_est),
//   psi1 = w_trt r - w_trt E[w_trt r],  psi0 = w_c r - w_c E[w_c r],
//   psi_est = l_reg' M1 + l_ps' M2,
//   M1 = E[(w_trt - w_c) x],
//   M2 = E[alpha r pdot] - E[w_c r] E[alpha pdot],
//   alpha = (1{cell}/(1-p)^2) / E[1{cell} p/(1-p)],  pdot = p(1-p) x.
AttCell att_weighted_core(const PanelDataset& data, const CohortIndex& index,
                          const NuisanceBundle& bundle, int g, int t,
                          EnablingPeriod gc, bool use_reg, bool use_ps,
                          bool with_estimation_effect, Estimand tag) {
  const int n = data.n();
  if (t == g - 1) return baseline_zero_cell(n, g, t, gc, tag);
  require_comparison(index, g, t, gc);
  if (bundle.g != g || bundle.t != t || !(bundle.gc == gc))
    throw EstimationError("nuisance bundle does not match the requested (g,t,g_c)");

  const Eigen::MatrixXd design = bundle.standardizer.design(data.covariates());
  const Eigen::VectorXd dy = outcome_diff(data, t, g - 1);

  Eigen::ArrayXd trt = cell_mask(data, CellSpec{EnablingPeriod::at(g), 1});
  const int n_trt = mask_count(trt);
  if (n_trt < 3) throw EstimationError("treated cell (g=" + std::to_string(g) + ",q=1) too small");
  Eigen::ArrayXd w_trt = trt / trt.mean();

  AttCell out;
  out.g = g;
  out.t = t;
  out.gc = gc;
  out.estimand = tag;
  out.diag.n_treated = n_trt;
  out.diag.cell_sizes["(" + std::to_string(g) + ",1)"] = n_trt;
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(n);
  double est = 0.0;
  const double signs[3] = {+1.0, +1.0, -1.0};

  for (int c = 0; c < 3; ++c) {
    const CellSpec& cspec = bundle.cells[c];
    Eigen::ArrayXd cell = cell_mask(data, cspec);
    const int n_cell = mask_count(cell);
    if (n_cell < 3) throw EstimationError("comparison cell " + cspec.label() + " empty/too small");
    out.diag.cell_sizes[cspec.label()] = n_cell;

    Eigen::ArrayXd m = Eigen::ArrayXd::Zero(n);
    if (use_reg) m = (design * bundle.reg[c].gamma_std).array();
    Eigen::ArrayXd r = dy.array() - m;

    Eigen::ArrayXd p, w_c;
    if (use_ps) {
      const PropensityFit& pf = bundle.ps[c];
      out.diag.nuisance_converged = out.diag.nuisance_converged && pf.converged;
      p = pf.predict_all(design).array();
      int extreme = 0;
      for (int i = 0; i < n; ++i)
        if ((trt[i] > 0 || cell[i] > 0) && (p[i] < 1e-3 || p[i] > 1.0 - 1e-3)) ++extreme;
      out.diag.extreme_pscores += extreme;
      if (extreme > std::max(1, n_cell / 100))
        out.diag.warnings.push_back("overlap warning: " + std::to_string(extreme) +
                                    " extreme propensity values vs cell " + cspec.label());
      Eigen::ArrayXd odds = cell * p / (1.0 - p);
      double odds_mean = odds.mean();
      if (!(odds_mean > 1e-12))
        throw EstimationError("degenerate propensity weights for cell " + cspec.label());
      w_c = odds / odds_mean;
    } else {
      w_c = Eigen::ArrayXd::Zero(n);
    }

    const double mean_trt_r = (w_trt * r).mean();
    const double mean_c_r = (w_c * r).mean();
    est += signs[c] * (mean_trt_r - mean_c_r);

    Eigen::ArrayXd psi1 = w_trt * r - w_trt * mean_trt_r;
    Eigen::ArrayXd psi0 = w_c * r - w_c * mean_c_r;
    Eigen::ArrayXd psi_est = Eigen::ArrayXd::Zero(n);

    if (with_estimation_effect) {
      if (use_reg) {
        // l_reg_i = GramInv x_i r_i (i in cell); contraction with M1 reduces
        // to a single design product.
        Eigen::VectorXd M1 = design.transpose() * (w_trt - w_c).matrix() / n;
        Eigen::VectorXd v = bundle.reg[c].design_gram_inv * M1;
        psi_est += cell * r * (design * v).array();
      }
      if (use_ps) {
        Eigen::ArrayXd alpha_num = cell / ((1.0 - p) * (1.0 - p));
        double alpha_den = (cell * p / (1.0 - p)).mean();
        Eigen::ArrayXd alpha = alpha_num / alpha_den;
        Eigen::ArrayXd pd = p * (1.0 - p);  // pdot_i = pd_i * x_i
        Eigen::VectorXd M2 = design.transpose() * (alpha * r * pd).matrix() / n -
                             mean_c_r * (design.transpose() * (alpha * pd).matrix() / n);
        Eigen::VectorXd u = bundle.ps[c].fisher_info_inv * M2;
        // l_ps_i = FisherInv x_i (label_i - p_i) over the treated/comparison union.
        psi_est += (trt + cell) * (trt - p) * (design * u).array();
      }
    }
    psi += (signs[c] * (psi1 - psi0 - psi_est)).matrix();
  }

  out.estimate = est;
  out.influence = psi;
  return out;
}

// Four-cell means estimator with its exact influence function; `masks` and
// `signs` define the cells.  Used by the no-covariate estimator and the
// pooled not-yet-treated baseline.
AttCell four_cell_means(const PanelDataset& data, const Eigen::VectorXd& dy,
                        const std::vector<std::pair<Eigen::ArrayXd, double>>& cells,
                        const std::vector<std::string>& labels, int g, int t,
                        std::optional<EnablingPeriod> gc, Estimand tag) {
  const int n = data.n();
  AttCell out;
  out.g = g;
  out.t = t;
  out.gc = gc;
  out.estimand = tag;
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(n);
  double est = 0.0;
  for (size_t c = 0; c < cells.size(); ++c) {
    const auto& [mask, sign] = cells[c];
    const int n_cell = mask_count(mask);
    out.diag.cell_sizes[labels[c]] = n_cell;
    if (n_cell < 3)
      throw EstimationError("cell " + labels[c] + " too small (" + std::to_string(n_cell) + ")");
    const double share = mask.mean();
    const double mu = (mask * dy.array()).sum() / mask.sum();
    est += sign * mu;
    psi += (sign * (mask / share) * (dy.array() - mu)).matrix();
  }
  out.estimate = est;
  out.influence = psi;
  out.diag.n_treated = mask_count(cells[0].first);  // first cell is (g,1)
  return out;
}

}  // namespace

AttCell att_dr(const PanelDataset& data, const CohortIndex& index,
               const NuisanceBundle& bundle, int g, int t, EnablingPeriod gc,
               bool with_estimation_effect) {
  return att_weighted_core(data, index, bundle, g, t, gc, /*use_reg=*/true,
                           /*use_ps=*/true, with_estimation_effect, Estimand::DR);
}

AttCell att_ra(const PanelDataset& data, const CohortIndex& index,
               const NuisanceBundle& bundle, int g, int t, EnablingPeriod gc,
               bool with_estimation_effect) {
  return att_weighted_core(data, index, bundle, g, t, gc, /*use_reg=*/true,
                           /*use_ps=*/false, with_estimation_effect, Estimand::RA);
}

AttCell att_ipw(const PanelDataset& data, const CohortIndex& index,
                const NuisanceBundle& bundle, int g, int t, EnablingPeriod gc,
                bool with_estimation_effect) {
  return att_weighted_core(data, index, bundle, g, t, gc, /*use_reg=*/false,
                           /*use_ps=*/true, with_estimation_effect, Estimand::IPW);
}

AttCell att_no_covariates(const PanelDataset& data, const CohortIndex& index,
                          int g, int t, EnablingPeriod gc) {
  if (t == g - 1)
    return baseline_zero_cell(data.n(), g, t, gc, Estimand::NoCov);
  require_comparison(index, g, t, gc);
  Eigen::VectorXd dy = outcome_diff(data, t, g - 1);
  auto gmask = [&](EnablingPeriod s, int q) {
    return cell_mask(data, CellSpec{s, q});
  };
  std::vector<std::pair<Eigen::ArrayXd, double>> cells = {
      {gmask(EnablingPeriod::at(g), 1), +1.0},
      {gmask(EnablingPeriod::at(g), 0), -1.0},
      {gmask(gc, 1), -1.0},
      {gmask(gc, 0), +1.0}};
  std::vector<std::string> labels = {
      "(" + std::to_string(g) + ",1)", "(" + std::to_string(g) + ",0)",
      "(" + gc.to_string() + ",1)", "(" + gc.to_string() + ",0)"};
  return four_cell_means(data, dy, cells, labels, g, t, gc, Estimand::NoCov);
}

AttCell att_pooled_nyt_baseline(const PanelDataset& data, const CohortIndex& index,
                                int g, int t) {
  (void)index;
  if (t < g) throw EstimationError("pooled baseline defined for post-treatment (g,t) only");
  const int n = data.n();
  Eigen::VectorXd dy = outcome_diff(data, t, g - 1);
  Eigen::ArrayXd in_g(n), pool(n);
  for (int i = 0; i < n; ++i) {
    in_g[i] = (data.S(i).is_finite() && data.S(i).value() == g) ? 1.0 : 0.0;
    pool[i] = data.S(i).after(t) ? 1.0 : 0.0;  // not yet enabled at t
  }
  if (pool.sum() < 1) throw EstimationError("no not-yet-treated units at t=" + std::to_string(t));
  Eigen::ArrayXd q(n);
  for (int i = 0; i < n; ++i) q[i] = data.Q(i);
  std::vector<std::pair<Eigen::ArrayXd, double>> cells = {
      {in_g * q, +1.0}, {in_g * (1.0 - q), -1.0}, {pool * q, -1.0}, {pool * (1.0 - q), +1.0}};
  std::vector<std::string> labels = {"(g,1)", "(g,0)", "(pool,1)", "(pool,0)"};
  AttCell out = four_cell_means(data, dy, cells, labels, g, t, std::nullopt,
                                Estimand::PooledNYT);
  out.combiner = "pooled";
  out.diag.biased_baseline = true;
  return out;
}

AttCell att_diff_of_drdids_baseline(const PanelDataset& data, int g, int t) {
  bool has_never = false;
  for (int i = 0; i < data.n(); ++i)
    if (data.S(i).is_never()) { has_never = true; break; }
  if (!has_never)
    throw EstimationError("difference-of-DiDs baseline needs a never-enabled group");

  const Eigen::MatrixXd design =
      Standardizer::fit(data.covariates()).design(data.covariates());
  const Eigen::VectorXd dy = outcome_diff(data, t, g - 1);
  const int n = data.n();

  // One DR DiD per eligibility stratum q: treated cell (S=g, Q=q) against the
  // never-enabled cell (S=never, Q=q).
  auto drdid_within = [&](int q) {
    CellSpec trt_cell{EnablingPeriod::at(g), q};
    CellSpec cmp_cell{EnablingPeriod::never(), q};
    PropensityFit pf = fit_generalized_pscore(data, trt_cell, cmp_cell);
    OutcomeRegressionFit orf = fit_outcome_regression(data, cmp_cell, t, g - 1);
    Eigen::ArrayXd trt = cell_mask(data, trt_cell), cmp = cell_mask(data, cmp_cell);
    Eigen::ArrayXd p = pf.predict_all(design).array();
    Eigen::ArrayXd m = (design * orf.gamma_std).array();
    Eigen::ArrayXd r = dy.array() - m;
    Eigen::ArrayXd w1 = trt / trt.mean();
    Eigen::ArrayXd odds = cmp * p / (1.0 - p);
    double om = odds.mean();
    if (!(om > 1e-12)) throw EstimationError("degenerate propensity in DiD baseline");
    Eigen::ArrayXd w0 = odds / om;
    return ((w1 - w0) * r).mean();
  };

  AttCell out;
  out.g = g;
  out.t = t;
  out.estimand = Estimand::DiffDRDiD;
  out.estimate = drdid_within(1) - drdid_within(0);
  out.diag.biased_baseline = true;
  out.diag.n_treated = mask_count(cell_mask(data, CellSpec{EnablingPeriod::at(g), 1}));
  (void)n;
  return out;
}

AttCell att_3wfe_two_period_baselines(const PanelDataset& data, ThreeWfeVariant variant) {
  if (data.T() != 2)
    throw EstimationError("3WFE baselines require exactly two periods (after trimming)");
  const int n = data.n(), d = data.d();
  for (int i = 0; i < n; ++i)
    if (data.S(i).is_finite() && data.S(i).value() != 2)
      throw EstimationError("3WFE baselines require cohorts {2, never}");

  Eigen::ArrayXd s2(n), q(n);
  for (int i = 0; i < n; ++i) {
    s2[i] = data.S(i).is_finite() ? 1.0 : 0.0;
    q[i] = data.Q(i);
  }
  Eigen::ArrayXd D = s2 * q;

  Eigen::MatrixXd Xmat;
  Eigen::VectorXd y;
  int d_col;
  if (variant == ThreeWfeVariant::Interacted) {
    // First-differenced form: unit effects drop out with T = 2.
    y = outcome_diff(data, 2, 1);
    Xmat.resize(n, 4 + d);
    Xmat.col(0).setOnes();
    Xmat.col(1) = s2.matrix();
    Xmat.col(2) = q.matrix();
    Xmat.col(3) = D.matrix();
    d_col = 3;
    Xmat.rightCols(d) = data.covariates();
  } else {
    // Pooled Mundlak form: levels with group dummies and time interactions.
    y.resize(2 * n);
    y.head(n) = data.outcomes().col(0);
    y.tail(n) = data.outcomes().col(1);
    Xmat.resize(2 * n, 8 + d);
    for (int rep = 0; rep < 2; ++rep) {
      double t2 = static_cast<double>(rep);  // 0 for period 1, 1 for period 2
      for (int i = 0; i < n; ++i) {
        int r = rep * n + i;
        Xmat(r, 0) = 1.0;
        Xmat(r, 1) = s2[i];
        Xmat(r, 2) = q[i];
        Xmat(r, 3) = s2[i] * q[i];
        Xmat(r, 4) = t2;
        Xmat(r, 5) = s2[i] * t2;
        Xmat(r, 6) = q[i] * t2;
        Xmat(r, 7) = D[i] * t2;
        for (int j = 0; j < d; ++j) Xmat(r, 8 + j) = data.covariates()(i, j);
      }
    }
    d_col = 7;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xmat);
  qr.setThreshold(1e-10);
  if (qr.rank() < Xmat.cols())
    throw EstimationError("collinear design in 3WFE baseline regression");
  Eigen::VectorXd beta = qr.solve(y);

  AttCell out;
  out.g = 2;
  out.t = 2;
  out.gc = EnablingPeriod::never();
  out.estimand = variant == ThreeWfeVariant::Interacted ? Estimand::ThreeWFE
                                                        : Estimand::Mundlak3WFE;
  out.estimate = beta[d_col];
  out.diag.biased_baseline = true;
  return out;
}

}  // namespace ddd
