#include "ddd/driver.hpp"

#include <cmath>
#include <limits>

#include "ddd/rng.hpp"

namespace ddd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Compute the per-(g,t) cell for one comparison cohort under the chosen
// estimand.
AttCell single_cell(const PanelDataset& data, const CohortIndex& index,
                    const EstimateOptions& opts, int g, int t, EnablingPeriod gc) {
  switch (opts.estimand) {
    case Estimand::NoCov:
      return att_no_covariates(data, index, g, t, gc);
    case Estimand::DR:
    case Estimand::RA:
    case Estimand::IPW: {
      if (t == g - 1)  // baseline: avoid fitting nuisances for an exact zero
        return att_no_covariates(data, index, g, t, gc);
      NuisanceBundle b = fit_nuisance_bundle(data, g, t, gc);
      if (opts.estimand == Estimand::DR)
        return att_dr(data, index, b, g, t, gc, opts.estimation_effect);
      if (opts.estimand == Estimand::RA)
        return att_ra(data, index, b, g, t, gc, opts.estimation_effect);
      return att_ipw(data, index, b, g, t, gc, opts.estimation_effect);
    }
    default:
      throw ConfigError("estimand not valid for per-comparison cells");
  }
}

AttCell combined_cell(const PanelDataset& data, const CohortIndex& index,
                      const EstimateOptions& opts, int g, int t) {
  if (opts.comparison == ComparisonMode::PooledBaseline)
    return att_pooled_nyt_baseline(data, index, g, t);
  const auto& comparisons = index.comparisons(g, t);
  if (comparisons.empty())
    throw EstimationError("(g=" + std::to_string(g) + ", t=" + std::to_string(t) +
                          ") has no admissible comparison cohort");
  if (opts.comparison == ComparisonMode::Never) {
    for (auto gc : comparisons)
      if (gc.is_never()) return single_cell(data, index, opts, g, t, gc);
    throw EstimationError("no never-enabled comparison for (g=" + std::to_string(g) +
                          ", t=" + std::to_string(t) + ")");
  }
  if (opts.comparison == ComparisonMode::Cohort) {
    for (auto gc : comparisons)
      if (gc.is_finite() && gc.value() == opts.cohort_gc)
        return single_cell(data, index, opts, g, t, gc);
    throw EstimationError("cohort " + std::to_string(opts.cohort_gc) +
                          " not admissible for (g=" + std::to_string(g) +
                          ", t=" + std::to_string(t) + ")");
  }
  // GMM over every admissible comparison.
  std::vector<AttCell> cells;
  for (auto gc : comparisons) cells.push_back(single_cell(data, index, opts, g, t, gc));
  if (cells.size() == 1) return cells.front();
  if (t == g - 1) return cells.front();  // all exact zeros
  auto omega = estimate_omega(InfluenceMatrix::from_cells(cells));
  return gmm_combine(cells, omega);
}

std::string join_warnings(const Diagnostics& d) {
  std::string out;
  for (const auto& w : d.warnings) {
    if (!out.empty()) out += "; ";
    out += w;
  }
  return out;
}

}  // namespace

std::map<std::pair<int, int>, AttCell> combined_cells(const PanelDataset& data,
                                                      const CohortIndex& index,
                                                      const EstimateOptions& opts,
                                                      bool include_pretreatment) {
  std::map<std::pair<int, int>, AttCell> out;
  for (int g : index.treated_cohorts) {
    for (int t = include_pretreatment ? 2 : g; t <= data.T(); ++t) {
      if (!include_pretreatment && t < g) continue;
      if (opts.comparison == ComparisonMode::PooledBaseline && t < g) continue;
      try {
        out.emplace(std::pair{g, t}, combined_cell(data, index, opts, g, t));
      } catch (const EstimationError&) {
        // non-estimable cell: omitted from the table
      }
    }
  }
  return out;
}

std::vector<AttRow> estimate_table(const PanelDataset& data,
                                   const EstimateOptions& opts) {
  CohortIndex index = cohort_index(data);
  auto cells = combined_cells(data, index, opts, /*include_pretreatment=*/true);

  std::vector<AttRow> rows;
  std::vector<Eigen::Index> boot_cols;
  std::vector<double> boot_ests;
  Eigen::MatrixXd psi(data.n(), 0);

  auto clusters = opts.cluster_ids ? opts.cluster_ids : data.cluster_ids();
  const double z = inverse_normal_cdf(1.0 - opts.alpha / 2.0);

  for (auto& [key, cell] : cells) {
    auto [g, t] = key;
    if (t == g - 1) continue;  // trivial baseline row
    AttRow row;
    row.g = g;
    row.t = t;
    row.comparison = cell.comparison_label();
    row.estimate = cell.estimate;
    row.n_treated = cell.diag.n_treated;
    row.warnings = join_warnings(cell.diag);
    row.boot_se = kNaN;
    if (cell.influence.size() > 0) {
      row.influence = cell.influence;
      row.analytic_se = analytic_se(cell.influence, clusters);
      boot_cols.push_back(static_cast<Eigen::Index>(rows.size()));
      boot_ests.push_back(cell.estimate);
      psi.conservativeResize(Eigen::NoChange, psi.cols() + 1);
      psi.col(psi.cols() - 1) = cell.influence;
    } else {
      row.analytic_se = kNaN;
    }
    row.ci_lo = row.estimate - z * row.analytic_se;
    row.ci_hi = row.estimate + z * row.analytic_se;
    rows.push_back(std::move(row));
  }

  if (opts.bootstrap_B > 0 && psi.cols() > 0) {
    BootstrapOptions bo;
    bo.B = opts.bootstrap_B;
    bo.alpha = opts.alpha;
    bo.seed = opts.seed;
    bo.threads = opts.threads;
    Eigen::VectorXd ests =
        Eigen::Map<Eigen::VectorXd>(boot_ests.data(), static_cast<Eigen::Index>(boot_ests.size()));
    InferenceResult ir = multiplier_bootstrap(psi, ests, bo, clusters);
    for (size_t j = 0; j < boot_cols.size(); ++j) {
      AttRow& row = rows[static_cast<size_t>(boot_cols[j])];
      row.boot_se = ir.boot_se[static_cast<Eigen::Index>(j)];
      row.ci_lo = ir.ci_lo[static_cast<Eigen::Index>(j)];
      row.ci_hi = ir.ci_hi[static_cast<Eigen::Index>(j)];
    }
  }
  return rows;
}

EsTable event_study_table(const PanelDataset& data, const EstimateOptions& opts,
                          int e_min, int e_max) {
  if (opts.comparison == ComparisonMode::PooledBaseline)
    throw ConfigError("event study requires a valid comparison mode, not the pooled baseline");
  CohortIndex index = cohort_index(data);
  auto cells = combined_cells(data, index, opts, /*include_pretreatment=*/true);
  EventStudyResult es = event_study(cells, data, index, {e_min, e_max});

  EsTable out;
  out.warnings = es.warnings;
  auto clusters = opts.cluster_ids ? opts.cluster_ids : data.cluster_ids();
  const double z = inverse_normal_cdf(1.0 - opts.alpha / 2.0);

  Eigen::VectorXd ases(es.estimates.size());
  for (Eigen::Index j = 0; j < es.estimates.size(); ++j)
    ases[j] = analytic_se(es.influence.col(j), clusters);

  InferenceResult ir;
  bool have_boot = opts.bootstrap_B > 0;
  if (have_boot) {
    BootstrapOptions bo;
    bo.B = opts.bootstrap_B;
    bo.alpha = opts.alpha;
    bo.seed = opts.seed;
    bo.simultaneous = true;
    bo.threads = opts.threads;
    ir = multiplier_bootstrap(es.influence, es.estimates, bo, clusters);
    out.simultaneous_crit = ir.simultaneous_crit;
  }
  for (Eigen::Index j = 0; j < es.estimates.size(); ++j) {
    EsRow row;
    row.e = es.event_times[static_cast<size_t>(j)];
    row.estimate = es.estimates[j];
    row.analytic_se = ases[j];
    if (have_boot) {
      row.boot_se = ir.boot_se[j];
      row.ci_lo = ir.ci_lo[j];
      row.ci_hi = ir.ci_hi[j];
      row.band_lo = ir.band_lo[j];
      row.band_hi = ir.band_hi[j];
    } else {
      row.boot_se = kNaN;
      row.ci_lo = row.estimate - z * ases[j];
      row.ci_hi = row.estimate + z * ases[j];
      row.band_lo = row.ci_lo;
      row.band_hi = row.ci_hi;
    }
    out.rows.push_back(row);
  }
  auto [avg, avg_if] = overall_average(es);
  out.overall = avg;
  out.overall_se = analytic_se(avg_if, clusters);
  return out;
}

}  // namespace ddd
