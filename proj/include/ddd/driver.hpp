#pragma once
// High-level estimation pipelines shared by the CLI and the Python bindings:
// the full ATT(g,t) table over all estimable cells, and the event-study path
// with inference.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ddd/aggregate.hpp"
#include "ddd/estimators.hpp"
#include "ddd/inference.hpp"
#include "ddd/influence.hpp"

namespace ddd {

enum class ComparisonMode { Gmm, Never, Cohort, PooledBaseline };

struct EstimateOptions {
  Estimand estimand = Estimand::DR;
  ComparisonMode comparison = ComparisonMode::Gmm;
  int cohort_gc = 0;               // for ComparisonMode::Cohort
  bool estimation_effect = true;   // nuisance estimation-effect terms in psi
  double alpha = 0.05;
  int bootstrap_B = 0;             // 0 = analytic inference only
  std::uint64_t seed = 42;
  int threads = 0;
  std::optional<std::vector<std::string>> cluster_ids;  // defaults to data's
};

struct AttRow {
  int g = 0, t = 0;
  std::string comparison;          // "gmm", "pooled", or a cohort label
  double estimate = 0.0;
  double analytic_se = 0.0;
  double boot_se = 0.0;            // NaN when bootstrap disabled or no IF
  double ci_lo = 0.0, ci_hi = 0.0;
  int n_treated = 0;
  std::string warnings;
  Eigen::VectorXd influence;       // empty for regression baselines
};

// One row per estimable (g,t): post-treatment cells t >= g plus pre-treatment
// placebo cells, skipping the trivial t = g-1 baseline.  With
// ComparisonMode::Cohort the requested comparison cohort is used where
// admissible; rows whose cells cannot be computed are skipped with a warning
// entry.
std::vector<AttRow> estimate_table(const PanelDataset& data,
                                   const EstimateOptions& opts);

struct EsRow {
  int e = 0;
  double estimate = 0.0, analytic_se = 0.0, boot_se = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0, band_lo = 0.0, band_hi = 0.0;
};

struct EsTable {
  std::vector<EsRow> rows;
  double simultaneous_crit = 0.0;
  double overall = 0.0, overall_se = 0.0;
  std::vector<std::string> warnings;
};

// Event-study path over [e_min, e_max] using the chosen estimand/comparison
// per (g, g+e) cell, with multiplier-bootstrap bands when B > 0.
EsTable event_study_table(const PanelDataset& data, const EstimateOptions& opts,
                          int e_min, int e_max);

// Per-(g,t) combined (or single-comparison) AttCells, the event-study input.
std::map<std::pair<int, int>, AttCell> combined_cells(const PanelDataset& data,
                                                      const CohortIndex& index,
                                                      const EstimateOptions& opts,
                                                      bool include_pretreatment);

}  // namespace ddd
