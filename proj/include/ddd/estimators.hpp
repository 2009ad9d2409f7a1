#pragma once
// ATT(g,t) estimators for one comparison cohort: doubly robust (DR),
// regression adjustment (RA), inverse probability weighting (IPW), the
// closed-form no-covariate estimator, and three deliberately biased baselines
// kept for failure demonstrations (pooled not-yet-treated, difference of DR
// DiDs, and the two-period three-way-fixed-effects regressions).

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ddd/nuisance.hpp"
#include "ddd/panel.hpp"

namespace ddd {

enum class Estimand { DR, RA, IPW, NoCov, PooledNYT, DiffDRDiD, ThreeWFE, Mundlak3WFE };
std::string to_string(Estimand e);

struct Diagnostics {
  std::map<std::string, int> cell_sizes;
  int n_treated = 0;
  int extreme_pscores = 0;        // fitted p outside [1e-3, 1-1e-3], any pair
  bool nuisance_converged = true;
  bool biased_baseline = false;
  bool ridge_used = false;        // set by gmm_combine on factorization rescue
  std::vector<std::string> warnings;
};

// One ATT(g,t) estimate.  `gc` identifies the comparison cohort for
// single-comparison estimands; `combiner` is "gmm"/"pooled"/"" for combined,
// pooled-baseline, and plain cells respectively.  `influence` is length n for
// DR/RA/IPW/NoCov (and combinations thereof) and empty for the regression
// baselines.
struct AttCell {
  int g = 0, t = 0;
  std::optional<EnablingPeriod> gc;
  std::string combiner;
  Estimand estimand = Estimand::DR;
  double estimate = 0.0;
  Eigen::VectorXd influence;
  Eigen::VectorXd combo_weights;  // set by gmm/weighted combination
  Diagnostics diag;

  std::string comparison_label() const {
    if (!combiner.empty()) return combiner;
    return gc ? gc->to_string() : "";
  }
};

AttCell att_dr(const PanelDataset& data, const CohortIndex& index,
               const NuisanceBundle& bundle, int g, int t, EnablingPeriod gc,
               bool with_estimation_effect = true);
AttCell att_ra(const PanelDataset& data, const CohortIndex& index,
               const NuisanceBundle& bundle, int g, int t, EnablingPeriod gc,
               bool with_estimation_effect = true);
AttCell att_ipw(const PanelDataset& data, const CohortIndex& index,
                const NuisanceBundle& bundle, int g, int t, EnablingPeriod gc,
                bool with_estimation_effect = true);

AttCell att_no_covariates(const PanelDataset& data, const CohortIndex& index,
                          int g, int t, EnablingPeriod gc);

// Eq.-(7)-style pooled baseline: single comparison group pooling every unit
// with S > t.  Biased under covariate- or cohort-specific trends; retained to
// demonstrate exactly that.
AttCell att_pooled_nyt_baseline(const PanelDataset& data, const CohortIndex& index,
                                int g, int t);

// Difference of two DR DiD estimators across the eligibility partition:
// a DR DiD among eligible units (treated S=g vs never-enabled) minus the same
// among ineligible units.  Collapses to the four-cell DDD without covariates;
// with covariates it integrates the two DiDs over different covariate
// distributions and is biased (the paper's point).  No influence function.
AttCell att_diff_of_drdids_baseline(const PanelDataset& data, int g, int t);

enum class ThreeWfeVariant { Interacted, Mundlak };

// Two-period three-way fixed-effects regressions (requires T = 2, cohorts
// {2, never}).  `Interacted`: first-differenced OLS of Y2-Y1 on
// (1, S-dummy, Q, D, X).  `Mundlak`: pooled OLS of Y on group dummies and
// their time interactions, D, and X.  Coefficient on D; no influence function.
AttCell att_3wfe_two_period_baselines(const PanelDataset& data, ThreeWfeVariant variant);

}  // namespace ddd
