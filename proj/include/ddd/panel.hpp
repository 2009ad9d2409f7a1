#pragma once
// Panel container, CSV ingestion, structural validation, effective-sample
// trimming, and cohort/comparison-set construction.

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ddd/types.hpp"

namespace ddd {

// Column naming for CSV ingestion.  When `covariates` is empty and
// `auto_covariates` is true, every column whose name starts with "x_" is a
// covariate.  A column named `cluster` (if present) supplies cluster ids.
struct ColumnSchema {
  std::string id = "id";
  std::string time = "time";
  std::string outcome = "y";
  std::string enabling = "s";
  std::string eligible = "q";
  std::string cluster = "cluster";
  std::vector<std::string> covariates;
  bool auto_covariates = true;
};

// Immutable balanced unit-by-period panel.  Construct through `from_arrays`
// (which validates) or `load_csv`; thereafter safely shareable across threads.
class PanelDataset {
 public:
  // Validating constructor.  `outcomes` is n x T with column t-1 holding
  // period t; `period_labels` are the original calendar labels in order.
  static PanelDataset from_arrays(std::vector<std::string> unit_ids,
                                  std::vector<long long> period_labels,
                                  Eigen::MatrixXd outcomes,
                                  std::vector<EnablingPeriod> enabling,
                                  std::vector<int> eligible,
                                  Eigen::MatrixXd covariates,
                                  std::vector<std::string> covariate_names = {},
                                  std::optional<std::vector<std::string>> cluster_ids =
                                      std::nullopt);

  int n() const { return static_cast<int>(outcomes_.rows()); }
  int T() const { return static_cast<int>(outcomes_.cols()); }
  int d() const { return static_cast<int>(covariates_.cols()); }

  // Outcome Y_{i,t} for re-indexed period t in 1..T.
  double y(int i, int t) const { return outcomes_(i, t - 1); }
  const Eigen::MatrixXd& outcomes() const { return outcomes_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  const std::vector<EnablingPeriod>& enabling() const { return enabling_; }
  const std::vector<int>& eligible() const { return eligible_; }
  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  const std::vector<long long>& period_labels() const { return period_labels_; }
  const std::optional<std::vector<std::string>>& cluster_ids() const {
    return cluster_ids_;
  }

  EnablingPeriod S(int i) const { return enabling_[i]; }
  int Q(int i) const { return eligible_[i]; }

  // Derived treatment cohort: G = S when eligible, never otherwise.
  EnablingPeriod G(int i) const {
    return eligible_[i] == 1 ? enabling_[i] : EnablingPeriod::never();
  }

  // Treatment indicator D_{i,t} = 1{t >= S_i, Q_i = 1}.
  bool treated(int i, int t) const {
    return eligible_[i] == 1 && enabling_[i].is_finite() && enabling_[i].value() <= t;
  }

 private:
  PanelDataset() = default;
  std::vector<std::string> unit_ids_;
  std::vector<long long> period_labels_;
  Eigen::MatrixXd outcomes_;
  std::vector<EnablingPeriod> enabling_;
  std::vector<int> eligible_;
  Eigen::MatrixXd covariates_;
  std::vector<std::string> covariate_names_;
  std::optional<std::vector<std::string>> cluster_ids_;
};

// Treated cohorts, enabling support, admissible comparison sets and
// (s,q) cell counts for overlap diagnostics.
struct CohortIndex {
  std::vector<int> treated_cohorts;               // finite g with S=g, Q=1 units
  std::vector<EnablingPeriod> enabling_support;   // sorted, never-enabled last
  // (g, t) -> comparison cohorts { g_c in support : g_c > max(g, t) }; for
  // pre-treatment t < g the constraint is g_c > g.
  std::map<std::pair<int, int>, std::vector<EnablingPeriod>> comparison_sets;
  // (s, q) -> unit count, with s encoded by its string form ("Inf" for never).
  std::map<std::pair<std::string, int>, int> cell_counts;

  const std::vector<EnablingPeriod>& comparisons(int g, int t) const;
};

PanelDataset load_csv(const std::string& path, const ColumnSchema& schema = {});
void save_csv(const PanelDataset& data, const std::string& path,
              const ColumnSchema& schema = {});

// Drop all periods at or after the largest finite enabling period when no
// never-enabled group exists, recoding the last cohort as never-enabled.
// Identity when a never-enabled group is already present.
PanelDataset trim_to_effective_sample(const PanelDataset& data);

CohortIndex cohort_index(const PanelDataset& data);

}  // namespace ddd
