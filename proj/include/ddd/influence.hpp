#pragma once
// Influence-function bookkeeping across comparison cohorts of one (g,t):
// the stacked psi matrix, its covariance Omega-hat with collinearity pruning,
// and the closed-form GMM-optimal combination.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ddd/estimators.hpp"

namespace ddd {

// n x k matrix of influence columns, one per comparison cohort of one (g,t).
struct InfluenceMatrix {
  Eigen::MatrixXd psi;               // n x k
  std::vector<std::string> labels;   // comparison-cohort tags per column

  static InfluenceMatrix from_cells(const std::vector<AttCell>& cells);
};

struct OmegaHat {
  Eigen::MatrixXd omega;       // full k x k matrix psi'psi / n
  std::vector<int> retained;   // columns surviving collinearity pruning
};

struct GmmWeights {
  Eigen::VectorXd w;  // length k; zero for pruned columns, sums to 1
};

// Standalone assembly of one DR influence column (Eq.-(17)/(18) style),
// identical to the column att_dr computes internally.
Eigen::VectorXd influence_dr(const PanelDataset& data, const CohortIndex& index,
                             const NuisanceBundle& bundle, int g, int t,
                             EnablingPeriod gc, bool with_estimation_effect = true);

// Omega-hat = psi'psi/n with greedy collinearity pruning: columns are added in
// order and skipped when they push the condition number above 1e10.
OmegaHat estimate_omega(const InfluenceMatrix& infl);

// Minimum-variance combination w = Omega^{-1} 1 / (1' Omega^{-1} 1) over the
// retained columns.  The combined influence column is psi * w, whose sample
// variance equals (1' Omega^{-1} 1)^{-1} exactly.  A tiny ridge
// (1e-10 * trace/k) is added only if the factorization fails, and reported.
AttCell gmm_combine(const std::vector<AttCell>& cells, const OmegaHat& omega);

// User-weighted combination; weights must sum to 1 (tolerance 1e-10).
AttCell weighted_combine(const std::vector<AttCell>& cells,
                         const Eigen::VectorXd& weights);

}  // namespace ddd
