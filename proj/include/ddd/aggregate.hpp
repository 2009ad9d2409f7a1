#pragma once
// Event-study aggregation: cohort shares with their influence rows, ES(e)
// paths with assembled influence columns, and the overall post-treatment
// average.

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ddd/estimators.hpp"

namespace ddd {

struct ShareResult {
  double share = 0.0;
  Eigen::VectorXd xi;  // length-n influence rows, mean zero
};

// P_n(G = g | G + e in [1, T]) over units with finite treatment cohort G,
// with xi_i = (1{G_i=g, avail_i} - share * avail_i) / P_n(avail).
ShareResult cohort_share(const PanelDataset& data, const CohortIndex& index, int g,
                         int e);

struct EventStudyResult {
  std::vector<int> event_times;
  Eigen::VectorXd estimates;                  // ES(e) per event time
  Eigen::MatrixXd influence;                  // n x |e| columns l^{es,e}
  std::map<std::pair<int, int>, double> shares;  // (g, e) -> share used
  std::string base_convention = "ES(-1) = 0 by construction";
  std::vector<std::string> warnings;
};

// ES(e) = sum_g share(g,e) * ATT(g, g+e) using the supplied per-(g,t) cells
// (GMM-combined or fixed-comparison).  The influence column adds the share
// estimation term: l = sum_g [ share * psi_{g,g+e} + xi^{g,e} * ATT(g,g+e) ].
// Cohorts available at e but lacking a cell are dropped with shares
// renormalized and a warning.  e = -1 is exactly zero.
EventStudyResult event_study(const std::map<std::pair<int, int>, AttCell>& cells,
                             const PanelDataset& data, const CohortIndex& index,
                             std::pair<int, int> e_range);

// Simple mean of ES(e) over post-treatment event times e >= 0.
std::pair<double, Eigen::VectorXd> overall_average(const EventStudyResult& es);

}  // namespace ddd
