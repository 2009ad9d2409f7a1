#include "ddd/aggregate.hpp"

#include <cmath>

namespace ddd {

ShareResult cohort_share(const PanelDataset& data, const CohortIndex& index, int g,
                         int e) {
  (void)index;
  const int n = data.n(), T = data.T();
  Eigen::ArrayXd avail(n), is_g(n);
  for (int i = 0; i < n; ++i) {
    EnablingPeriod G = data.G(i);
    bool a = G.is_finite() && G.value() + e >= 1 && G.value() + e <= T;
    avail[i] = a ? 1.0 : 0.0;
    is_g[i] = (a && G.value() == g) ? 1.0 : 0.0;
  }
  const double p_avail = avail.mean();
  if (!(p_avail > 0))
    throw EstimationError("no treated cohort available at event time " + std::to_string(e));
  ShareResult out;
  out.share = is_g.sum() / avail.sum();
  out.xi = ((is_g - out.share * avail) / p_avail).matrix();
  return out;
}

EventStudyResult event_study(const std::map<std::pair<int, int>, AttCell>& cells,
                             const PanelDataset& data, const CohortIndex& index,
                             std::pair<int, int> e_range) {
  const int n = data.n(), T = data.T();
  EventStudyResult out;
  std::vector<Eigen::VectorXd> cols;
  std::vector<double> ests;

  for (int e = e_range.first; e <= e_range.second; ++e) {
    if (e == -1) {
      out.event_times.push_back(e);
      ests.push_back(0.0);
      cols.push_back(Eigen::VectorXd::Zero(n));
      for (int g : index.treated_cohorts)
        if (g + e >= 1 && g + e <= T) {
          ShareResult sr = cohort_share(data, index, g, e);
          out.shares[{g, e}] = sr.share;
        }
      continue;
    }
    // Cohorts whose event time e falls inside the panel and with a cell.
    std::vector<int> gs_avail, gs_used;
    for (int g : index.treated_cohorts)
      if (g + e >= 1 && g + e <= T) {
        gs_avail.push_back(g);
        if (cells.count({g, g + e})) gs_used.push_back(g);
      }
    if (gs_avail.empty())
      throw EstimationError("no cohort available at event time " + std::to_string(e));
    if (gs_used.empty())
      throw EstimationError("no ATT cell supplied for any cohort at event time " +
                            std::to_string(e));

    double total_share = 0.0;
    std::map<int, ShareResult> shares;
    for (int g : gs_used) {
      shares[g] = cohort_share(data, index, g, e);
      total_share += shares[g].share;
    }
    if (gs_used.size() < gs_avail.size()) {
      out.warnings.push_back("event time " + std::to_string(e) +
                             ": cohorts without cells dropped, shares renormalized");
      if (!(total_share > 0))
        throw EstimationError("zero total share at event time " + std::to_string(e));
    }

    double est = 0.0;
    Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
    for (int g : gs_used) {
      const AttCell& cell = cells.at({g, g + e});
      const double w = shares[g].share / total_share;
      out.shares[{g, e}] = w;
      est += w * cell.estimate;
      if (cell.influence.size() != n)
        throw EstimationError("ATT cell for (g=" + std::to_string(g) +
                              ", t=" + std::to_string(g + e) + ") lacks influence values");
      col += w * cell.influence + (shares[g].xi / total_share) * cell.estimate;
    }
    out.event_times.push_back(e);
    ests.push_back(est);
    cols.push_back(std::move(col));
  }

  out.estimates = Eigen::Map<Eigen::VectorXd>(ests.data(), static_cast<Eigen::Index>(ests.size()));
  out.influence.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j)
    out.influence.col(static_cast<Eigen::Index>(j)) = cols[j];
  return out;
}

std::pair<double, Eigen::VectorXd> overall_average(const EventStudyResult& es) {
  std::vector<int> post;
  for (size_t j = 0; j < es.event_times.size(); ++j)
    if (es.event_times[j] >= 0) post.push_back(static_cast<int>(j));
  if (post.empty()) throw EstimationError("no post-treatment event times to average");
  double est = 0.0;
  Eigen::VectorXd infl = Eigen::VectorXd::Zero(es.influence.rows());
  for (int j : post) {
    est += es.estimates[j];
    infl += es.influence.col(j);
  }
  est /= static_cast<double>(post.size());
  infl /= static_cast<double>(post.size());
  return {est, infl};
}

}  // namespace ddd
