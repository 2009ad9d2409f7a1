#include "ddd/influence.hpp"

#include <cmath>

namespace ddd {

InfluenceMatrix InfluenceMatrix::from_cells(const std::vector<AttCell>& cells) {
  if (cells.empty()) throw EstimationError("no cells to stack");
  InfluenceMatrix out;
  const auto n = cells.front().influence.size();
  if (n == 0) throw EstimationError("cells carry no influence columns");
  out.psi.resize(n, static_cast<Eigen::Index>(cells.size()));
  for (size_t j = 0; j < cells.size(); ++j) {
    if (cells[j].influence.size() != n)
      throw EstimationError("influence column length mismatch");
    out.psi.col(static_cast<Eigen::Index>(j)) = cells[j].influence;
    out.labels.push_back(cells[j].comparison_label());
  }
  return out;
}

Eigen::VectorXd influence_dr(const PanelDataset& data, const CohortIndex& index,
                             const NuisanceBundle& bundle, int g, int t,
                             EnablingPeriod gc, bool with_estimation_effect) {
  return att_dr(data, index, bundle, g, t, gc, with_estimation_effect).influence;
}

OmegaHat estimate_omega(const InfluenceMatrix& infl) {
  const auto n = infl.psi.rows();
  const auto k = infl.psi.cols();
  if (n <= k) throw EstimationError("need more units than influence columns");
  OmegaHat out;
  out.omega = infl.psi.transpose() * infl.psi / static_cast<double>(n);

  // Greedy forward pruning: keep a column only if the retained submatrix
  // stays numerically invertible (condition number <= 1e10).
  constexpr double kMaxCondition = 1e10;
  for (Eigen::Index j = 0; j < k; ++j) {
    std::vector<int> cand = out.retained;
    cand.push_back(static_cast<int>(j));
    Eigen::MatrixXd sub(cand.size(), cand.size());
    for (size_t a = 0; a < cand.size(); ++a)
      for (size_t b = 0; b < cand.size(); ++b) sub(a, b) = out.omega(cand[a], cand[b]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (hi <= 0.0) continue;                     // zero-variance column
    if (lo <= 0.0 || hi / lo > kMaxCondition) continue;  // (near-)collinear
    out.retained = std::move(cand);
  }
  if (out.retained.empty())
    throw EstimationError("all influence columns pruned (degenerate Omega)");
  return out;
}

namespace {

// Solve Omega x = 1 with a symmetric factorization; fall back to a reported
// ridge only when the factorization fails outright.
Eigen::VectorXd solve_ones(Eigen::MatrixXd omega, bool* ridge_used) {
  const auto k = omega.rows();
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(k);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(omega);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    Eigen::VectorXd x = ldlt.solve(ones);
    if ((omega * x - ones).cwiseAbs().maxCoeff() < 1e-6 * (1.0 + ones.norm()))
      return x;
  }
  *ridge_used = true;
  const double ridge = 1e-10 * omega.trace() / static_cast<double>(k);
  omega.diagonal().array() += ridge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt2(omega);
  if (ldlt2.info() != Eigen::Success)
    throw EstimationError("Omega singular even after ridge");
  return ldlt2.solve(ones);
}

}  // namespace

AttCell gmm_combine(const std::vector<AttCell>& cells, const OmegaHat& omega) {
  if (cells.empty()) throw EstimationError("gmm_combine on empty cell list");
  const int k = static_cast<int>(cells.size());
  if (omega.omega.rows() != k)
    throw EstimationError("Omega dimension does not match cell count");
  for (const auto& c : cells)
    if (c.g != cells[0].g || c.t != cells[0].t || c.estimand != cells[0].estimand)
      throw EstimationError("gmm_combine cells must share (g,t) and estimand");

  const auto& ret = omega.retained;
  Eigen::MatrixXd sub(ret.size(), ret.size());
  for (size_t a = 0; a < ret.size(); ++a)
    for (size_t b = 0; b < ret.size(); ++b) sub(a, b) = omega.omega(ret[a], ret[b]);

  AttCell out;
  out.g = cells[0].g;
  out.t = cells[0].t;
  out.estimand = cells[0].estimand;
  out.combiner = "gmm";
  out.diag.n_treated = cells[0].diag.n_treated;  // shared treated cell
  bool ridge_used = false;
  Eigen::VectorXd x = solve_ones(sub, &ridge_used);
  const double denom = x.sum();
  if (!(std::abs(denom) > 0))
    throw EstimationError("GMM weight normalization degenerate");
  Eigen::VectorXd w_sub = x / denom;

  out.combo_weights = Eigen::VectorXd::Zero(k);
  for (size_t a = 0; a < ret.size(); ++a) out.combo_weights[ret[a]] = w_sub[a];
  out.estimate = 0.0;
  const auto n = cells[0].influence.size();
  out.influence = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < k; ++j) {
    out.estimate += out.combo_weights[j] * cells[j].estimate;
    if (out.combo_weights[j] != 0.0)
      out.influence += out.combo_weights[j] * cells[j].influence;
    out.diag.extreme_pscores += cells[j].diag.extreme_pscores;
    out.diag.nuisance_converged =
        out.diag.nuisance_converged && cells[j].diag.nuisance_converged;
  }
  out.diag.ridge_used = ridge_used;
  if (ridge_used)
    out.diag.warnings.push_back("ridge added to Omega during GMM combination");
  if (static_cast<int>(ret.size()) < k)
    out.diag.warnings.push_back("collinear influence columns pruned: " +
                                std::to_string(k - static_cast<int>(ret.size())));
  return out;
}

AttCell weighted_combine(const std::vector<AttCell>& cells,
                         const Eigen::VectorXd& weights) {
  if (cells.empty()) throw EstimationError("weighted_combine on empty cell list");
  if (weights.size() != static_cast<Eigen::Index>(cells.size()))
    throw EstimationError("weight count does not match cell count");
  if (std::abs(weights.sum() - 1.0) > 1e-10)
    throw EstimationError("combination weights must sum to 1");
  AttCell out;
  out.g = cells[0].g;
  out.t = cells[0].t;
  out.estimand = cells[0].estimand;
  out.combiner = "weighted";
  out.combo_weights = weights;
  out.estimate = 0.0;
  out.influence = Eigen::VectorXd::Zero(cells[0].influence.size());
  for (size_t j = 0; j < cells.size(); ++j) {
    out.estimate += weights[j] * cells[j].estimate;
    out.influence += weights[j] * cells[j].influence;
  }
  return out;
}

}  // namespace ddd
