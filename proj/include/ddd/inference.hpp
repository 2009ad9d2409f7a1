#pragma once
// Analytic standard errors from influence columns and the multiplier
// bootstrap (Mammen or Rademacher weights) for pointwise confidence intervals
// and simultaneous bands, with optional clustering.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ddd/types.hpp"

namespace ddd {

// se = sd(psi)/sqrt(n) (population 1/n variance); clustered form is
// sqrt( sum_c (sum_{i in c} psi_i)^2 ) / n.
double analytic_se(const Eigen::VectorXd& psi,
                   const std::optional<std::vector<std::string>>& cluster_ids =
                       std::nullopt);

struct BootstrapOptions {
  int B = 999;
  double alpha = 0.05;
  std::uint64_t seed = 42;
  bool simultaneous = false;
  bool rademacher = false;  // default: Mammen two-point weights
  int threads = 0;          // 0 = hardware concurrency
};

struct InferenceResult {
  Eigen::VectorXd estimates;
  Eigen::VectorXd analytic_se;
  Eigen::VectorXd boot_se;       // robust IQR-based scale of bootstrap draws
  Eigen::VectorXd ci_lo, ci_hi;  // pointwise, est +- z * boot_se
  Eigen::VectorXd band_lo, band_hi;  // simultaneous (when requested)
  double simultaneous_crit = 0.0;
  int B = 0;
  std::uint64_t seed = 0;
  bool clustered = false;
  std::vector<int> degenerate_columns;  // zero bootstrap scale
};

// Per draw b, each unit's (or cluster's summed) influence row is multiplied
// by an i.i.d. two-point weight; the draw statistic per column is the mean of
// the perturbed rows.  boot_se = (q75 - q25)/(z75 - z25); the simultaneous
// critical value is the (1-alpha) quantile over draws of max_j |draw_j|/se_j.
// Weights come from the counter-based RNG keyed on (seed, draw, row), so
// results are bit-identical for any thread count.
InferenceResult multiplier_bootstrap(
    const Eigen::MatrixXd& influence, const Eigen::VectorXd& estimates,
    const BootstrapOptions& opts,
    const std::optional<std::vector<std::string>>& cluster_ids = std::nullopt);

}  // namespace ddd
