#include "ddd/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <unordered_map>

#include "ddd/rng.hpp"

namespace ddd {

namespace {

// Collapse unit rows into cluster sums (order of first appearance).
Eigen::MatrixXd cluster_sums(const Eigen::MatrixXd& rows,
                             const std::vector<std::string>& cluster_ids) {
  std::unordered_map<std::string, int> pos;
  std::vector<int> row_of(rows.rows());
  int c = 0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    auto [it, inserted] = pos.try_emplace(cluster_ids[i], c);
    if (inserted) ++c;
    row_of[i] = it->second;
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(c, rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out.row(row_of[i]) += rows.row(i);
  return out;
}

// Type-7 (linear interpolation) empirical quantile of a sorted copy.
double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = q * (static_cast<double>(v.size()) - 1.0);
  const auto lo = static_cast<size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

double analytic_se(const Eigen::VectorXd& psi,
                   const std::optional<std::vector<std::string>>& cluster_ids) {
  const double n = static_cast<double>(psi.size());
  if (!cluster_ids) return psi.norm() / n;  // sqrt(sum psi^2 / n) / sqrt(n)
  if (cluster_ids->size() != static_cast<size_t>(psi.size()))
    throw EstimationError("cluster id count does not match influence length");
  Eigen::MatrixXd sums = cluster_sums(psi, *cluster_ids);
  if (sums.rows() < 2) throw EstimationError("need at least 2 clusters");
  return sums.norm() / n;
}

InferenceResult multiplier_bootstrap(
    const Eigen::MatrixXd& influence, const Eigen::VectorXd& estimates,
    const BootstrapOptions& opts,
    const std::optional<std::vector<std::string>>& cluster_ids) {
  const Eigen::Index n = influence.rows(), m = influence.cols();
  if (estimates.size() != m)
    throw EstimationError("estimate count does not match influence columns");
  if (opts.B < 199) throw ConfigError("bootstrap needs B >= 199");

  Eigen::MatrixXd rows = cluster_ids ? cluster_sums(influence, *cluster_ids) : influence;
  const Eigen::Index nr = rows.rows();

  // Mammen two-point weights: values (1 -/+ sqrt5)/2, P(low) = (sqrt5+1)/(2 sqrt5),
  // giving mean 0 and variance 1.
  const double sqrt5 = std::sqrt(5.0);
  const double w_lo = (1.0 - sqrt5) / 2.0, w_hi = (1.0 + sqrt5) / 2.0;
  const double p_lo = (sqrt5 + 1.0) / (2.0 * sqrt5);

  Eigen::MatrixXd draws(opts.B, m);
  int nthreads = opts.threads > 0 ? opts.threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
  if (nthreads < 1) nthreads = 1;
  std::atomic<int> next_draw{0};
  auto worker = [&]() {
    for (;;) {
      int b = next_draw.fetch_add(1);
      if (b >= opts.B) return;
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
      for (Eigen::Index j = 0; j < nr; ++j) {
        // Counter-based: the weight depends only on (seed, draw, row index).
        double u = (static_cast<double>(
                        counter_hash(opts.seed, static_cast<std::uint64_t>(b),
                                     static_cast<std::uint64_t>(j)) >>
                        11) +
                    0.5) *
                   0x1.0p-53;
        double v = opts.rademacher ? (u < 0.5 ? -1.0 : 1.0)
                                   : (u < p_lo ? w_lo : w_hi);
        acc += v * rows.row(j).transpose();
      }
      draws.row(b) = acc.transpose() / static_cast<double>(n);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  InferenceResult out;
  out.estimates = estimates;
  out.B = opts.B;
  out.seed = opts.seed;
  out.clustered = cluster_ids.has_value();
  out.analytic_se.resize(m);
  for (Eigen::Index j = 0; j < m; ++j)
    out.analytic_se[j] = analytic_se(influence.col(j), cluster_ids);

  const double z_iqr = 2.0 * 0.6744897501960817;  // z_{0.75} - z_{0.25}
  const double z_pt = inverse_normal_cdf(1.0 - opts.alpha / 2.0);
  out.boot_se.resize(m);
  out.ci_lo.resize(m);
  out.ci_hi.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    std::vector<double> col(draws.col(j).data(), draws.col(j).data() + opts.B);
    double se = (quantile(col, 0.75) - quantile(col, 0.25)) / z_iqr;
    out.boot_se[j] = se;
    if (se <= 0.0) out.degenerate_columns.push_back(static_cast<int>(j));
    out.ci_lo[j] = estimates[j] - z_pt * se;
    out.ci_hi[j] = estimates[j] + z_pt * se;
  }

  if (opts.simultaneous) {
    std::vector<double> maxstat;
    maxstat.reserve(opts.B);
    for (int b = 0; b < opts.B; ++b) {
      double mx = 0.0;
      for (Eigen::Index j = 0; j < m; ++j)
        if (out.boot_se[j] > 0.0)
          mx = std::max(mx, std::abs(draws(b, j)) / out.boot_se[j]);
      maxstat.push_back(mx);
    }
    // Floor at the pointwise quantile so the band always contains the
    // pointwise interval, even when few non-degenerate columns remain.
    out.simultaneous_crit = std::max(quantile(maxstat, 1.0 - opts.alpha), z_pt);
    out.band_lo.resize(m);
    out.band_hi.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      out.band_lo[j] = estimates[j] - out.simultaneous_crit * out.boot_se[j];
      out.band_hi[j] = estimates[j] + out.simultaneous_crit * out.boot_se[j];
    }
  }
  return out;
}

}  // namespace ddd
