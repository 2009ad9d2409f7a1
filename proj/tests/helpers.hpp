#pragma once
// Shared fixtures for the unit tests: tiny hand-made panels and a random
// panel generator independent of simlab.

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "ddd/panel.hpp"
#include "ddd/rng.hpp"

namespace ddd::testhelpers {

// Build a no-covariate panel from per-unit (S, Q, outcomes...) tuples.
inline PanelDataset make_panel(
    const std::vector<std::tuple<EnablingPeriod, int, std::vector<double>>>& units,
    int d = 0, const std::vector<std::vector<double>>& x = {}) {
  const int n = static_cast<int>(units.size());
  const int T = static_cast<int>(std::get<2>(units[0]).size());
  Eigen::MatrixXd Y(n, T), X(n, d);
  std::vector<EnablingPeriod> S;
  std::vector<int> Q;
  std::vector<std::string> ids;
  std::vector<long long> labels;
  for (int t = 1; t <= T; ++t) labels.push_back(t);
  for (int i = 0; i < n; ++i) {
    const auto& [s, q, ys] = units[i];
    S.push_back(s);
    Q.push_back(q);
    ids.push_back("u" + std::to_string(i + 1));
    for (int t = 0; t < T; ++t) Y(i, t) = ys[t];
    for (int j = 0; j < d; ++j) X(i, j) = x[i][j];
  }
  return PanelDataset::from_arrays(ids, labels, Y, S, Q, X);
}

// Random no-covariate panel with a valid cohort structure: cohorts from
// {2..T} plus never-enabled, every (s,q) cell guaranteed at least `min_cell`
// units.  Pure function of the seed.
inline PanelDataset random_nocov_panel(std::uint64_t seed, int n, int T,
                                       int n_cohorts, int min_cell = 3) {
  Rng rng(seed, 0);
  std::vector<EnablingPeriod> support;
  support.push_back(EnablingPeriod::never());
  for (int c = 0; c < n_cohorts; ++c)
    support.push_back(EnablingPeriod::at(2 + static_cast<int>(rng.next_u64() % (T - 1))));
  // dedupe
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());

  const int n_cells = static_cast<int>(support.size()) * 2;
  std::vector<EnablingPeriod> S;
  std::vector<int> Q;
  // Seed every cell with min_cell units, then fill randomly.
  for (const auto& s : support)
    for (int q = 0; q <= 1; ++q)
      for (int r = 0; r < min_cell; ++r) {
        S.push_back(s);
        Q.push_back(q);
      }
  while (static_cast<int>(S.size()) < n) {
    int c = static_cast<int>(rng.next_u64() % n_cells);
    S.push_back(support[c / 2]);
    Q.push_back(c % 2);
  }
  Eigen::MatrixXd Y(S.size(), T);
  for (size_t i = 0; i < S.size(); ++i)
    for (int t = 0; t < T; ++t) Y(i, t) = 5.0 * rng.normal() + t * rng.normal();
  std::vector<std::string> ids;
  std::vector<long long> labels;
  for (size_t i = 0; i < S.size(); ++i) ids.push_back("u" + std::to_string(i + 1));
  for (int t = 1; t <= T; ++t) labels.push_back(t);
  return PanelDataset::from_arrays(ids, labels, Y, S, Q, Eigen::MatrixXd(S.size(), 0));
}

}  // namespace ddd::testhelpers
