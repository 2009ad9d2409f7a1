// Acceptance gate: one [PASS]/[FAIL] line per criterion, nonzero exit if any
// criterion fails.  Monte Carlo seeds are pinned so the scaled table
// reproductions are deterministic.
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "ddd/aggregate.hpp"
#include "ddd/driver.hpp"
#include "ddd/influence.hpp"
#include "ddd/inference.hpp"
#include "ddd/simlab.hpp"
#include "helpers.hpp"

using namespace ddd;
using namespace ddd::testhelpers;

namespace {

int g_failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double now_s() {
  using clock = std::chrono::steady_clock;
  static const auto t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

bool in_range(double v, double lo, double hi) { return v >= lo && v <= hi; }

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / v.size();
}

double sd_of(const std::vector<double>& v) {
  double m = mean_of(v), s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

const McRow& row_of(const McSummary& s, const std::string& name) {
  for (const auto& r : s.rows)
    if (r.estimator == name) return r;
  throw std::runtime_error("missing row " + name);
}

// ---------------------------------------------------------------------------
// Criterion 1: saturated equivalence + independent four-cell oracle.
void criterion_1() {
  double t0 = now_s();
  bool ok = true;
  std::string why;
  for (std::uint64_t seed = 0; seed < 200 && ok; ++seed) {
    int n = 50 + static_cast<int>((seed * 37) % 451);
    int T = 2 + static_cast<int>(seed % 3);
    int cohorts = 1 + static_cast<int>(seed % 3);
    PanelDataset data = random_nocov_panel(seed, n, T, cohorts);
    auto index = cohort_index(data);
    for (int g : index.treated_cohorts)
      for (int t = g; t <= data.T() && ok; ++t)
        for (const auto& gc : index.comparisons(g, t)) {
          auto nocov = att_no_covariates(data, index, g, t, gc);
          auto bundle = fit_nuisance_bundle(data, g, t, gc);
          auto dr = att_dr(data, index, bundle, g, t, gc);
          auto ra = att_ra(data, index, bundle, g, t, gc);
          auto ipw = att_ipw(data, index, bundle, g, t, gc);
          if (std::abs(dr.estimate - nocov.estimate) > 1e-10 ||
              std::abs(ra.estimate - nocov.estimate) > 1e-10 ||
              std::abs(ipw.estimate - nocov.estimate) > 1e-10) {
            ok = false;
            why = "saturated equivalence violated";
            break;
          }
          // Independent four-cell-means oracle, plain loops.
          double means[4] = {0, 0, 0, 0}, counts[4] = {0, 0, 0, 0};
          for (int i = 0; i < data.n(); ++i) {
            int cell = -1;
            if (data.S(i) == EnablingPeriod::at(g) && data.Q(i) == 1) cell = 0;
            else if (data.S(i) == EnablingPeriod::at(g) && data.Q(i) == 0) cell = 1;
            else if (data.S(i) == gc && data.Q(i) == 1) cell = 2;
            else if (data.S(i) == gc && data.Q(i) == 0) cell = 3;
            if (cell >= 0) {
              means[cell] += data.y(i, t) - data.y(i, g - 1);
              counts[cell] += 1;
            }
          }
          for (int c = 0; c < 4; ++c) means[c] /= counts[c];
          double oracle = (means[0] - means[1]) - (means[2] - means[3]);
          if (std::abs(nocov.estimate - oracle) > 1e-12) {
            ok = false;
            why = "four-cell oracle mismatch";
          }
        }
  }
  double dt = now_s() - t0;
  if (ok && dt >= 10.0) {
    ok = false;
    why = "runtime too long";
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "saturated equivalence + four-cell oracle on 200 panels (%.1fs)%s%s",
                dt, ok ? "" : " - ", why.c_str());
  report(1, ok, buf);
}

// ---------------------------------------------------------------------------
// Criteria 2 and the two-period half of 10.
McSummary criterion_2() {
  double t0 = now_s();
  DgpSpec spec{DgpFamily::TwoPeriodCov, 1, 5000, 1001};
  McSummary s = monte_carlo(spec,
                            {McEstimator::Dr, McEstimator::DiffDrDid,
                             McEstimator::ThreeWfeInteracted, McEstimator::ThreeWfeMundlak},
                            500);
  double dt = now_s() - t0;
  const McRow& dr = row_of(s, "dr");
  // Per the variant mapping documented in docs/design-notes: the published
  // "3WFE" number corresponds to the pooled Mundlak regression and "M-3WFE"
  // to the first-differenced interacted regression.
  const McRow& wfe = row_of(s, "3wfe-mundlak");
  const McRow& mwfe = row_of(s, "3wfe-interacted");
  const McRow& diff = row_of(s, "diff-drdid");
  bool ok = std::abs(dr.bias) <= 0.01 && in_range(dr.rmse, 0.07, 0.10) &&
            in_range(dr.coverage, 0.92, 0.97) && in_range(dr.alci, 0.29, 0.36) &&
            in_range(wfe.bias, -10.5, -7.5) && in_range(diff.bias, -3.2, -2.0) &&
            in_range(mwfe.bias, 0.8, 1.5) && dt < 600.0;
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "two-period DGP1 table: dr(bias=%.4f rmse=%.3f cov=%.3f alci=%.3f) "
                "3wfe=%.2f drdid-dif=%.2f m-3wfe=%.2f (%.0fs)",
                dr.bias, dr.rmse, dr.coverage, dr.alci, wfe.bias, diff.bias,
                mwfe.bias, dt);
  report(2, ok, buf);
  return s;
}

// ---------------------------------------------------------------------------
void criterion_3() {
  double biases[3];
  int ids[3] = {2, 3, 4};
  for (int k = 0; k < 3; ++k) {
    DgpSpec spec{DgpFamily::TwoPeriodCov, ids[k], 5000, 35};
    McSummary s = monte_carlo(spec, {McEstimator::Dr}, 500);
    biases[k] = row_of(s, "dr").bias;
  }
  bool ok = std::abs(biases[0]) <= 0.01 && std::abs(biases[1]) <= 0.01 &&
            in_range(biases[2], -2.5, -1.5);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "double robustness: dgp2 bias=%.4f dgp3 bias=%.4f dgp4 bias=%.3f",
                biases[0], biases[1], biases[2]);
  report(3, ok, buf);
}

// ---------------------------------------------------------------------------
McSummary criterion_4() {
  DgpSpec spec{DgpFamily::StaggeredNoCov, 1, 5000, 1001};
  McSummary s = monte_carlo(
      spec, {McEstimator::NoCovGmm, McEstimator::NoCovNever, McEstimator::PooledNyt}, 500);
  const McRow& gmm = row_of(s, "nocov-gmm");
  const McRow& nev = row_of(s, "nocov-never");
  const McRow& nyt = row_of(s, "pooled-nyt");
  double ratio = nev.alci / gmm.alci;
  bool ok = std::abs(gmm.bias) <= 0.03 && in_range(gmm.coverage, 0.92, 0.97) &&
            in_range(gmm.alci, 0.30, 0.37) && in_range(nev.alci, 0.46, 0.56) &&
            in_range(ratio, 1.35, 1.65) && in_range(nyt.bias, -16.5, -15.2) &&
            nyt.coverage <= 0.01;
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "staggered no-cov table: gmm(bias=%.4f cov=%.3f alci=%.3f) "
                "nev-alci=%.3f ratio=%.2f nyt(bias=%.2f cov=%.3f)",
                gmm.bias, gmm.coverage, gmm.alci, nev.alci, ratio, nyt.bias,
                nyt.coverage);
  report(4, ok, buf);
  return s;
}

// ---------------------------------------------------------------------------
void criterion_5() {
  DgpSpec spec{DgpFamily::StaggeredCov, 1, 1000, 3003};
  McSummary s = monte_carlo(spec, {McEstimator::DrGmm, McEstimator::PooledNyt}, 250);
  const McRow& gmm = row_of(s, "dr-gmm");
  const McRow& nyt = row_of(s, "pooled-nyt");
  bool ok = std::abs(gmm.bias) <= 0.05 && in_range(gmm.coverage, 0.91, 0.97) &&
            nyt.coverage <= 0.15;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "staggered cov spot check: gmm(bias=%.4f cov=%.3f) nyt-cov=%.3f",
                gmm.bias, gmm.coverage, nyt.coverage);
  report(5, ok, buf);
}

// ---------------------------------------------------------------------------
// Criterion 6: analytic se validity on the staggered covariate design,
// n=10000, per comparison cohort and for the GMM combination.
void criterion_6() {
  const int reps = 500, n = 10000;
  std::vector<double> est3(reps), se3(reps), estI(reps), seI(reps), estG(reps),
      seG(reps);
  std::atomic<bool> psi_ok{true};
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      int r = next.fetch_add(1);
      if (r >= reps) return;
      DgpSpec spec{DgpFamily::StaggeredCov, 1, n, 606, static_cast<std::uint64_t>(r)};
      PanelDataset data = generate(spec);
      auto index = cohort_index(data);
      std::vector<AttCell> cells;
      for (const auto& gc : index.comparisons(2, 2)) {
        auto bundle = fit_nuisance_bundle(data, 2, 2, gc);
        cells.push_back(att_dr(data, index, bundle, 2, 2, gc));
        const Eigen::VectorXd& psi = cells.back().influence;
        double sd = std::sqrt(psi.squaredNorm() / n);
        if (std::abs(psi.mean()) > 1e-8 * sd) psi_ok = false;
      }
      est3[r] = cells[0].estimate;
      se3[r] = analytic_se(cells[0].influence);
      estI[r] = cells[1].estimate;
      seI[r] = analytic_se(cells[1].influence);
      auto om = estimate_omega(InfluenceMatrix::from_cells(cells));
      AttCell g = gmm_combine(cells, om);
      estG[r] = g.estimate;
      seG[r] = analytic_se(g.influence);
      if (std::abs(g.influence.mean()) >
          1e-8 * std::sqrt(g.influence.squaredNorm() / n))
        psi_ok = false;
    }
  };
  unsigned hw = std::max(2u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < hw; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  double r3 = mean_of(se3) / sd_of(est3);
  double rI = mean_of(seI) / sd_of(estI);
  double rG = mean_of(seG) / sd_of(estG);
  bool ok = psi_ok && in_range(r3, 0.9, 1.1) && in_range(rI, 0.9, 1.1) &&
            in_range(rG, 0.9, 1.1);
  char buf[220];
  std::snprintf(buf, sizeof buf,
                "analytic se vs MC sd: gc=3 ratio=%.3f gc=Inf ratio=%.3f gmm "
                "ratio=%.3f, mean(psi) %s",
                r3, rI, rG, psi_ok ? "negligible" : "TOO LARGE");
  report(6, ok, buf);
}

// ---------------------------------------------------------------------------
// Criterion 7: exact finite-sample GMM variance dominance.
void criterion_7() {
  bool ok = true;
  int checked = 0;
  Rng wrng(1234, 0);
  for (std::uint64_t seed = 0; seed < 20 && ok; ++seed) {
    PanelDataset data = random_nocov_panel(seed, 260, 5, 3);
    auto index = cohort_index(data);
    for (int g : index.treated_cohorts)
      for (int t = g; t <= data.T() && ok; ++t) {
        const auto& comps = index.comparisons(g, t);
        if (comps.size() < 2) continue;
        std::vector<AttCell> cells;
        for (const auto& gc : comps)
          cells.push_back(att_no_covariates(data, index, g, t, gc));
        auto om = estimate_omega(InfluenceMatrix::from_cells(cells));
        AttCell best = gmm_combine(cells, om);
        auto var_of = [&](const Eigen::VectorXd& psi) {
          Eigen::VectorXd c = psi.array() - psi.mean();
          return c.squaredNorm() / psi.size();
        };
        double vg = var_of(best.influence);
        for (const auto& c : cells)
          if (vg > var_of(c.influence) + 1e-12) ok = false;
        const int k = static_cast<int>(cells.size());
        for (int trial = 0; trial < 100 && ok; ++trial) {
          Eigen::VectorXd w(k);
          for (int j = 0; j < k; ++j) w(j) = wrng.uniform();
          w /= w.sum();
          AttCell combo = weighted_combine(cells, w);
          if (vg > var_of(combo.influence) + 1e-12) ok = false;
        }
        ++checked;
      }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "gmm variance dominance exact on %d multi-comparison cells", checked);
  report(7, ok && checked > 0, buf);
}

// ---------------------------------------------------------------------------
// Criterion 8: bootstrap coherence on DGP 1 (staggered covariate design,
// whose ATT(g,t) table yields a multi-column influence matrix for the
// simultaneous band).
void criterion_8() {
  bool ok = true;
  std::string why;
  const double z = inverse_normal_cdf(0.975);
  for (std::uint64_t rep = 0; rep < 3 && ok; ++rep) {
    DgpSpec spec{DgpFamily::StaggeredCov, 1, 5000, 2024, rep};
    PanelDataset data = generate(spec);
    auto index = cohort_index(data);
    EstimateOptions eopts;  // DR, GMM over comparisons
    auto cells = combined_cells(data, index, eopts, false);
    const int k = static_cast<int>(cells.size());
    Eigen::MatrixXd infl(data.n(), k);
    Eigen::VectorXd est(k);
    int j = 0;
    for (const auto& [key, cell] : cells) {
      infl.col(j) = cell.influence;
      est(j) = cell.estimate;
      ++j;
    }
    BootstrapOptions opts;
    opts.B = 999;
    opts.seed = 99 + rep;
    opts.simultaneous = true;
    opts.threads = 1;
    auto r1 = multiplier_bootstrap(infl, est, opts);
    opts.threads = 4;
    auto r4 = multiplier_bootstrap(infl, est, opts);
    for (int c = 0; c < k; ++c) {
      double ratio = r1.boot_se(c) / analytic_se(infl.col(c));
      if (!in_range(ratio, 0.9, 1.1)) {
        ok = false;
        why = "bootstrap se off analytic";
      }
      if (r1.boot_se(c) != r4.boot_se(c)) {
        ok = false;
        why = "thread-count nondeterminism";
      }
    }
    if (r1.simultaneous_crit < z) {
      ok = false;
      why = "simultaneous crit below normal quantile";
    }
    if (r1.simultaneous_crit != r4.simultaneous_crit) {
      ok = false;
      why = "thread-count nondeterminism";
    }
  }
  report(8, ok, "bootstrap se/analytic in [0.9,1.1], crit >= z, thread-invariant" +
                    (why.empty() ? "" : " - " + why));
}

// ---------------------------------------------------------------------------
// Criterion 9: event-study contract.
void criterion_9() {
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 10 && ok; ++seed) {
    PanelDataset data = random_nocov_panel(seed + 300, 240, 5, 3);
    auto index = cohort_index(data);
    std::map<std::pair<int, int>, AttCell> cells;
    for (int g : index.treated_cohorts)
      for (int t = g; t <= data.T(); ++t)
        for (const auto& gc : index.comparisons(g, t))
          if (gc.is_never()) cells[{g, t}] = att_no_covariates(data, index, g, t, gc);
    auto es = event_study(cells, data, index, {-1, 1});
    for (size_t j = 0; j < es.event_times.size(); ++j) {
      int e = es.event_times[j];
      if (e == -1 &&
          (es.estimates(j) != 0.0 || es.influence.col(j).cwiseAbs().maxCoeff() != 0.0))
        ok = false;
      double sum = 0;
      bool any = false;
      for (const auto& [key, w] : es.shares)
        if (key.second == e) {
          sum += w;
          any = true;
        }
      if (e != -1 && any && std::abs(sum - 1.0) > 1e-12) ok = false;
    }
    // Single-cohort path equality.
    PanelDataset single = random_nocov_panel(seed + 900, 150, 4, 1);
    auto sindex = cohort_index(single);
    if (sindex.treated_cohorts.size() != 1) continue;
    int g = sindex.treated_cohorts[0];
    std::map<std::pair<int, int>, AttCell> scells;
    for (int t = g; t <= single.T(); ++t)
      scells[{g, t}] = att_no_covariates(single, sindex, g, t, EnablingPeriod::never());
    auto ses = event_study(scells, single, sindex, {-1, single.T() - g});
    for (size_t j = 0; j < ses.event_times.size(); ++j) {
      int e = ses.event_times[j];
      if (e < 0) continue;
      if (std::abs(ses.estimates(j) - scells.at({g, g + e}).estimate) > 1e-12)
        ok = false;
    }
  }
  report(9, ok, "ES(-1)=0 exact, single-cohort ES = ATT path, shares sum to 1");
}

// ---------------------------------------------------------------------------
// Criterion 10: baseline-failure demonstrations, reusing the criterion 2/4
// Monte Carlo draws.
void criterion_10(const McSummary& two_period, const McSummary& staggered) {
  // Figure-1-style ordering: only the DR estimator is centered at the truth.
  double dr = std::abs(row_of(two_period, "dr").bias);
  double wfe = std::abs(row_of(two_period, "3wfe-mundlak").bias);
  double mwfe = std::abs(row_of(two_period, "3wfe-interacted").bias);
  double diff = std::abs(row_of(two_period, "diff-drdid").bias);
  bool ordering = dr <= 0.05 && wfe >= 0.5 && mwfe >= 0.5 && diff >= 0.5;
  // Figure-2(a)-style sign reversal: pooled not-yet-treated negative while
  // the truth is +10.
  const auto& nyt = staggered.estimates.at("pooled-nyt");
  int neg = 0, valid = 0;
  for (double e : nyt)
    if (std::isfinite(e)) {
      ++valid;
      if (e < 0) ++neg;
    }
  double frac = valid ? double(neg) / valid : 0.0;
  bool ok = ordering && frac >= 0.99;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "baseline failures: only dr centered (|bias|=%.3f vs %.2f/%.2f/%.2f), "
                "pooled-nyt negative in %.1f%% of reps",
                dr, wfe, mwfe, diff, 100 * frac);
  report(10, ok, buf);
}

}  // namespace

int main() {
  criterion_1();
  McSummary two_period = criterion_2();
  criterion_3();
  McSummary staggered = criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10(two_period, staggered);
  std::printf("%d of 10 criteria passed\n", 10 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
