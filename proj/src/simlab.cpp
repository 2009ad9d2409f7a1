#include "ddd/simlab.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "ddd/aggregate.hpp"
#include "ddd/estimators.hpp"
#include "ddd/influence.hpp"
#include "ddd/inference.hpp"
#include "ddd/rng.hpp"

namespace ddd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Population standardization constants for the four transformed covariates,
// frozen from a dedicated 1e7-draw pre-pass so the design does not depend on
// the simulated sample size.
constexpr double kXMean[4] = {1.1330399515, 9.9999293803, 0.2188710675, 401.9899088944};
constexpr double kXSd[4] = {0.6039183458, 0.5415983367, 0.0445300139, 56.6421561365};

struct Vec4 {
  double v[4];
  double dot(const double* o) const {
    return v[0] * o[0] + v[1] * o[1] + v[2] * o[2] + v[3] * o[3];
  }
};

// Nonlinear covariate transforms (Kang-Schafer style) plus standardization.
Vec4 make_x(const Vec4& z) {
  Vec4 xt;
  xt.v[0] = std::exp(0.5 * z.v[0]);
  xt.v[1] = 10.0 + z.v[1] / (1.0 + std::exp(z.v[0]));
  double c = 0.6 + z.v[0] * z.v[2] / 25.0;
  xt.v[2] = c * c * c;
  double b = 20.0 + z.v[0] + z.v[3];
  xt.v[3] = b * b;
  for (int j = 0; j < 4; ++j) xt.v[j] = (xt.v[j] - kXMean[j]) / kXSd[j];
  return xt;
}

std::vector<std::string> unit_names(int n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back("u" + std::to_string(i + 1));
  return out;
}

}  // namespace

PanelDataset gen_two_period(const DgpSpec& spec) {
  if (spec.n < 100) throw ConfigError("simulation needs n >= 100");
  const int n = spec.n;
  Rng rng(spec.seed, spec.rep);

  const double g_inf0[4] = {-1.0, 0.5, -0.25, -0.1};
  const double g_inf1[4] = {-0.5, 2.0, 0.5, -0.2};
  const double g_20[4] = {3.0, -1.5, 0.75, -0.3};
  const double beta2[4] = {27.4, 13.7, 13.7, 13.7};
  const double beta_inf[4] = {13.7, 6.85, 6.85, 6.85};
  const double alpha = 2010.0;

  Eigen::MatrixXd Y(n, 2), X(n, 4);
  std::vector<EnablingPeriod> S(n, EnablingPeriod::never());
  std::vector<int> Q(n, 0);
  const bool ps_uses_x = spec.dgp_id == 1 || spec.dgp_id == 3;
  const bool reg_uses_x = spec.dgp_id == 1 || spec.dgp_id == 2;

  for (int i = 0; i < n; ++i) {
    Vec4 z;
    for (int j = 0; j < 4; ++j) z.v[j] = rng.normal();
    Vec4 x = make_x(z);
    const Vec4& o_ps = ps_uses_x ? x : z;
    const Vec4& o_reg = reg_uses_x ? x : z;

    // Softmax over cells ordered (inf,0), (inf,1), (2,0), (2,1).
    double f[4] = {0.2 * o_ps.dot(g_inf0), 0.2 * o_ps.dot(g_inf1),
                   0.05 * o_ps.dot(g_20), 0.0};
    double mx = std::max(std::max(f[0], f[1]), std::max(f[2], f[3]));
    double e[4], tot = 0.0;
    for (int c = 0; c < 4; ++c) tot += (e[c] = std::exp(f[c] - mx));
    double cum[4];
    double acc = 0.0;
    for (int c = 0; c < 4; ++c) cum[c] = (acc += e[c] / tot);

    const double u = rng.uniform();
    const bool s2 = u > cum[1];
    const int q = s2 ? (u > cum[2] ? 1 : 0) : (u > cum[0] ? 1 : 0);
    S[i] = s2 ? EnablingPeriod::at(2) : EnablingPeriod::never();
    Q[i] = q;

    const double f_reg = alpha + o_reg.dot(s2 ? beta2 : beta_inf);
    const double nu = rng.normal() + q * f_reg;
    // True ATT(2,2) = 0: treated and untreated outcomes coincide.
    Y(i, 0) = f_reg + nu + rng.normal();
    Y(i, 1) = 2.0 * f_reg + nu + rng.normal();
    for (int j = 0; j < 4; ++j) X(i, j) = x.v[j];
  }
  return PanelDataset::from_arrays(unit_names(n), {1, 2}, std::move(Y), std::move(S),
                                   std::move(Q), std::move(X),
                                   {"x_1", "x_2", "x_3", "x_4"});
}

PanelDataset gen_staggered_nocov(const DgpSpec& spec) {
  if (spec.n < 100) throw ConfigError("simulation needs n >= 100");
  const int n = spec.n;
  Rng rng(spec.seed, spec.rep);
  const double alpha = 278.5;
  // Cell probabilities in order (2,0), (2,1), (3,0), (3,1), (inf,0), (inf,1).
  const double probs[6] = {0.20, 0.15, 0.30, 0.20, 0.05, 0.10};
  const int cell_s[6] = {2, 2, 3, 3, 0, 0};  // 0 encodes never here only
  const int cell_q[6] = {0, 1, 0, 1, 0, 1};

  Eigen::MatrixXd Y(n, 3), X(n, 0);
  std::vector<EnablingPeriod> S(n, EnablingPeriod::never());
  std::vector<int> Q(n, 0);

  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    int c = 5;
    for (int j = 0; j < 6; ++j) {
      acc += probs[j];
      if (u <= acc) { c = j; break; }
    }
    const int s = cell_s[c], q = cell_q[c];
    S[i] = s == 0 ? EnablingPeriod::never() : EnablingPeriod::at(s);
    Q[i] = q;

    double nu_mean;
    if (spec.use_printed_nu) {
      // Literal transcription (duplicated S=2 term, no S=3 term); kept only
      // for sensitivity runs -- it breaks the design's parallel-trends logic.
      nu_mean = (s == 2 ? 2.0 * (2.0 + q) * alpha : 0.0) + (s == 0 ? q * alpha : 0.0);
    } else {
      nu_mean = s == 2   ? (2.0 + q) * alpha
                : s == 3 ? q * alpha
                         : (3.0 + q) * alpha;
    }
    const double nu = nu_mean + rng.normal();
    const bool g2 = (s == 2 && q == 1), g3 = (s == 3 && q == 1);
    Y(i, 0) = (1.0 + q) * alpha + nu + rng.normal();
    Y(i, 1) = (2.0 + q) * alpha + 1.1 * nu + rng.normal() + (g2 ? 10.0 : 0.0);
    Y(i, 2) = (3.0 + q) * alpha + 1.2 * nu + rng.normal() + (g2 ? 20.0 : 0.0) +
              (g3 ? 25.0 : 0.0);
  }
  return PanelDataset::from_arrays(unit_names(n), {1, 2, 3}, std::move(Y), std::move(S),
                                   std::move(Q), std::move(X));
}

PanelDataset gen_staggered_cov(const DgpSpec& spec) {
  if (spec.n < 100) throw ConfigError("simulation needs n >= 100");
  const int n = spec.n;
  Rng rng(spec.seed, spec.rep);
  const double alpha = 210.0;
  const double beta[4] = {27.4, 13.7, 13.7, 13.7};
  const double gam2[4] = {-1.0, 0.5, -0.25, -0.1};
  const double gam3[4] = {-0.5, 1.0, -0.1, -0.25};
  const double gami[4] = {-0.25, 0.1, -1.0, -0.1};
  // Cells ordered (inf,0), (inf,1), (2,0), (2,1), (3,0), (3,1); the softmax
  // index is ln(share) + c_q * O'gamma_g, anchoring the marginal cell shares
  // at the no-covariate design's values.
  const double shares[6] = {0.05, 0.10, 0.20, 0.15, 0.30, 0.20};
  const double* gam_of[6] = {gami, gami, gam2, gam2, gam3, gam3};
  const int cell_s[6] = {0, 0, 2, 2, 3, 3};
  const int cell_q[6] = {0, 1, 0, 1, 0, 1};
  const double c_of_q[2] = {0.2, -0.2};

  const bool ps_uses_x = spec.dgp_id == 1 || spec.dgp_id == 3;
  const bool reg_uses_x = spec.dgp_id == 1 || spec.dgp_id == 2;
  const double mult[3] = {1.0, 1.1, 1.2};

  Eigen::MatrixXd Y(n, 3), X(n, 4);
  std::vector<EnablingPeriod> S(n, EnablingPeriod::never());
  std::vector<int> Q(n, 0);

  for (int i = 0; i < n; ++i) {
    Vec4 z;
    for (int j = 0; j < 4; ++j) z.v[j] = rng.normal();
    Vec4 x = make_x(z);
    const Vec4& o_ps = ps_uses_x ? x : z;
    const Vec4& o_reg = reg_uses_x ? x : z;

    double f[6];
    double mx = -1e300;
    for (int c = 0; c < 6; ++c) {
      f[c] = std::log(shares[c]) + c_of_q[cell_q[c]] * o_ps.dot(gam_of[c]);
      mx = std::max(mx, f[c]);
    }
    double e[6], tot = 0.0;
    for (int c = 0; c < 6; ++c) tot += (e[c] = std::exp(f[c] - mx));
    const double u = rng.uniform();
    double acc = 0.0;
    int cell = 5;
    for (int c = 0; c < 6; ++c) {
      acc += e[c] / tot;
      if (u <= acc) { cell = c; break; }
    }
    const int s = cell_s[cell], q = cell_q[cell];
    S[i] = s == 0 ? EnablingPeriod::never() : EnablingPeriod::at(s);
    Q[i] = q;

    const double f_reg = alpha + o_reg.dot(beta);
    const double load = s == 2 ? (2.0 + q) : s == 3 ? static_cast<double>(q) : (3.0 + q);
    const double nu = load * f_reg + rng.normal();
    const bool g2 = (s == 2 && q == 1), g3 = (s == 3 && q == 1);
    for (int t = 0; t < 3; ++t)
      Y(i, t) = (t + 1.0 + q) * alpha + mult[t] * nu + rng.normal();
    Y(i, 1) += g2 ? 10.0 : 0.0;
    Y(i, 2) += (g2 ? 20.0 : 0.0) + (g3 ? 25.0 : 0.0);
    for (int j = 0; j < 4; ++j) X(i, j) = x.v[j];
  }
  return PanelDataset::from_arrays(unit_names(n), {1, 2, 3}, std::move(Y), std::move(S),
                                   std::move(Q), std::move(X),
                                   {"x_1", "x_2", "x_3", "x_4"});
}

PanelDataset generate(const DgpSpec& spec) {
  switch (spec.family) {
    case DgpFamily::TwoPeriodCov: return gen_two_period(spec);
    case DgpFamily::StaggeredNoCov: return gen_staggered_nocov(spec);
    case DgpFamily::StaggeredCov: return gen_staggered_cov(spec);
  }
  throw ConfigError("unknown DGP family");
}

std::string to_string(McEstimator e) {
  switch (e) {
    case McEstimator::Dr: return "dr";
    case McEstimator::Ra: return "ra";
    case McEstimator::Ipw: return "ipw";
    case McEstimator::DrGmm: return "dr-gmm";
    case McEstimator::DrNever: return "dr-never";
    case McEstimator::NoCovGmm: return "nocov-gmm";
    case McEstimator::NoCovNever: return "nocov-never";
    case McEstimator::PooledNyt: return "pooled-nyt";
    case McEstimator::DiffDrDid: return "diff-drdid";
    case McEstimator::ThreeWfeInteracted: return "3wfe-interacted";
    case McEstimator::ThreeWfeMundlak: return "3wfe-mundlak";
  }
  return "?";
}

namespace {

struct EstResult {
  double est = kNaN, se = kNaN;
};

// Run one estimator on one generated dataset, targeting ATT(2,2).
EstResult run_one(McEstimator which, const PanelDataset& data,
                  const CohortIndex& index) {
  const int g = 2, t = 2;
  auto with_if = [&](const AttCell& c) {
    return EstResult{c.estimate, analytic_se(c.influence)};
  };
  auto dr_cells = [&](bool never_only) {
    std::vector<AttCell> cells;
    for (auto gc : index.comparisons(g, t)) {
      if (never_only && !gc.is_never()) continue;
      NuisanceBundle b = fit_nuisance_bundle(data, g, t, gc);
      cells.push_back(att_dr(data, index, b, g, t, gc));
    }
    return cells;
  };
  switch (which) {
    case McEstimator::Dr:
    case McEstimator::DrNever: {
      auto cells = dr_cells(true);
      if (cells.empty()) throw EstimationError("no never-enabled comparison");
      return with_if(cells.front());
    }
    case McEstimator::DrGmm: {
      auto cells = dr_cells(false);
      auto omega = estimate_omega(InfluenceMatrix::from_cells(cells));
      return with_if(gmm_combine(cells, omega));
    }
    case McEstimator::Ra: {
      NuisanceBundle b = fit_nuisance_bundle(data, g, t, EnablingPeriod::never());
      return with_if(att_ra(data, index, b, g, t, EnablingPeriod::never()));
    }
    case McEstimator::Ipw: {
      NuisanceBundle b = fit_nuisance_bundle(data, g, t, EnablingPeriod::never());
      return with_if(att_ipw(data, index, b, g, t, EnablingPeriod::never()));
    }
    case McEstimator::NoCovNever:
      return with_if(att_no_covariates(data, index, g, t, EnablingPeriod::never()));
    case McEstimator::NoCovGmm: {
      std::vector<AttCell> cells;
      for (auto gc : index.comparisons(g, t))
        cells.push_back(att_no_covariates(data, index, g, t, gc));
      auto omega = estimate_omega(InfluenceMatrix::from_cells(cells));
      return with_if(gmm_combine(cells, omega));
    }
    case McEstimator::PooledNyt:
      return with_if(att_pooled_nyt_baseline(data, index, g, t));
    case McEstimator::DiffDrDid:
      return {att_diff_of_drdids_baseline(data, g, t).estimate, kNaN};
    case McEstimator::ThreeWfeInteracted:
      return {att_3wfe_two_period_baselines(data, ThreeWfeVariant::Interacted).estimate,
              kNaN};
    case McEstimator::ThreeWfeMundlak:
      return {att_3wfe_two_period_baselines(data, ThreeWfeVariant::Mundlak).estimate,
              kNaN};
  }
  throw ConfigError("unknown estimator");
}

}  // namespace

McSummary monte_carlo(const DgpSpec& spec, const std::vector<McEstimator>& estimators,
                      int reps, double level, int threads) {
  if (reps < 50) throw ConfigError("monte_carlo needs reps >= 50");
  McSummary out;
  out.spec = spec;
  out.reps = reps;
  out.level = level;
  out.truth = spec.family == DgpFamily::TwoPeriodCov ? 0.0 : 10.0;

  const size_t m = estimators.size();
  std::vector<std::vector<double>> est(m, std::vector<double>(reps, kNaN));
  std::vector<std::vector<double>> ses(m, std::vector<double>(reps, kNaN));

  int nthreads = threads > 0 ? threads
                             : static_cast<int>(std::thread::hardware_concurrency());
  if (nthreads < 1) nthreads = 1;
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int r = next.fetch_add(1);
      if (r >= reps) return;
      DgpSpec s = spec;
      s.rep = static_cast<std::uint64_t>(r);
      PanelDataset data = generate(s);
      CohortIndex index = cohort_index(data);
      for (size_t j = 0; j < m; ++j) {
        try {
          EstResult res = run_one(estimators[j], data, index);
          est[j][r] = res.est;
          ses[j][r] = res.se;
        } catch (const std::exception&) {
          // recorded as a failure for this rep; not fatal
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  const double z = inverse_normal_cdf(0.5 + level / 2.0);
  for (size_t j = 0; j < m; ++j) {
    McRow row;
    row.estimator = to_string(estimators[j]);
    double sum = 0.0, sumsq = 0.0;
    double cov = 0.0, len = 0.0;
    int n_ok = 0, n_ci = 0;
    for (int r = 0; r < reps; ++r) {
      if (std::isnan(est[j][r])) continue;
      ++n_ok;
      const double dev = est[j][r] - out.truth;
      sum += dev;
      sumsq += dev * dev;
      if (!std::isnan(ses[j][r])) {
        ++n_ci;
        cov += std::abs(dev) <= z * ses[j][r] ? 1.0 : 0.0;
        len += 2.0 * z * ses[j][r];
      }
    }
    row.reps = n_ok;
    row.failures = reps - n_ok;
    if (n_ok > 0) {
      row.bias = sum / n_ok;
      row.rmse = std::sqrt(sumsq / n_ok);
    }
    row.has_ci = n_ci > 0;
    if (n_ci > 0) {
      row.coverage = cov / n_ci;
      row.alci = len / n_ci;
    }
    out.rows.push_back(row);
    out.estimates[row.estimator] = est[j];
    out.std_errors[row.estimator] = ses[j];
  }
  return out;
}

std::string to_csv(const McSummary& s) {
  std::ostringstream os;
  os << "estimator,bias,rmse,cov95,alci,reps,failures\n";
  os.setf(std::ios::fixed);
  os.precision(6);
  for (const auto& r : s.rows) {
    os << r.estimator << ',' << r.bias << ',' << r.rmse << ',';
    if (r.has_ci)
      os << r.coverage << ',' << r.alci;
    else
      os << "NA,NA";
    os << ',' << r.reps << ',' << r.failures << '\n';
  }
  return os.str();
}

}  // namespace ddd
