// ddd: command-line surface over the estimation engine.
//   ddd validate    structural checks, cohort table, estimable grid
//   ddd estimate    ATT(g,t) table with analytic / bootstrap inference
//   ddd event-study ES(e) path with simultaneous bands
//   ddd simulate    Monte Carlo studies over the built-in designs
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ddd/driver.hpp"
#include "ddd/simlab.hpp"
#include "json.hpp"

using namespace ddd;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string input;
  ColumnSchema schema;
  std::string covariate_list;
  std::string out;
  std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonOpts& c, bool needs_input = true) {
  auto* in = cmd->add_option("-i,--input", c.input, "Input CSV path");
  if (needs_input) in->required();
  cmd->add_option("--id-col", c.schema.id, "Unit id column (default id)");
  cmd->add_option("--time-col", c.schema.time, "Period column (default time)");
  cmd->add_option("--outcome-col", c.schema.outcome, "Outcome column (default y)");
  cmd->add_option("--enabling-col", c.schema.enabling,
                  "Enabling-period column (default s)");
  cmd->add_option("--eligible-col", c.schema.eligible,
                  "Eligibility column (default q)");
  cmd->add_option("--cluster-col", c.schema.cluster, "Cluster id column");
  cmd->add_option("--covariates", c.covariate_list,
                  "Comma-separated covariate columns (default: x_* columns)");
  cmd->add_option("-o,--out", c.out, "Output path (default stdout)");
  cmd->add_option("--format", c.format, "Output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->set_config("--config", "", "Read options from a key=value config file");
}

PanelDataset load_input(const CommonOpts& c) {
  ColumnSchema schema = c.schema;
  if (!c.covariate_list.empty()) {
    schema.auto_covariates = false;
    std::stringstream ss(c.covariate_list);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) schema.covariates.push_back(tok);
  }
  return load_csv(c.input, schema);
}

void emit(const CommonOpts& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(c.out);
    if (!f) throw ConfigError("cannot open output path " + c.out);
    f << text;
  }
}

Estimand parse_estimand(const std::string& s) {
  if (s == "dr") return Estimand::DR;
  if (s == "ra") return Estimand::RA;
  if (s == "ipw") return Estimand::IPW;
  if (s == "nocov") return Estimand::NoCov;
  throw ConfigError("unknown estimand " + s);
}

void parse_comparison(const std::string& s, EstimateOptions& opts) {
  if (s == "gmm") {
    opts.comparison = ComparisonMode::Gmm;
  } else if (s == "never") {
    opts.comparison = ComparisonMode::Never;
  } else if (s == "pooled-baseline") {
    opts.comparison = ComparisonMode::PooledBaseline;
  } else if (s.rfind("cohort:", 0) == 0) {
    opts.comparison = ComparisonMode::Cohort;
    opts.cohort_gc = std::stoi(s.substr(7));
  } else {
    throw ConfigError("unknown comparison mode " + s);
  }
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += (ch == '"') ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

// ---------------------------------------------------------------------------
int cmd_validate(const CommonOpts& c) {
  PanelDataset data = load_input(c);
  PanelDataset trimmed = trim_to_effective_sample(data);
  if (trimmed.T() != data.T())
    std::cerr << "warning: no never-enabled group; trimmed to the effective "
                 "sample with T="
              << trimmed.T() << "\n";
  auto index = cohort_index(trimmed);

  std::ostringstream os;
  if (c.format == "json") {
    json j;
    j["n_units"] = trimmed.n();
    j["n_periods"] = trimmed.T();
    j["n_covariates"] = trimmed.d();
    for (const auto& [cell, cnt] : index.cell_counts)
      j["cell_counts"][cell.first + ",q=" + std::to_string(cell.second)] = cnt;
    for (int g : index.treated_cohorts) {
      for (int t = 2; t <= trimmed.T(); ++t) {
        if (t == g - 1) continue;
        std::vector<std::string> comps;
        for (const auto& gc : index.comparisons(g, t)) comps.push_back(gc.to_string());
        if (!comps.empty())
          j["estimable"][std::to_string(g)][std::to_string(t)] = comps;
      }
    }
    os << j.dump(2) << "\n";
  } else {
    os << "units: " << trimmed.n() << "  periods: " << trimmed.T()
       << "  covariates: " << trimmed.d() << "\n";
    os << "cell counts (s, q):\n";
    for (const auto& [cell, cnt] : index.cell_counts) {
      os << "  (" << cell.first << "," << cell.second << "): " << cnt << "\n";
      if (cnt < 3)
        std::cerr << "warning: cell (" << cell.first << "," << cell.second
                  << ") has fewer than 3 units\n";
    }
    os << "estimable (g, t) cells and comparison cohorts:\n";
    for (int g : index.treated_cohorts)
      for (int t = 2; t <= trimmed.T(); ++t) {
        if (t == g - 1) continue;
        const auto& comps = index.comparisons(g, t);
        if (comps.empty()) continue;
        os << "  g=" << g << " t=" << t << " :";
        for (const auto& gc : comps) os << " " << gc.to_string();
        os << "\n";
      }
  }
  emit(c, os.str());
  return 0;
}

// ---------------------------------------------------------------------------
int cmd_estimate(const CommonOpts& c, const EstimateOptions& opts) {
  PanelDataset data = trim_to_effective_sample(load_input(c));
  auto rows = estimate_table(data, opts);
  if (rows.empty())
    throw ConfigError("no estimable (g,t) cells under the requested comparison");
  std::ostringstream os;
  if (c.format == "json") {
    json j = json::array();
    for (const auto& r : rows) {
      json row{{"g", r.g},
               {"t", r.t},
               {"comparison", r.comparison},
               {"estimate", r.estimate},
               {"analytic_se", r.analytic_se},
               {"ci_lo", r.ci_lo},
               {"ci_hi", r.ci_hi},
               {"n_treated", r.n_treated},
               {"warnings", r.warnings}};
      if (std::isfinite(r.boot_se)) row["boot_se"] = r.boot_se;
      j.push_back(row);
    }
    os << j.dump(2) << "\n";
  } else {
    os << "g,t,comparison,estimate,analytic_se,boot_se,ci_lo,ci_hi,n_treated,"
          "warnings\n";
    char buf[256];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%d,%d,%s,%.10g,%.10g,", r.g, r.t,
                    r.comparison.c_str(), r.estimate, r.analytic_se);
      os << buf;
      if (std::isfinite(r.boot_se)) {
        std::snprintf(buf, sizeof buf, "%.10g", r.boot_se);
        os << buf;
      } else {
        os << "NA";
      }
      std::snprintf(buf, sizeof buf, ",%.10g,%.10g,%d,", r.ci_lo, r.ci_hi,
                    r.n_treated);
      os << buf << csv_escape(r.warnings) << "\n";
      if (!r.warnings.empty()) std::cerr << "warning: " << r.warnings << "\n";
    }
  }
  emit(c, os.str());
  return 0;
}

// ---------------------------------------------------------------------------
int cmd_event_study(const CommonOpts& c, const EstimateOptions& opts, int e_min,
                    int e_max) {
  PanelDataset data = trim_to_effective_sample(load_input(c));
  EsTable table = event_study_table(data, opts, e_min, e_max);
  for (const auto& w : table.warnings) std::cerr << "warning: " << w << "\n";
  std::ostringstream os;
  if (c.format == "json") {
    json j;
    j["simultaneous_crit"] = table.simultaneous_crit;
    j["overall"] = table.overall;
    j["overall_se"] = table.overall_se;
    j["warnings"] = table.warnings;
    j["rows"] = json::array();
    for (const auto& r : table.rows)
      j["rows"].push_back({{"e", r.e},
                           {"estimate", r.estimate},
                           {"analytic_se", r.analytic_se},
                           {"boot_se", r.boot_se},
                           {"ci_lo", r.ci_lo},
                           {"ci_hi", r.ci_hi},
                           {"band_lo", r.band_lo},
                           {"band_hi", r.band_hi}});
    os << j.dump(2) << "\n";
  } else {
    os << "e,estimate,analytic_se,boot_se,ci_lo,ci_hi,band_lo,band_hi\n";
    char buf[256];
    for (const auto& r : table.rows) {
      std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                    r.e, r.estimate, r.analytic_se, r.boot_se, r.ci_lo, r.ci_hi,
                    r.band_lo, r.band_hi);
      os << buf;
    }
    char tail[160];
    std::snprintf(tail, sizeof tail,
                  "# overall,%.10g,%.10g\n# simultaneous_crit,%.10g\n",
                  table.overall, table.overall_se, table.simultaneous_crit);
    os << tail;
  }
  emit(c, os.str());
  return 0;
}

// ---------------------------------------------------------------------------
struct SimulateOpts {
  std::string family = "two-period";
  int dgp = 1;
  int n = 1000;
  int reps = 500;
  std::uint64_t seed = 42;
  double level = 0.95;
  int threads = 0;
  bool printed_nu = false;
  std::string estimators;  // comma list; empty = family default
  std::string raw;         // optional per-rep raw CSV path
};

McEstimator parse_mc_estimator(const std::string& s) {
  for (McEstimator e :
       {McEstimator::Dr, McEstimator::Ra, McEstimator::Ipw, McEstimator::DrGmm,
        McEstimator::DrNever, McEstimator::NoCovGmm, McEstimator::NoCovNever,
        McEstimator::PooledNyt, McEstimator::DiffDrDid,
        McEstimator::ThreeWfeInteracted, McEstimator::ThreeWfeMundlak})
    if (to_string(e) == s) return e;
  throw ConfigError("unknown estimator " + s);
}

int cmd_simulate(const CommonOpts& c, SimulateOpts& s) {
  DgpSpec spec;
  if (s.family == "two-period") spec.family = DgpFamily::TwoPeriodCov;
  else if (s.family == "staggered-nocov") spec.family = DgpFamily::StaggeredNoCov;
  else if (s.family == "staggered-cov") spec.family = DgpFamily::StaggeredCov;
  else throw ConfigError("unknown family " + s.family);
  spec.dgp_id = s.dgp;
  spec.n = s.n;
  spec.seed = s.seed;
  spec.use_printed_nu = s.printed_nu;

  std::vector<McEstimator> ests;
  if (s.estimators.empty()) {
    switch (spec.family) {
      case DgpFamily::TwoPeriodCov:
        ests = {McEstimator::Dr, McEstimator::DiffDrDid,
                McEstimator::ThreeWfeInteracted, McEstimator::ThreeWfeMundlak};
        break;
      case DgpFamily::StaggeredNoCov:
        ests = {McEstimator::NoCovGmm, McEstimator::NoCovNever, McEstimator::PooledNyt};
        break;
      case DgpFamily::StaggeredCov:
        ests = {McEstimator::DrGmm, McEstimator::DrNever, McEstimator::PooledNyt};
        break;
    }
  } else {
    std::stringstream ss(s.estimators);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) ests.push_back(parse_mc_estimator(tok));
  }

  if (s.reps < 50) {
    std::cerr << "warning: --reps " << s.reps
              << " is below the recommended minimum 50; using 50\n";
    s.reps = 50;
  }
  McSummary sum = monte_carlo(spec, ests, s.reps, s.level, s.threads);

  if (!s.raw.empty()) {
    std::ofstream f(s.raw);
    if (!f) throw ConfigError("cannot open raw output path " + s.raw);
    f << "rep";
    for (const auto& [name, v] : sum.estimates) f << "," << name << "," << name << "_se";
    f << "\n";
    for (int r = 0; r < sum.reps; ++r) {
      f << r;
      for (const auto& [name, v] : sum.estimates)
        f << "," << v[r] << "," << sum.std_errors.at(name)[r];
      f << "\n";
    }
  }

  if (c.format == "json") {
    json j;
    j["family"] = s.family;
    j["dgp"] = spec.dgp_id;
    j["n"] = spec.n;
    j["reps"] = sum.reps;
    j["seed"] = spec.seed;
    j["truth"] = sum.truth;
    j["rows"] = json::array();
    for (const auto& r : sum.rows) {
      json row{{"estimator", r.estimator}, {"bias", r.bias},     {"rmse", r.rmse},
               {"reps", r.reps},           {"failures", r.failures}};
      if (r.has_ci) {
        row["cov95"] = r.coverage;
        row["alci"] = r.alci;
      }
      j["rows"].push_back(row);
    }
    emit(c, j.dump(2) + "\n");
  } else {
    emit(c, to_csv(sum));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Triple-differences (DDD) estimation for staggered adoption"};
  app.require_subcommand(1);

  CommonOpts cval, cest, ces, csim;
  EstimateOptions eopts, esopts;
  std::string est_estimand = "dr", est_comparison = "gmm";
  std::string es_estimand = "dr", es_comparison = "gmm";
  bool est_no_effect = false, es_no_effect = false;
  int e_min = -1, e_max = 1;
  SimulateOpts sopts;

  auto* validate = app.add_subcommand("validate", "Validate a panel CSV");
  add_common(validate, cval);

  auto* estimate = app.add_subcommand("estimate", "Estimate the ATT(g,t) table");
  add_common(estimate, cest);
  estimate->add_option("--estimand", est_estimand, "dr, ra, ipw or nocov")
      ->check(CLI::IsMember({"dr", "ra", "ipw", "nocov"}));
  estimate->add_option("--comparison", est_comparison,
                       "gmm, never, cohort:<g> or pooled-baseline");
  estimate->add_option("--alpha", eopts.alpha, "Significance level (default 0.05)");
  estimate->add_option("-B,--bootstrap", eopts.bootstrap_B,
                       "Multiplier bootstrap draws (0 = analytic only)");
  estimate->add_option("--seed", eopts.seed, "Bootstrap seed (default 42)");
  estimate->add_option("--threads", eopts.threads, "Worker threads (0 = all cores)");
  estimate->add_flag("--no-estimation-effect", est_no_effect,
                     "Drop nuisance estimation-effect terms from the influence fn");

  auto* es = app.add_subcommand("event-study", "Estimate the ES(e) path");
  add_common(es, ces);
  es->add_option("--estimand", es_estimand, "dr, ra, ipw or nocov")
      ->check(CLI::IsMember({"dr", "ra", "ipw", "nocov"}));
  es->add_option("--comparison", es_comparison, "gmm, never or cohort:<g>");
  es->add_option("--e-min", e_min, "Smallest event time (default -1)");
  es->add_option("--e-max", e_max, "Largest event time (default 1)");
  es->add_option("--alpha", esopts.alpha, "Significance level (default 0.05)");
  es->add_option("-B,--bootstrap", esopts.bootstrap_B,
                 "Multiplier bootstrap draws (default 999; 0 = analytic only)");
  es->add_option("--seed", esopts.seed, "Bootstrap seed (default 42)");
  es->add_option("--threads", esopts.threads, "Worker threads (0 = all cores)");
  es->add_flag("--no-estimation-effect", es_no_effect,
               "Drop nuisance estimation-effect terms from the influence fn");
  esopts.bootstrap_B = 999;

  auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo study");
  add_common(sim, csim, /*needs_input=*/false);
  sim->add_option("--family", sopts.family,
                  "two-period, staggered-nocov or staggered-cov")
      ->check(CLI::IsMember({"two-period", "staggered-nocov", "staggered-cov"}));
  sim->add_option("--dgp", sopts.dgp, "Misspecification regime 1-4")
      ->check(CLI::Range(1, 4));
  sim->add_option("-n,--n", sopts.n, "Units per replication");
  sim->add_option("--reps", sopts.reps, "Replications (default 500)");
  sim->add_option("--seed", sopts.seed, "Master seed (default 42)");
  sim->add_option("--level", sopts.level, "CI level (default 0.95)");
  sim->add_option("--threads", sopts.threads, "Worker threads (0 = all cores)");
  sim->add_option("--estimators", sopts.estimators,
                  "Comma-separated estimator names (default per family)");
  sim->add_option("--raw", sopts.raw, "Also write per-rep raw estimates CSV here");
  sim->add_flag("--printed-nu", sopts.printed_nu,
                "Staggered no-cov design: use the literal heterogeneity mean");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 3;
  }

  try {
    if (validate->parsed()) return cmd_validate(cval);
    if (estimate->parsed()) {
      eopts.estimand = parse_estimand(est_estimand);
      parse_comparison(est_comparison, eopts);
      eopts.estimation_effect = !est_no_effect;
      return cmd_estimate(cest, eopts);
    }
    if (es->parsed()) {
      esopts.estimand = parse_estimand(es_estimand);
      parse_comparison(es_comparison, esopts);
      esopts.estimation_effect = !es_no_effect;
      return cmd_event_study(ces, esopts, e_min, e_max);
    }
    if (sim->parsed()) return cmd_simulate(csim, sopts);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const EstimationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
