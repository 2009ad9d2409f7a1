// Python bindings: a thin surface over the driver pipelines mirroring the
// command-line tool (validate / estimate / event_study / simulate) plus the
// built-in data generators.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ddd/driver.hpp"
#include "ddd/simlab.hpp"

namespace py = pybind11;
using namespace ddd;

namespace {

ColumnSchema make_schema(const std::string& id, const std::string& time,
                         const std::string& outcome, const std::string& enabling,
                         const std::string& eligible, const std::string& cluster,
                         const std::vector<std::string>& covariates) {
  ColumnSchema s;
  s.id = id;
  s.time = time;
  s.outcome = outcome;
  s.enabling = enabling;
  s.eligible = eligible;
  s.cluster = cluster;
  if (!covariates.empty()) {
    s.covariates = covariates;
    s.auto_covariates = false;
  }
  return s;
}

Estimand parse_estimand(const std::string& s) {
  if (s == "dr") return Estimand::DR;
  if (s == "ra") return Estimand::RA;
  if (s == "ipw") return Estimand::IPW;
  if (s == "nocov") return Estimand::NoCov;
  throw ConfigError("unknown estimand " + s);
}

EstimateOptions make_options(const std::string& estimand, const std::string& comparison,
                             bool estimation_effect, double alpha, int bootstrap,
                             std::uint64_t seed, int threads) {
  EstimateOptions o;
  o.estimand = parse_estimand(estimand);
  if (comparison == "gmm") o.comparison = ComparisonMode::Gmm;
  else if (comparison == "never") o.comparison = ComparisonMode::Never;
  else if (comparison == "pooled-baseline") o.comparison = ComparisonMode::PooledBaseline;
  else if (comparison.rfind("cohort:", 0) == 0) {
    o.comparison = ComparisonMode::Cohort;
    o.cohort_gc = std::stoi(comparison.substr(7));
  } else {
    throw ConfigError("unknown comparison mode " + comparison);
  }
  o.estimation_effect = estimation_effect;
  o.alpha = alpha;
  o.bootstrap_B = bootstrap;
  o.seed = seed;
  o.threads = threads;
  return o;
}

DgpSpec make_spec(const std::string& family, int dgp, int n, std::uint64_t seed,
                  std::uint64_t rep, bool printed_nu) {
  DgpSpec spec;
  if (family == "two-period") spec.family = DgpFamily::TwoPeriodCov;
  else if (family == "staggered-nocov") spec.family = DgpFamily::StaggeredNoCov;
  else if (family == "staggered-cov") spec.family = DgpFamily::StaggeredCov;
  else throw ConfigError("unknown family " + family);
  spec.dgp_id = dgp;
  spec.n = n;
  spec.seed = seed;
  spec.rep = rep;
  spec.use_printed_nu = printed_nu;
  return spec;
}

py::dict validate_dict(const PanelDataset& data) {
  PanelDataset trimmed = trim_to_effective_sample(data);
  auto index = cohort_index(trimmed);
  py::dict out;
  out["n_units"] = trimmed.n();
  out["n_periods"] = trimmed.T();
  out["n_covariates"] = trimmed.d();
  out["trimmed"] = trimmed.T() != data.T();
  py::dict cc;
  for (const auto& [cell, cnt] : index.cell_counts)
    cc[py::str("(" + cell.first + "," + std::to_string(cell.second) + ")")] = cnt;
  out["cell_counts"] = cc;
  py::list grid;
  for (int g : index.treated_cohorts)
    for (int t = 2; t <= trimmed.T(); ++t) {
      if (t == g - 1) continue;
      const auto& comps = index.comparisons(g, t);
      if (comps.empty()) continue;
      py::list names;
      for (const auto& gc : comps) names.append(gc.to_string());
      grid.append(py::make_tuple(g, t, names));
    }
  out["estimable"] = grid;
  return out;
}

py::list table_to_list(const std::vector<AttRow>& rows) {
  py::list out;
  for (const auto& r : rows) {
    py::dict d;
    d["g"] = r.g;
    d["t"] = r.t;
    d["comparison"] = r.comparison;
    d["estimate"] = r.estimate;
    d["analytic_se"] = r.analytic_se;
    d["boot_se"] = r.boot_se;
    d["ci_lo"] = r.ci_lo;
    d["ci_hi"] = r.ci_hi;
    d["n_treated"] = r.n_treated;
    d["warnings"] = r.warnings;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Triple-differences (DDD) estimation for staggered adoption designs";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<EstimationError>(m, "EstimationError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<PanelDataset>(m, "PanelDataset")
      .def_property_readonly("n", &PanelDataset::n)
      .def_property_readonly("n_periods", &PanelDataset::T)
      .def_property_readonly("n_covariates", &PanelDataset::d)
      .def_property_readonly("outcomes", &PanelDataset::outcomes)
      .def_property_readonly("covariates", &PanelDataset::covariates)
      .def_property_readonly("covariate_names", &PanelDataset::covariate_names)
      .def_property_readonly("unit_ids", &PanelDataset::unit_ids)
      .def_property_readonly(
          "enabling",
          [](const PanelDataset& d) {
            std::vector<std::string> out;
            for (const auto& s : d.enabling()) out.push_back(s.to_string());
            return out;
          })
      .def_property_readonly("eligible", &PanelDataset::eligible)
      .def("__repr__", [](const PanelDataset& d) {
        return "<PanelDataset n=" + std::to_string(d.n()) +
               " T=" + std::to_string(d.T()) + " d=" + std::to_string(d.d()) + ">";
      });

  m.def(
      "load",
      [](const std::string& path, const std::string& id, const std::string& time,
         const std::string& outcome, const std::string& enabling,
         const std::string& eligible, const std::string& cluster,
         const std::vector<std::string>& covariates) {
        return load_csv(path,
                        make_schema(id, time, outcome, enabling, eligible, cluster,
                                    covariates));
      },
      py::arg("path"), py::arg("id") = "id", py::arg("time") = "time",
      py::arg("outcome") = "y", py::arg("enabling") = "s", py::arg("eligible") = "q",
      py::arg("cluster") = "cluster", py::arg("covariates") = std::vector<std::string>{},
      "Load and validate a balanced panel CSV.");

  m.def(
      "save",
      [](const PanelDataset& data, const std::string& path) { save_csv(data, path); },
      py::arg("data"), py::arg("path"), "Write a dataset back to CSV.");

  m.def("validate", &validate_dict, py::arg("data"),
        "Cohort structure, cell counts and the estimable (g,t) grid.");

  m.def(
      "estimate",
      [](const PanelDataset& data, const std::string& estimand,
         const std::string& comparison, bool estimation_effect, double alpha,
         int bootstrap, std::uint64_t seed, int threads) {
        auto opts = make_options(estimand, comparison, estimation_effect, alpha,
                                 bootstrap, seed, threads);
        return table_to_list(estimate_table(trim_to_effective_sample(data), opts));
      },
      py::arg("data"), py::arg("estimand") = "dr", py::arg("comparison") = "gmm",
      py::arg("estimation_effect") = true, py::arg("alpha") = 0.05,
      py::arg("bootstrap") = 0, py::arg("seed") = 42, py::arg("threads") = 0,
      "ATT(g,t) table with analytic (and optional bootstrap) inference.");

  m.def(
      "event_study",
      [](const PanelDataset& data, int e_min, int e_max, const std::string& estimand,
         const std::string& comparison, bool estimation_effect, double alpha,
         int bootstrap, std::uint64_t seed, int threads) {
        auto opts = make_options(estimand, comparison, estimation_effect, alpha,
                                 bootstrap, seed, threads);
        EsTable t = event_study_table(trim_to_effective_sample(data), opts, e_min, e_max);
        py::list rows;
        for (const auto& r : t.rows) {
          py::dict d;
          d["e"] = r.e;
          d["estimate"] = r.estimate;
          d["analytic_se"] = r.analytic_se;
          d["boot_se"] = r.boot_se;
          d["ci_lo"] = r.ci_lo;
          d["ci_hi"] = r.ci_hi;
          d["band_lo"] = r.band_lo;
          d["band_hi"] = r.band_hi;
          rows.append(d);
        }
        py::dict out;
        out["rows"] = rows;
        out["simultaneous_crit"] = t.simultaneous_crit;
        out["overall"] = t.overall;
        out["overall_se"] = t.overall_se;
        out["warnings"] = t.warnings;
        return out;
      },
      py::arg("data"), py::arg("e_min") = -1, py::arg("e_max") = 1,
      py::arg("estimand") = "dr", py::arg("comparison") = "gmm",
      py::arg("estimation_effect") = true, py::arg("alpha") = 0.05,
      py::arg("bootstrap") = 999, py::arg("seed") = 42, py::arg("threads") = 0,
      "ES(e) path with pointwise CIs and simultaneous bands.");

  m.def(
      "generate",
      [](const std::string& family, int dgp, int n, std::uint64_t seed,
         std::uint64_t rep, bool printed_nu) {
        return generate(make_spec(family, dgp, n, seed, rep, printed_nu));
      },
      py::arg("family"), py::arg("dgp") = 1, py::arg("n") = 1000, py::arg("seed") = 0,
      py::arg("rep") = 0, py::arg("printed_nu") = false,
      "Draw one dataset from a built-in Monte Carlo design.");

  m.def(
      "simulate",
      [](const std::string& family, int dgp, int n, int reps, std::uint64_t seed,
         double level, int threads, const std::vector<std::string>& estimators,
         bool printed_nu) {
        DgpSpec spec = make_spec(family, dgp, n, seed, 0, printed_nu);
        std::vector<McEstimator> ests;
        for (const auto& name : estimators) {
          bool found = false;
          for (McEstimator e :
               {McEstimator::Dr, McEstimator::Ra, McEstimator::Ipw, McEstimator::DrGmm,
                McEstimator::DrNever, McEstimator::NoCovGmm, McEstimator::NoCovNever,
                McEstimator::PooledNyt, McEstimator::DiffDrDid,
                McEstimator::ThreeWfeInteracted, McEstimator::ThreeWfeMundlak})
            if (to_string(e) == name) {
              ests.push_back(e);
              found = true;
            }
          if (!found) throw ConfigError("unknown estimator " + name);
        }
        McSummary s = monte_carlo(spec, ests, reps, level, threads);
        py::dict out;
        out["truth"] = s.truth;
        out["reps"] = s.reps;
        py::list rows;
        for (const auto& r : s.rows) {
          py::dict d;
          d["estimator"] = r.estimator;
          d["bias"] = r.bias;
          d["rmse"] = r.rmse;
          d["cov95"] = r.has_ci ? py::object(py::float_(r.coverage)) : py::none();
          d["alci"] = r.has_ci ? py::object(py::float_(r.alci)) : py::none();
          d["failures"] = r.failures;
          rows.append(d);
        }
        out["rows"] = rows;
        out["estimates"] = s.estimates;
        out["std_errors"] = s.std_errors;
        return out;
      },
      py::arg("family"), py::arg("dgp") = 1, py::arg("n") = 1000, py::arg("reps") = 500,
      py::arg("seed") = 42, py::arg("level") = 0.95, py::arg("threads") = 0,
      py::arg("estimators") = std::vector<std::string>{"dr"},
      py::arg("printed_nu") = false,
      "Run a Monte Carlo study; returns the summary plus per-rep draws.");
}
