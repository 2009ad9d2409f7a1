#include "ddd/panel.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace ddd {

namespace {

std::string strip(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (quoted) {
      if (ch == '"') quoted = false;
      else cur.push_back(ch);
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(strip(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(strip(cur));
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("non-numeric value '" + s + "' in column " + what);
  }
}

EnablingPeriod parse_enabling(const std::string& raw) {
  std::string s = strip(raw);
  if (s.empty() || s == "0" || s == "Inf" || s == "inf" || s == "never")
    return EnablingPeriod::never();
  try {
    size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    if (v == 0) return EnablingPeriod::never();
    return EnablingPeriod::at(static_cast<int>(v));
  } catch (const std::exception&) {
    throw ValidationError("unparseable enabling period '" + raw + "'");
  }
}

}  // namespace

PanelDataset PanelDataset::from_arrays(
    std::vector<std::string> unit_ids, std::vector<long long> period_labels,
    Eigen::MatrixXd outcomes, std::vector<EnablingPeriod> enabling,
    std::vector<int> eligible, Eigen::MatrixXd covariates,
    std::vector<std::string> covariate_names,
    std::optional<std::vector<std::string>> cluster_ids) {
  const auto n = outcomes.rows();
  const auto T = outcomes.cols();
  if (n == 0 || T < 2)
    throw ValidationError("panel needs at least one unit and two periods");
  if (static_cast<Eigen::Index>(unit_ids.size()) != n ||
      static_cast<Eigen::Index>(enabling.size()) != n ||
      static_cast<Eigen::Index>(eligible.size()) != n)
    throw ValidationError("unit-level arrays have inconsistent lengths");
  if (static_cast<Eigen::Index>(period_labels.size()) != T)
    throw ValidationError("period label count does not match outcome columns");
  if (covariates.rows() != 0 && covariates.rows() != n)
    throw ValidationError("covariate matrix row count does not match units");
  if (covariates.rows() == 0) covariates.resize(n, 0);
  if (cluster_ids && static_cast<Eigen::Index>(cluster_ids->size()) != n)
    throw ValidationError("cluster id count does not match units");
  for (Eigen::Index t = 1; t < T; ++t)
    if (period_labels[t] <= period_labels[t - 1])
      throw ValidationError("period labels must be strictly increasing");
  if (!outcomes.allFinite())
    throw ValidationError("non-finite outcome value");
  if (covariates.cols() > 0 && !covariates.allFinite())
    throw ValidationError("non-finite covariate value");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (eligible[i] != 0 && eligible[i] != 1)
      throw ValidationError("eligible value not in {0,1} for unit " + unit_ids[i]);
    if (enabling[i].is_finite()) {
      int g = enabling[i].value();
      // g <= 1 leaves the cohort without a pre-period baseline; g > T is
      // indistinguishable from never-enabled in this sample window and must be
      // encoded as such explicitly.
      if (g <= 1)
        throw ValidationError("enabling period " + std::to_string(g) +
                              " <= first period for unit " + unit_ids[i]);
      if (g > static_cast<int>(T))
        throw ValidationError("enabling period " + std::to_string(g) +
                              " beyond last period for unit " + unit_ids[i] +
                              " (encode as never-enabled)");
    }
  }
  if (covariate_names.empty())
    for (Eigen::Index j = 0; j < covariates.cols(); ++j)
      covariate_names.push_back("x_" + std::to_string(j + 1));
  if (static_cast<Eigen::Index>(covariate_names.size()) != covariates.cols())
    throw ValidationError("covariate name count does not match columns");

  PanelDataset out;
  out.unit_ids_ = std::move(unit_ids);
  out.period_labels_ = std::move(period_labels);
  out.outcomes_ = std::move(outcomes);
  out.enabling_ = std::move(enabling);
  out.eligible_ = std::move(eligible);
  out.covariates_ = std::move(covariates);
  out.covariate_names_ = std::move(covariate_names);
  out.cluster_ids_ = std::move(cluster_ids);
  return out;
}

PanelDataset load_csv(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty file: " + path);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = split_csv_line(line);

  auto find_col = [&](const std::string& name) -> int {
    for (size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    return -1;
  };
  int c_id = find_col(schema.id), c_time = find_col(schema.time),
      c_y = find_col(schema.outcome), c_s = find_col(schema.enabling),
      c_q = find_col(schema.eligible), c_cl = find_col(schema.cluster);
  for (auto [col, name] : {std::pair{c_id, schema.id}, {c_time, schema.time},
                           {c_y, schema.outcome}, {c_s, schema.enabling},
                           {c_q, schema.eligible}})
    if (col < 0) throw ValidationError("missing required column: " + name);

  std::vector<int> c_x;
  std::vector<std::string> x_names;
  if (!schema.covariates.empty()) {
    for (const auto& name : schema.covariates) {
      int c = find_col(name);
      if (c < 0) throw ValidationError("missing covariate column: " + name);
      c_x.push_back(c);
      x_names.push_back(name);
    }
  } else if (schema.auto_covariates) {
    for (size_t j = 0; j < header.size(); ++j)
      if (header[j].rfind("x_", 0) == 0) {
        c_x.push_back(static_cast<int>(j));
        x_names.push_back(header[j]);
      }
  }

  struct Row {
    std::string id;
    long long time;
    double y;
    EnablingPeriod s = EnablingPeriod::never();
    int q = 0;
    std::vector<double> x;
    std::string cluster;
  };
  std::vector<Row> rows;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (strip(line).empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw ValidationError("line " + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(f.size()));
    Row r;
    r.id = f[c_id];
    double traw = parse_double(f[c_time], schema.time);
    if (traw != std::floor(traw))
      throw ValidationError("non-integer time value '" + f[c_time] + "'");
    r.time = static_cast<long long>(traw);
    r.y = parse_double(f[c_y], schema.outcome);
    r.s = parse_enabling(f[c_s]);
    double q = parse_double(f[c_q], schema.eligible);
    if (q != 0.0 && q != 1.0)
      throw ValidationError("eligible value not in {0,1} at line " +
                            std::to_string(lineno));
    r.q = static_cast<int>(q);
    for (size_t k = 0; k < c_x.size(); ++k)
      r.x.push_back(parse_double(f[c_x[k]], x_names[k]));
    if (c_cl >= 0) r.cluster = f[c_cl];
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ValidationError("no data rows in " + path);

  // Period universe (sorted original labels, re-indexed to 1..T).
  std::set<long long> period_set;
  for (const auto& r : rows) period_set.insert(r.time);
  std::vector<long long> period_labels(period_set.begin(), period_set.end());
  std::unordered_map<long long, int> period_pos;
  for (size_t t = 0; t < period_labels.size(); ++t)
    period_pos[period_labels[t]] = static_cast<int>(t);
  const int T = static_cast<int>(period_labels.size());

  // Units in first-appearance order.
  std::vector<std::string> unit_ids;
  std::unordered_map<std::string, int> unit_pos;
  for (const auto& r : rows)
    if (!unit_pos.count(r.id)) {
      unit_pos[r.id] = static_cast<int>(unit_ids.size());
      unit_ids.push_back(r.id);
    }
  const int n = static_cast<int>(unit_ids.size());

  Eigen::MatrixXd outcomes(n, T);
  Eigen::MatrixXd seen = Eigen::MatrixXd::Zero(n, T);
  std::vector<EnablingPeriod> enabling(n, EnablingPeriod::never());
  std::vector<int> eligible(n, -1);
  Eigen::MatrixXd covariates(n, static_cast<int>(c_x.size()));
  std::vector<std::string> clusters(n);
  std::vector<bool> unit_init(n, false);

  for (const auto& r : rows) {
    int i = unit_pos[r.id];
    int t = period_pos[r.time];
    if (seen(i, t) > 0)
      throw ValidationError("duplicate row for unit " + r.id + " period " +
                            std::to_string(r.time));
    seen(i, t) = 1;
    outcomes(i, t) = r.y;
    if (!unit_init[i]) {
      unit_init[i] = true;
      enabling[i] = r.s;
      eligible[i] = r.q;
      for (size_t k = 0; k < r.x.size(); ++k) covariates(i, static_cast<int>(k)) = r.x[k];
      clusters[i] = r.cluster;
    } else {
      if (!(enabling[i] == r.s))
        throw ValidationError("enabling period varies within unit " + r.id);
      if (eligible[i] != r.q)
        throw ValidationError("eligibility varies within unit " + r.id);
      for (size_t k = 0; k < r.x.size(); ++k)
        if (covariates(i, static_cast<int>(k)) != r.x[k])
          throw ValidationError("covariate " + x_names[k] + " varies within unit " + r.id);
      if (clusters[i] != r.cluster)
        throw ValidationError("cluster id varies within unit " + r.id);
    }
  }
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < T; ++t)
      if (seen(i, t) == 0)
        throw ValidationError("unbalanced panel: unit " + unit_ids[i] +
                              " missing period " + std::to_string(period_labels[t]));

  // Map finite enabling labels onto the re-indexed 1..T scale.
  for (int i = 0; i < n; ++i)
    if (enabling[i].is_finite()) {
      auto it = period_pos.find(enabling[i].value());
      if (it == period_pos.end()) {
        // Enabling after the sample window: effectively never enabled here.
        if (enabling[i].value() > period_labels.back()) {
          enabling[i] = EnablingPeriod::never();
          continue;
        }
        throw ValidationError("enabling period " +
                              std::to_string(enabling[i].value()) + " of unit " +
                              unit_ids[i] + " is not an observed period");
      }
      enabling[i] = EnablingPeriod::at(it->second + 1);
    }

  std::optional<std::vector<std::string>> cluster_ids;
  if (c_cl >= 0) cluster_ids = clusters;
  return PanelDataset::from_arrays(std::move(unit_ids), std::move(period_labels),
                                   std::move(outcomes), std::move(enabling),
                                   std::move(eligible), std::move(covariates),
                                   std::move(x_names), std::move(cluster_ids));
}

void save_csv(const PanelDataset& data, const std::string& path,
              const ColumnSchema& schema) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << schema.id << ',' << schema.time << ',' << schema.outcome << ','
      << schema.enabling << ',' << schema.eligible;
  for (const auto& name : data.covariate_names()) out << ',' << name;
  if (data.cluster_ids()) out << ',' << schema.cluster;
  out << '\n';
  char buf[64];
  auto fmt = [&](double v) {
    snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (int i = 0; i < data.n(); ++i) {
    // Report enabling on the original calendar labels.
    std::string s_str = "Inf";
    if (data.S(i).is_finite())
      s_str = std::to_string(data.period_labels()[data.S(i).value() - 1]);
    for (int t = 1; t <= data.T(); ++t) {
      out << data.unit_ids()[i] << ',' << data.period_labels()[t - 1] << ','
          << fmt(data.y(i, t)) << ',' << s_str << ',' << data.Q(i);
      for (int j = 0; j < data.d(); ++j) out << ',' << fmt(data.covariates()(i, j));
      if (data.cluster_ids()) out << ',' << (*data.cluster_ids())[i];
      out << '\n';
    }
  }
}

PanelDataset trim_to_effective_sample(const PanelDataset& data) {
  bool has_never = false;
  int max_s = 0;
  for (int i = 0; i < data.n(); ++i) {
    if (data.S(i).is_never()) has_never = true;
    else max_s = std::max(max_s, data.S(i).value());
  }
  if (has_never) return data;  // identity: a never-enabled group already exists
  // Drop periods t >= max finite S; the last-enabling cohort never reaches its
  // own treatment window and becomes the never-enabled comparison group.
  const int new_T = max_s - 1;
  if (new_T < 2)
    throw ValidationError("trimming leaves fewer than two periods");
  std::vector<long long> labels(data.period_labels().begin(),
                                data.period_labels().begin() + new_T);
  Eigen::MatrixXd outcomes = data.outcomes().leftCols(new_T);
  std::vector<EnablingPeriod> enabling = data.enabling();
  for (auto& s : enabling)
    if (s.is_finite() && s.value() >= max_s) s = EnablingPeriod::never();
  return PanelDataset::from_arrays(data.unit_ids(), std::move(labels),
                                   std::move(outcomes), std::move(enabling),
                                   data.eligible(), data.covariates(),
                                   data.covariate_names(), data.cluster_ids());
}

const std::vector<EnablingPeriod>& CohortIndex::comparisons(int g, int t) const {
  auto it = comparison_sets.find({g, t});
  static const std::vector<EnablingPeriod> kEmpty;
  return it == comparison_sets.end() ? kEmpty : it->second;
}

CohortIndex cohort_index(const PanelDataset& data) {
  CohortIndex out;
  std::set<int> treated;
  std::set<EnablingPeriod> support;
  for (int i = 0; i < data.n(); ++i) {
    support.insert(data.S(i));
    if (data.Q(i) == 1 && data.S(i).is_finite()) treated.insert(data.S(i).value());
    auto key = std::pair<std::string, int>{data.S(i).to_string(), data.Q(i)};
    ++out.cell_counts[key];
  }
  out.treated_cohorts.assign(treated.begin(), treated.end());
  out.enabling_support.assign(support.begin(), support.end());
  for (int g : out.treated_cohorts) {
    for (int t = 2; t <= data.T(); ++t) {
      // Post-treatment (t >= g): g_c > max(g, t).  Pre-treatment (t < g):
      // g_c > g, keeping the comparison cohorts valid at the g-1 baseline.
      const int bound = std::max(g, t >= g ? t : g - 1);
      std::vector<EnablingPeriod> set;
      for (auto gc : out.enabling_support)
        if (gc.after(bound) && !(gc.is_finite() && gc.value() == g))
          set.push_back(gc);
      out.comparison_sets[{g, t}] = std::move(set);
    }
  }
  return out;
}

}  // namespace ddd
