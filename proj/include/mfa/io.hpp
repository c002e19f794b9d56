#ifndef MFA_IO_HPP
#define MFA_IO_HPP

// File formats: panel CSV (time-major rows, transposed on ingestion),
// JSON serialization for models, fit results and selection reports, study
// configurations, and CSV result tables.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfa/core.hpp"
#include "mfa/errors.hpp"
#include "mfa/estimator.hpp"
#include "mfa/forecast.hpp"
#include "mfa/inference.hpp"
#include "mfa/selection.hpp"
#include "mfa/simlab.hpp"

namespace mfa {

using Json = nlohmann::json;

// 17 significant digits round-trips any double through text.
inline std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  return buffer;
}

struct NamedPanel {
  Panel panel;
  std::vector<std::string> series_names;
};

// Panel CSV: header row of series names, one row per time period. Missing
// or non-numeric cells reject the file.
inline NamedPanel read_panel_csv(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line))
    throw DataError("empty panel file: " + origin);
  NamedPanel out;
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) out.series_names.push_back(cell);
  }
  const std::size_t n = out.series_names.size();
  if (n == 0) throw DataError("panel header has no series: " + origin);

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      if (cell.empty())
        throw DataError("missing value in panel file: " + origin);
      std::size_t consumed = 0;
      double value;
      try {
        value = std::stod(cell, &consumed);
      } catch (const std::exception&) {
        throw DataError("non-numeric cell '" + cell + "' in " + origin);
      }
      if (consumed != cell.size())
        throw DataError("non-numeric cell '" + cell + "' in " + origin);
      row.push_back(value);
    }
    if (row.size() != n)
      throw DataError("ragged row in panel file: " + origin);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("panel file has no data rows: " + origin);

  Matrix values(n, rows.size());  // transpose: series-major storage
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t i = 0; i < n; ++i) values(i, t) = rows[t][i];
  out.panel = Panel(std::move(values));
  return out;
}

inline NamedPanel read_panel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open panel file: " + path);
  return read_panel_csv(in, path);
}

inline void write_panel_csv(std::ostream& out, const Panel& panel,
                            const std::vector<std::string>& names) {
  for (Eigen::Index i = 0; i < panel.n_series(); ++i)
    out << (i ? "," : "") << names[static_cast<std::size_t>(i)];
  out << '\n';
  for (Eigen::Index t = 0; t < panel.n_periods(); ++t) {
    for (Eigen::Index i = 0; i < panel.n_series(); ++i)
      out << (i ? "," : "") << format_double(panel.values(i, t));
    out << '\n';
  }
}

namespace detail {

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const Json& rows) {
  if (!rows.is_array() || rows.empty())
    throw DataError("expected a non-empty array of rows");
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != static_cast<std::size_t>(m.cols()))
      throw DataError("ragged matrix in JSON");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j].get<double>();
  }
  return m;
}

}  // namespace detail

inline Json to_json(const FactorModel& model) {
  return Json{{"n_series", model.n_series()},
              {"n_periods", model.n_periods()},
              {"n_factors", model.n_factors()},
              {"loadings", detail::matrix_to_json(model.loadings)},
              {"factors", detail::matrix_to_json(model.factors)},
              {"normalized", model.normalized}};
}

inline FactorModel factor_model_from_json(const Json& j) {
  FactorModel model;
  model.loadings = detail::matrix_from_json(j.at("loadings"));
  model.factors = detail::matrix_from_json(j.at("factors"));
  model.normalized = j.value("normalized", false);
  if (model.loadings.rows() != j.at("n_series").get<Eigen::Index>() ||
      model.factors.rows() != j.at("n_periods").get<Eigen::Index>() ||
      model.loadings.cols() != j.at("n_factors").get<Eigen::Index>() ||
      model.factors.cols() != model.loadings.cols())
    throw DataError("factor model JSON dimensions are inconsistent");
  return model;
}

inline Json to_json(const FitResult& fit) {
  return Json{{"model", to_json(fit.model)},
              {"objective_value", fit.objective_value},
              {"n_sweeps", fit.n_sweeps},
              {"converged", fit.converged},
              {"start_index", fit.start_index},
              {"degenerate_design", fit.degenerate_design},
              {"uniform_weight_fallback", fit.uniform_weight_fallback}};
}

inline Json to_json(const SelectionReport& report) {
  Json j{{"r_max", report.r_max},
         {"threshold", report.threshold},
         {"penalty", report.penalty},
         {"fit_count", report.fit_count}};
  if (report.eigenvalues.size() > 0) {
    Json eig = Json::array();
    for (Eigen::Index i = 0; i < report.eigenvalues.size(); ++i)
      eig.push_back(report.eigenvalues(i));
    j["eigenvalues"] = std::move(eig);
  }
  if (report.r_rank >= 0) j["r_rank"] = report.r_rank;
  if (report.r_ic >= 0) j["r_ic"] = report.r_ic;
  if (!report.ic_values.empty()) j["ic_values"] = report.ic_values;
  if (!report.ic_fit_failed.empty()) j["ic_fit_failed"] = report.ic_fit_failed;
  return j;
}

inline void write_ci_csv(std::ostream& out,
                         const std::vector<std::pair<Eigen::Index,
                                                     std::vector<Interval>>>&
                             rows) {
  out << "t,coordinate,estimate,lower,upper\n";
  for (const auto& [t, intervals] : rows)
    for (std::size_t j = 0; j < intervals.size(); ++j)
      out << t << ',' << j << ',' << format_double(intervals[j].estimate)
          << ',' << format_double(intervals[j].lower) << ','
          << format_double(intervals[j].upper) << '\n';
}

// Study configuration: {"replications": S, "seed": u64, "methods": [...],
// "metrics": [...], "threads": k, "specs": [{...}, ...]}.
struct StudyConfig {
  std::vector<DgpSpec> specs;
  StudyOptions options;
  EstimationConfig estimation;
  int replications = 100;
};

inline DgpKind dgp_kind_from_string(const std::string& s) {
  if (s == "S1") return DgpKind::S1;
  if (s == "S2") return DgpKind::S2;
  if (s == "S3") return DgpKind::S3;
  if (s == "SingleFactorGaussian") return DgpKind::SingleFactorGaussian;
  throw ConfigError("unknown DGP kind: " + s);
}

inline std::string to_string(DgpKind kind) {
  switch (kind) {
    case DgpKind::S1: return "S1";
    case DgpKind::S2: return "S2";
    case DgpKind::S3: return "S3";
    case DgpKind::SingleFactorGaussian: return "SingleFactorGaussian";
  }
  return "?";
}

inline StudyConfig parse_study_config(const Json& j) {
  StudyConfig cfg;
  cfg.replications = j.value("replications", 100);
  const std::uint64_t seed = j.value("seed", std::uint64_t{0});
  cfg.estimation.seed = seed;
  cfg.estimation.bandwidth_constant = j.value("bandwidth_constant", 5.0);
  cfg.estimation.n_starts = j.value("starts", 2);
  cfg.estimation.outer_epsilon = j.value("epsilon", 1e-6);
  cfg.options.n_threads = j.value("threads", 1);
  cfg.options.r_max = j.value("r_max", 8);
  cfg.options.inference_constant = j.value("inference_constant", 5.0);

  if (j.contains("methods")) {
    cfg.options.run_mfa = false;
    cfg.options.run_pca = false;
    for (const auto& m : j.at("methods")) {
      const std::string name = m.get<std::string>();
      if (name == "MFA") cfg.options.run_mfa = true;
      else if (name == "PCA") cfg.options.run_pca = true;
      else throw ConfigError("unknown method: " + name);
    }
  }
  if (j.contains("metrics")) {
    cfg.options.trace_metric = false;
    for (const auto& m : j.at("metrics")) {
      const std::string name = m.get<std::string>();
      if (name == "trace") cfg.options.trace_metric = true;
      else if (name == "selection") cfg.options.selection_metric = true;
      else if (name == "coverage") cfg.options.coverage_metric = true;
      else throw ConfigError("unknown metric: " + name);
    }
  }
  if (!j.contains("specs") || !j.at("specs").is_array() || j.at("specs").empty())
    throw ConfigError("study config needs a non-empty 'specs' array");
  for (const auto& s : j.at("specs")) {
    DgpSpec spec;
    spec.kind = dgp_kind_from_string(s.at("kind").get<std::string>());
    spec.n = s.at("N").get<Eigen::Index>();
    spec.t = s.at("T").get<Eigen::Index>();
    spec.r0 = s.value("r0", spec.kind == DgpKind::SingleFactorGaussian ? 1 : 3);
    spec.nu = s.value("nu", 3.0);
    spec.rho = s.value("rho", 0.0);
    spec.beta = s.value("beta", 0.0);
    spec.neighbor_span = s.value("J", 0);
    spec.sigma = s.value("sigma", 3.0);
    spec.seed = s.value("seed", seed);
    spec.validate();
    cfg.specs.push_back(spec);
  }
  return cfg;
}

// Study results, one row per (DGP, N, T, c), columns per metric/method.
inline void write_study_csv(std::ostream& out,
                            const std::vector<StudyRow>& rows,
                            const StudyOptions& opts, double c) {
  out << "dgp,N,T,c,replications,failures";
  if (opts.trace_metric && opts.run_mfa) out << ",mfa_trace";
  if (opts.trace_metric && opts.run_pca) out << ",pca_trace";
  if (opts.selection_metric)
    out << ",mean_r_rank,freq_rank,mean_r_ic,freq_ic";
  if (opts.coverage_metric) out << ",ci_coverage";
  out << '\n';
  for (const auto& row : rows) {
    out << to_string(row.spec.kind) << ',' << row.spec.n << ',' << row.spec.t
        << ',' << format_double(c) << ',' << row.replications << ','
        << row.failures;
    if (opts.trace_metric && opts.run_mfa)
      out << ',' << format_double(row.mfa_trace);
    if (opts.trace_metric && opts.run_pca)
      out << ',' << format_double(row.pca_trace);
    if (opts.selection_metric)
      out << ',' << format_double(row.mean_r_rank) << ','
          << format_double(row.freq_rank) << ','
          << format_double(row.mean_r_ic) << ',' << format_double(row.freq_ic);
    if (opts.coverage_metric) out << ',' << format_double(row.ci_coverage);
    out << '\n';
  }
}

inline Json to_json(const ForecastReport& report) {
  Json records = Json::array();
  for (const auto& rec : report.records)
    records.push_back(Json{{"date", rec.date},
                           {"forecast", rec.forecast},
                           {"benchmark", rec.benchmark},
                           {"realized", rec.realized}});
  Json subs = Json::array();
  for (const auto& sub : report.sub_periods)
    subs.push_back(Json{{"first_date", sub.first_date},
                        {"last_date", sub.last_date},
                        {"mse", sub.mse},
                        {"benchmark_mse", sub.benchmark_mse},
                        {"relative_mse", sub.relative_mse}});
  return Json{{"records", std::move(records)},
              {"mse", report.mse},
              {"benchmark_mse", report.benchmark_mse},
              {"relative_mse", report.relative_mse},
              {"sub_periods", std::move(subs)},
              {"skipped_windows", report.skipped_windows}};
}

inline void write_forecast_csv(std::ostream& out, const ForecastReport& report) {
  out << "date,forecast,benchmark,realized\n";
  for (const auto& rec : report.records)
    out << rec.date << ',' << format_double(rec.forecast) << ','
        << format_double(rec.benchmark) << ',' << format_double(rec.realized)
        << '\n';
}

// FNV-1a 64-bit content digest for run manifests.
inline std::string digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for digest: " + path);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buffer[4096];
  while (in.read(buffer, sizeof buffer) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(hash));
  return hex;
}

}  // namespace mfa

#endif
