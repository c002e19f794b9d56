// Command-line surface for the modal factor analysis toolkit:
//   estimate  fit loadings and factors on a panel CSV
//   select    choose the number of factors (rank / IC / both)
//   simulate  run a Monte Carlo study from a JSON config
//   infer     confidence intervals for the factor path
//   forecast  rolling-window factor-augmented forecasting

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfa/baselines.hpp"
#include "mfa/core.hpp"
#include "mfa/estimator.hpp"
#include "mfa/forecast.hpp"
#include "mfa/inference.hpp"
#include "mfa/io.hpp"
#include "mfa/selection.hpp"
#include "mfa/simlab.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct ManifestBuilder {
  mfa::Json config = mfa::Json::object();
  std::map<std::string, std::string> inputs;
  std::vector<std::string> outputs;

  void add_input(const std::string& path) {
    inputs[path] = mfa::digest_file(path);
  }

  void write(const std::string& command, std::uint64_t seed,
             const std::string& primary_output) const {
    mfa::Json manifest{{"command", command},
                       {"config", config},
                       {"seed", seed},
                       {"tool_version", kVersion},
                       {"inputs", inputs},
                       {"outputs", outputs}};
    const std::string path = primary_output + ".manifest.json";
    std::ofstream out(path);
    out << manifest.dump(2) << '\n';
  }
};

std::ofstream open_output(const std::string& path) {
  if (const auto dir = std::filesystem::path(path).parent_path(); !dir.empty())
    std::filesystem::create_directories(dir);
  std::ofstream out(path);
  if (!out) throw mfa::DataError("cannot open output file: " + path);
  return out;
}

mfa::Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mfa::DataError("cannot open file: " + path);
  try {
    return mfa::Json::parse(in);
  } catch (const mfa::Json::parse_error& e) {
    throw mfa::ConfigError("malformed JSON in " + path + ": " + e.what());
  }
}

struct CommonFitFlags {
  double bandwidth_constant = 5.0;
  std::uint64_t seed = 0;
  int starts = 2;
  double epsilon = 1e-6;

  void attach(CLI::App* cmd) {
    cmd->add_option("--bandwidth-constant,-c", bandwidth_constant,
                    "Kernel bandwidth constant c in h = c min(N,T)^(-1/7)")
        ->envname("MFA_BANDWIDTH_CONSTANT");
    cmd->add_option("--seed", seed, "RNG seed")->envname("MFA_SEED");
    cmd->add_option("--starts", starts, "Number of random starts")
        ->envname("MFA_STARTS");
    cmd->add_option("--epsilon", epsilon, "Outer-loop stopping tolerance")
        ->envname("MFA_EPSILON");
  }

  mfa::EstimationConfig to_config() const {
    mfa::EstimationConfig cfg;
    cfg.bandwidth_constant = bandwidth_constant;
    cfg.seed = seed;
    cfg.n_starts = starts;
    cfg.outer_epsilon = epsilon;
    return cfg;
  }
};

int run_estimate(const std::string& panel_path, int r,
                 const CommonFitFlags& flags, bool verbose,
                 const std::string& out_path) {
  const mfa::NamedPanel named = mfa::read_panel_csv(panel_path);
  mfa::EstimationConfig cfg = flags.to_config();
  cfg.n_factors = r;
  if (verbose) cfg.progress = &std::cerr;
  const mfa::FitResult result = mfa::fit(named.panel, cfg);

  open_output(out_path) << mfa::to_json(result).dump(2) << '\n';

  ManifestBuilder manifest;
  manifest.config = {{"r", r},
                     {"bandwidth_constant", flags.bandwidth_constant},
                     {"starts", flags.starts},
                     {"epsilon", flags.epsilon}};
  manifest.add_input(panel_path);
  manifest.outputs = {out_path};
  manifest.write("estimate", flags.seed, out_path);
  return 0;
}

int run_select(const std::string& panel_path, int r_max,
               const std::string& method, const CommonFitFlags& flags,
               const std::string& out_path) {
  if (method != "rank" && method != "ic" && method != "both")
    throw mfa::ConfigError("method must be one of rank|ic|both");
  const mfa::NamedPanel named = mfa::read_panel_csv(panel_path);
  const mfa::EstimationConfig cfg = flags.to_config();

  mfa::SelectionReport report;
  if (method == "rank")
    report = mfa::select_rank(named.panel, r_max, cfg);
  else if (method == "ic")
    report = mfa::select_ic(named.panel, r_max, cfg);
  else
    report = mfa::select_both(named.panel, r_max, cfg);

  if (report.eigenvalues.size() > 0) {
    std::cout << "r,eigenvalue,threshold\n";
    for (Eigen::Index j = 0; j < report.eigenvalues.size(); ++j)
      std::cout << (j + 1) << ',' << mfa::format_double(report.eigenvalues(j))
                << ',' << mfa::format_double(report.threshold) << '\n';
  }
  if (!report.ic_values.empty()) {
    std::cout << "r,ic,penalty\n";
    for (std::size_t j = 0; j < report.ic_values.size(); ++j)
      std::cout << (j + 1) << ',' << mfa::format_double(report.ic_values[j])
                << ',' << mfa::format_double(report.penalty) << '\n';
  }
  if (report.r_rank >= 0) std::cout << "r_rank=" << report.r_rank << '\n';
  if (report.r_ic >= 0) std::cout << "r_ic=" << report.r_ic << '\n';

  open_output(out_path) << mfa::to_json(report).dump(2) << '\n';

  ManifestBuilder manifest;
  manifest.config = {{"r_max", r_max},
                     {"method", method},
                     {"bandwidth_constant", flags.bandwidth_constant},
                     {"starts", flags.starts},
                     {"epsilon", flags.epsilon}};
  manifest.add_input(panel_path);
  manifest.outputs = {out_path};
  manifest.write("select", flags.seed, out_path);
  return 0;
}

int run_simulate(const std::string& config_path, int threads,
                 const std::string& out_path) {
  const mfa::Json raw = load_json(config_path);
  mfa::StudyConfig study = mfa::parse_study_config(raw);
  if (threads > 0) study.options.n_threads = threads;

  std::vector<mfa::StudyRow> rows;
  rows.reserve(study.specs.size());
  for (const auto& spec : study.specs)
    rows.push_back(mfa::run_study(spec, study.estimation, study.options,
                                  study.replications));

  auto out = open_output(out_path);
  mfa::write_study_csv(out, rows, study.options,
                       study.estimation.bandwidth_constant);

  ManifestBuilder manifest;
  manifest.config = raw;
  manifest.config["resolved_threads"] = study.options.n_threads;
  manifest.add_input(config_path);
  manifest.outputs = {out_path};
  manifest.write("simulate", study.estimation.seed, out_path);
  return 0;
}

int run_infer(const std::string& panel_path, int r, double c, double level,
              const CommonFitFlags& flags, const std::string& out_path) {
  const mfa::NamedPanel named = mfa::read_panel_csv(panel_path);
  const mfa::Bandwidth bw = mfa::inference_bandwidth(named.panel.n_periods(), c);
  mfa::EstimationConfig cfg = flags.to_config();
  cfg.n_factors = r;
  cfg.bandwidth_override = bw.h;
  const mfa::FitResult fit = mfa::fit(named.panel, cfg);

  std::vector<std::pair<Eigen::Index, std::vector<mfa::Interval>>> rows;
  bool warned = false;
  for (Eigen::Index t = 0; t < named.panel.n_periods(); ++t) {
    const mfa::SandwichVariance var =
        mfa::factor_variance(named.panel, fit, bw, t);
    if (var.unbalanced_warning && !warned) {
      std::cerr << "warning: panel is unbalanced beyond 3:1; asymptotic "
                   "intervals may be unreliable\n";
      warned = true;
    }
    rows.emplace_back(t,
                      mfa::factor_ci(fit, var, named.panel.n_series(), bw,
                                     level, t));
  }
  auto out = open_output(out_path);
  mfa::write_ci_csv(out, rows);

  ManifestBuilder manifest;
  manifest.config = {{"r", r},
                     {"inference_constant", c},
                     {"level", level},
                     {"starts", flags.starts},
                     {"epsilon", flags.epsilon}};
  manifest.add_input(panel_path);
  manifest.outputs = {out_path};
  manifest.write("infer", flags.seed, out_path);
  return 0;
}

mfa::ForecastSpec parse_forecast_spec(const mfa::Json& j) {
  mfa::ForecastSpec spec;
  spec.horizon = j.value("horizon", 1);
  spec.window = j.value("window", 120);
  spec.p_max = j.value("p_max", 3);
  spec.fixed_r = j.value("fixed_r", 1);
  spec.r_max = j.value("r_max", 8);
  spec.bandwidth_constant = j.value("bandwidth_constant", 5.0);
  const std::string method = j.value("factor_method", std::string("MFA"));
  if (method == "MFA") spec.factor_method = mfa::FactorMethod::MFA;
  else if (method == "PCA") spec.factor_method = mfa::FactorMethod::PCA;
  else if (method == "none") spec.factor_method = mfa::FactorMethod::None;
  else throw mfa::ConfigError("unknown factor_method: " + method);
  const std::string selection = j.value("r_selection", std::string("IC"));
  if (selection == "IC") spec.r_selection = mfa::RSelection::IC;
  else if (selection == "rank") spec.r_selection = mfa::RSelection::Rank;
  else if (selection == "PCp1") spec.r_selection = mfa::RSelection::PCp1;
  else if (selection == "fixed") spec.r_selection = mfa::RSelection::Fixed;
  else throw mfa::ConfigError("unknown r_selection: " + selection);
  if (j.contains("split_points"))
    spec.split_points = j.at("split_points").get<std::vector<int>>();
  spec.validate();
  return spec;
}

int run_forecast(const std::string& panel_path, const std::string& target_name,
                 const std::string& spec_path, const std::string& tcode_path,
                 const CommonFitFlags& flags, const std::string& out_path) {
  const mfa::NamedPanel named = mfa::read_panel_csv(panel_path);
  const mfa::Json spec_json = load_json(spec_path);
  mfa::ForecastSpec spec = parse_forecast_spec(spec_json);

  std::map<std::string, int> tcodes;
  if (!tcode_path.empty())
    tcodes = load_json(tcode_path).get<std::map<std::string, int>>();

  // Apply per-series transform codes, then trim every series to the common
  // (shortest) length from the front so the time index stays aligned.
  std::vector<mfa::Vector> transformed;
  Eigen::Index shortest = named.panel.n_periods();
  for (Eigen::Index i = 0; i < named.panel.n_series(); ++i) {
    const std::string& name = named.series_names[static_cast<std::size_t>(i)];
    const auto it = tcodes.find(name);
    const int code = it == tcodes.end() ? 1 : it->second;
    transformed.push_back(mfa::apply_tcode(
        named.panel.values.row(i).transpose(), code, name));
    shortest = std::min(shortest, transformed.back().size());
  }
  mfa::Matrix values(named.panel.n_series(), shortest);
  for (Eigen::Index i = 0; i < named.panel.n_series(); ++i)
    values.row(i) = transformed[static_cast<std::size_t>(i)]
                        .tail(shortest)
                        .transpose();
  const mfa::Panel panel(values);

  Eigen::Index target_index = -1;
  for (std::size_t i = 0; i < named.series_names.size(); ++i)
    if (named.series_names[i] == target_name)
      target_index = static_cast<Eigen::Index>(i);
  if (target_index < 0)
    throw mfa::ConfigError("target series '" + target_name +
                           "' not found in panel header");
  const mfa::Vector target = panel.values.row(target_index).transpose();

  mfa::EstimationConfig cfg = flags.to_config();
  const mfa::ForecastReport report =
      mfa::rolling_eval(target, panel, spec, cfg);

  open_output(out_path) << mfa::to_json(report).dump(2) << '\n';
  const std::string csv_path = out_path + ".forecasts.csv";
  auto csv = open_output(csv_path);
  mfa::write_forecast_csv(csv, report);

  ManifestBuilder manifest;
  manifest.config = spec_json;
  manifest.config["target"] = target_name;
  manifest.add_input(panel_path);
  manifest.add_input(spec_path);
  if (!tcode_path.empty()) manifest.add_input(tcode_path);
  manifest.outputs = {out_path, csv_path};
  manifest.write("forecast", flags.seed, out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modal factor analysis toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  int threads = 0;
  app.add_option("--threads", threads,
                 "Worker threads (affects wall time only, never results)")
      ->envname("MFA_THREADS");

  // estimate
  auto* estimate = app.add_subcommand("estimate", "Fit the modal factor model");
  std::string est_panel, est_out = "fit.json";
  int est_r = 0;
  bool est_verbose = false;
  CommonFitFlags est_flags;
  estimate->add_option("--panel", est_panel, "Panel CSV")->required();
  estimate->add_option("--r", est_r, "Number of factors")->required();
  estimate->add_option("--out", est_out, "Output JSON path");
  estimate->add_flag("--verbose", est_verbose, "Log sweep progress to stderr");
  est_flags.attach(estimate);

  // select
  auto* select = app.add_subcommand("select", "Select the number of factors");
  std::string sel_panel, sel_method = "both", sel_out = "selection.json";
  int sel_rmax = 8;
  CommonFitFlags sel_flags;
  select->add_option("--panel", sel_panel, "Panel CSV")->required();
  select->add_option("--rmax", sel_rmax, "Maximum factor count")
      ->envname("MFA_RMAX");
  select->add_option("--method", sel_method, "rank|ic|both");
  select->add_option("--out", sel_out, "Output JSON path");
  sel_flags.attach(select);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo study");
  std::string sim_config, sim_out = "study.csv";
  simulate->add_option("--config", sim_config, "Study config JSON")->required();
  simulate->add_option("--out", sim_out, "Output CSV path");

  // infer
  auto* infer = app.add_subcommand("infer", "Factor confidence intervals");
  std::string inf_panel, inf_out = "ci.csv";
  int inf_r = 1;
  double inf_c = 5.0, inf_level = 0.95;
  CommonFitFlags inf_flags;
  infer->add_option("--panel", inf_panel, "Panel CSV")->required();
  infer->add_option("--r", inf_r, "Number of factors")->required();
  infer->add_option("--inference-constant", inf_c,
                    "Constant c in h = c T^(-1/12)")
      ->envname("MFA_INFERENCE_CONSTANT");
  infer->add_option("--level", inf_level, "Confidence level in (0,1)")
      ->envname("MFA_LEVEL");
  infer->add_option("--out", inf_out, "Output CSV path");
  inf_flags.attach(infer);

  // forecast
  auto* forecast = app.add_subcommand("forecast", "Rolling-window forecasting");
  std::string fc_panel, fc_target, fc_spec, fc_tcodes, fc_out = "forecast.json";
  CommonFitFlags fc_flags;
  forecast->add_option("--panel", fc_panel, "Panel CSV")->required();
  forecast->add_option("--target", fc_target, "Target series name")->required();
  forecast->add_option("--spec", fc_spec, "Forecast spec JSON")->required();
  forecast->add_option("--tcodes", fc_tcodes,
                       "Per-series transform code map JSON");
  forecast->add_option("--out", fc_out, "Output JSON path");
  fc_flags.attach(forecast);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (estimate->parsed())
      return run_estimate(est_panel, est_r, est_flags, est_verbose, est_out);
    if (select->parsed())
      return run_select(sel_panel, sel_rmax, sel_method, sel_flags, sel_out);
    if (simulate->parsed()) return run_simulate(sim_config, threads, sim_out);
    if (infer->parsed())
      return run_infer(inf_panel, inf_r, inf_c, inf_level, inf_flags, inf_out);
    if (forecast->parsed())
      return run_forecast(fc_panel, fc_target, fc_spec, fc_tcodes, fc_flags,
                          fc_out);
  } catch (const mfa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const mfa::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const mfa::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}
