// End-to-end acceptance checks. Each numbered criterion prints exactly one
// PASS/FAIL line; the process exits nonzero if any criterion fails.

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mfa/forecast.hpp"
#include "mfa/io.hpp"
#include "mfa/simlab.hpp"
#include "oracles.hpp"

using namespace mfa;

namespace {

int failures = 0;
int total_norm_violations = 0;
int audited_models = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s (%s)\n", criterion, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

StudyRow trace_study(DgpKind kind, Eigen::Index n, Eigen::Index t, double nu,
                     double sigma, int reps, std::uint64_t seed,
                     int threads = 1) {
  DgpSpec spec;
  spec.kind = kind;
  spec.n = n;
  spec.t = t;
  spec.r0 = kind == DgpKind::SingleFactorGaussian ? 1 : 3;
  spec.nu = nu;
  spec.sigma = sigma;
  spec.seed = seed;
  EstimationConfig cfg;
  StudyOptions opts;
  opts.n_threads = threads;
  const StudyRow row = run_study(spec, cfg, opts, reps);
  total_norm_violations += row.normalization_violations;
  audited_models += row.replications - row.failures;
  return row;
}

std::string study_bytes(const StudyRow& row, const StudyOptions& opts) {
  std::ostringstream out;
  write_study_csv(out, {row}, opts, 5.0);
  return out.str();
}

Panel random_panel(Eigen::Index n, Eigen::Index t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix x(n, t);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index s = 0; s < t; ++s) x(i, s) = normal(rng);
  return Panel(x);
}

}  // namespace

// S1 with t3 errors at (100, 100): estimation accuracy of both methods.
static StudyRow criterion_1() {
  const StudyRow row =
      trace_study(DgpKind::S1, 100, 100, 3.0, 3.0, 100, 0xace1);
  const bool pass = std::abs(row.mfa_trace - 0.983) <= 0.01 &&
                    std::abs(row.pca_trace - 0.955) <= 0.02 &&
                    row.failures == 0;
  report(1, pass,
         "mfa=" + fmt(row.mfa_trace) + " pca=" + fmt(row.pca_trace) +
             " failures=" + std::to_string(row.failures));
  return row;
}

// S1 with Cauchy errors: the kernel criterion stays accurate, PCA collapses.
static void criterion_2() {
  const StudyRow row =
      trace_study(DgpKind::S1, 100, 100, 1.0, 3.0, 100, 0xace2);
  const bool pass =
      row.mfa_trace >= 0.93 && row.pca_trace <= 0.10 && row.failures == 0;
  report(2, pass,
         "mfa=" + fmt(row.mfa_trace) + " pca=" + fmt(row.pca_trace) +
             " failures=" + std::to_string(row.failures));
}

// Factor-number consistency at (200, 200).
static void criterion_3() {
  DgpSpec spec;
  spec.kind = DgpKind::S1;
  spec.n = 200;
  spec.t = 200;
  spec.r0 = 3;
  spec.nu = 3.0;
  spec.seed = 0xace3;
  EstimationConfig cfg;
  StudyOptions opts;
  opts.run_pca = false;
  opts.trace_metric = false;
  opts.selection_metric = true;
  opts.r_max = 8;
  const StudyRow row = run_study(spec, cfg, opts, 100);
  total_norm_violations += row.normalization_violations;
  audited_models += row.replications - row.failures;
  const bool pass =
      row.freq_ic >= 0.95 && row.freq_rank >= 0.90 && row.failures == 0;
  report(3, pass,
         "freq_ic=" + fmt(row.freq_ic) + " freq_rank=" + fmt(row.freq_rank) +
             " failures=" + std::to_string(row.failures));
}

// Skewed mixture errors: MFA holds up and beats PCA.
static void criterion_4() {
  const StudyRow row =
      trace_study(DgpKind::S3, 100, 100, 3.0, 3.0, 100, 0xace4);
  const bool pass = row.mfa_trace >= 0.94 &&
                    row.mfa_trace - row.pca_trace >= 0.01 &&
                    row.failures == 0;
  report(4, pass,
         "mfa=" + fmt(row.mfa_trace) + " pca=" + fmt(row.pca_trace) +
             " failures=" + std::to_string(row.failures));
}

// Every outer sweep ascends the panel objective.
static void criterion_5() {
  int violations = 0;
  EstimationConfig cfg;
  cfg.n_factors = 2;
  for (std::uint64_t rep = 0; rep < 200; ++rep) {
    const Eigen::Index n = 4 + rep % 5, t = 5 + rep % 7;
    const Panel p = random_panel(n, t, 0xbead + rep);
    const Bandwidth h = estimation_bandwidth(n, t, 5.0);
    std::mt19937_64 rng(rep);
    FactorModel model = detail::random_start(n, t, 2, rng);
    double obj = objective(p, model, h);
    for (int k = 0; k < 6; ++k) {
      model = sweep(p, model, h, cfg);
      const double next = objective(p, model, h);
      if (next < obj - 1e-12) ++violations;
      obj = next;
    }
  }
  report(5, violations == 0,
         "sweeps=1200 violations=" + std::to_string(violations));
}

// The fitted objective reaches the brute-force global maximum on panels
// small enough to grid-search.
static void criterion_6() {
  int misses = 0;
  double worst_gap = 0.0;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    const Panel p = random_panel(3, 4, 0xcafe + rep);
    EstimationConfig cfg;
    cfg.n_factors = 1;
    cfg.seed = rep;
    cfg.n_starts = 4;
    const FitResult result = fit(p, cfg);
    const double h = estimation_bandwidth(3, 4, 5.0).h;
    const double oracle = oracles::rank1_grid_max(p.values, h);
    const double gap = oracle - result.objective_value;
    worst_gap = std::max(worst_gap, gap);
    if (gap > 1e-3) ++misses;
  }
  report(6, misses == 0,
         "panels=20 misses=" + std::to_string(misses) +
             " worst_gap=" + fmt(worst_gap));
}

// CI coverage at the inference bandwidth.
static void criterion_7() {
  DgpSpec spec;
  spec.kind = DgpKind::SingleFactorGaussian;
  spec.n = 100;
  spec.t = 100;
  spec.r0 = 1;
  spec.seed = 0xace7;
  EstimationConfig cfg;
  StudyOptions opts;
  opts.run_pca = false;
  opts.trace_metric = false;
  opts.coverage_metric = true;
  const StudyRow row = run_study(spec, cfg, opts, 200);
  total_norm_violations += row.normalization_violations;
  audited_models += row.replications - row.failures;
  const bool pass = row.ci_coverage >= 0.88 && row.ci_coverage <= 0.99 &&
                    row.failures == 0;
  report(7, pass,
         "coverage=" + fmt(row.ci_coverage) +
             " failures=" + std::to_string(row.failures));
}

// Normalization invariants on every model audited above, plus component
// preservation of the normalization itself.
static void criterion_8() {
  int component_violations = 0;
  std::mt19937_64 rng(0xace8);
  for (int rep = 0; rep < 50; ++rep) {
    FactorModel model = detail::random_start(10, 12, 2, rng);
    model.loadings *= 3.0;
    const NormalizeResult res = normalize(model);
    if (component_distance(model, res.model) > 1e-10) ++component_violations;
    const NormalizationCheck check = check_normalization(res.model);
    if (check.factor_gram_error > 1e-10 || check.loading_offdiag > 1e-8 ||
        !check.diagonal_nonincreasing)
      ++component_violations;
  }
  const bool pass = total_norm_violations == 0 && component_violations == 0;
  report(8, pass,
         "audited_fits=" + std::to_string(audited_models) +
             " violations=" + std::to_string(total_norm_violations) +
             " component_violations=" + std::to_string(component_violations));
}

// Factor-augmented forecasting beats the AR benchmark on a panel whose
// factor predicts the target, and never reads past the window end.
static void criterion_9() {
  const int n = 20, total = 220;
  std::mt19937_64 rng(0xace9);
  std::normal_distribution<double> normal;
  Vector f(total);
  f(0) = normal(rng);
  for (int t = 1; t < total; ++t) f(t) = 0.7 * f(t - 1) + normal(rng);
  Matrix x(n, total);
  for (int i = 0; i < n; ++i) {
    const double lambda = 0.5 + 0.1 * i;
    for (int t = 0; t < total; ++t) x(i, t) = lambda * f(t) + 0.3 * normal(rng);
  }
  Vector y(total);
  y(0) = 0.0;
  for (int t = 1; t < total; ++t) y(t) = f(t - 1) + 0.2 * normal(rng);

  ForecastSpec spec;
  spec.window = 120;
  spec.horizon = 1;
  spec.factor_method = FactorMethod::MFA;
  spec.r_selection = RSelection::Fixed;
  spec.fixed_r = 1;
  EstimationConfig cfg;
  cfg.seed = 0xf0ca;
  const Panel panel(x);
  const ForecastReport report_clean = rolling_eval(y, panel, spec, cfg);

  // No-lookahead sentinel: corrupting the future must not move forecasts
  // dated before the corruption.
  const int corrupt_from = 190;
  Vector bad_y = y;
  Matrix bad_x = x;
  for (int t = corrupt_from; t < total; ++t) {
    bad_y(t) = 1e6 + t;
    bad_x.col(t).setConstant(-1e6);
  }
  const ForecastReport report_bad =
      rolling_eval(bad_y, Panel(bad_x), spec, cfg);
  bool lookahead_clean = true;
  for (std::size_t k = 0; k < report_clean.records.size(); ++k) {
    if (report_clean.records[k].date >= corrupt_from) break;
    if (report_bad.records[k].forecast != report_clean.records[k].forecast ||
        report_bad.records[k].benchmark != report_clean.records[k].benchmark)
      lookahead_clean = false;
  }

  const bool pass = report_clean.relative_mse < 0.8 && lookahead_clean &&
                    report_clean.skipped_windows == 0;
  report(9, pass,
         "relative_mse=" + fmt(report_clean.relative_mse) +
             " lookahead_clean=" + (lookahead_clean ? std::string("yes")
                                                    : std::string("no")));
}

// Byte-identical study output across re-runs and worker counts.
static void criterion_10(const StudyRow& c1_row) {
  StudyOptions trace_opts;

  // Re-run criterion 1's study with 3 worker threads.
  const int audited_before = audited_models;
  const int violations_before = total_norm_violations;
  const StudyRow rerun =
      trace_study(DgpKind::S1, 100, 100, 3.0, 3.0, 100, 0xace1, 3);
  audited_models = audited_before;  // same models, do not double count
  total_norm_violations = violations_before;
  const bool rerun_identical =
      study_bytes(c1_row, trace_opts) == study_bytes(rerun, trace_opts);

  // Reduced selection study, 1 vs 3 threads.
  DgpSpec spec;
  spec.kind = DgpKind::S1;
  spec.n = 60;
  spec.t = 60;
  spec.r0 = 3;
  spec.nu = 3.0;
  spec.seed = 0xacea;
  EstimationConfig cfg;
  StudyOptions sel_opts;
  sel_opts.run_pca = false;
  sel_opts.trace_metric = false;
  sel_opts.selection_metric = true;
  sel_opts.r_max = 5;
  const StudyRow sel1 = run_study(spec, cfg, sel_opts, 5);
  StudyOptions sel3 = sel_opts;
  sel3.n_threads = 3;
  const StudyRow sel3_row = run_study(spec, cfg, sel3, 5);
  const bool sel_identical =
      study_bytes(sel1, sel_opts) == study_bytes(sel3_row, sel_opts);

  report(10, rerun_identical && sel_identical,
         std::string("rerun_identical=") + (rerun_identical ? "yes" : "no") +
             " threads_identical=" + (sel_identical ? "yes" : "no"));
}

int main() {
  const StudyRow c1 = criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10(c1);
  std::printf("%s: %d/10 criteria passed\n",
              failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
              10 - failures);
  return failures == 0 ? 0 : 1;
}
