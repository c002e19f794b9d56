#ifndef MFA_FORECAST_HPP
#define MFA_FORECAST_HPP

// Rolling-window factor-augmented autoregressive point forecasting:
// stationarity transform codes, per-window standardization, BIC lag
// selection, and relative-MSE reporting against the AR benchmark.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mfa/baselines.hpp"
#include "mfa/core.hpp"
#include "mfa/errors.hpp"
#include "mfa/estimator.hpp"
#include "mfa/selection.hpp"

namespace mfa {

// Standard FRED transform codes:
//   1 level, 2 delta, 3 delta^2, 4 ln, 5 delta ln, 6 delta^2 ln,
//   7 delta(x_t / x_{t-1} - 1).
inline Vector apply_tcode(const Vector& series, int code,
                          const std::string& name = "") {
  auto fail_positive = [&] {
    throw DataError("transform code requires strictly positive series" +
                    (name.empty() ? std::string() : " '" + name + "'"));
  };
  auto diff = [](const Vector& x) {
    return Vector(x.tail(x.size() - 1) - x.head(x.size() - 1));
  };
  switch (code) {
    case 1:
      return series;
    case 2:
      return diff(series);
    case 3:
      return diff(diff(series));
    case 4:
    case 5:
    case 6: {
      if ((series.array() <= 0.0).any()) fail_positive();
      Vector logged = series.array().log();
      if (code == 4) return logged;
      if (code == 5) return diff(logged);
      return diff(diff(logged));
    }
    case 7: {
      if ((series.array() <= 0.0).any()) fail_positive();
      Vector ratio(series.size() - 1);
      for (Eigen::Index t = 1; t < series.size(); ++t)
        ratio(t - 1) = series(t) / series(t - 1) - 1.0;
      return diff(ratio);
    }
    default:
      throw ConfigError("transform code must be in 1..7");
  }
}

// Per-series mean 0, variance 1 (divisor T-1).
inline Panel standardize(const Panel& panel) {
  Matrix out = panel.values;
  const double t = static_cast<double>(panel.n_periods());
  for (Eigen::Index i = 0; i < panel.n_series(); ++i) {
    const double mean = out.row(i).mean();
    out.row(i).array() -= mean;
    const double var = out.row(i).squaredNorm() / (t - 1.0);
    if (!(var > 0.0))
      throw DataError("series " + std::to_string(i) + " has zero variance");
    out.row(i) /= std::sqrt(var);
  }
  return Panel(std::move(out));
}

struct ArFit {
  int p = 0;                // chosen lag upper index (lags 0..p enter)
  Vector coefficients;      // intercept, then lags 0..p
  bool degenerate = false;  // zero SSR or collinear design
};

namespace detail {

struct LsFit {
  Vector coefficients;
  double ssr = 0.0;
  bool rank_deficient = false;
};

inline LsFit least_squares(const Matrix& design, const Vector& y) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(design);
  cod.setThreshold(1e-10);
  LsFit fit;
  fit.coefficients = cod.solve(y);
  fit.ssr = (y - design * fit.coefficients).squaredNorm();
  fit.rank_deficient = cod.rank() < design.cols();
  return fit;
}

// Direct-projection design for y_{t+s} on (1, y_t, ..., y_{t-p}), sampled
// over t = first_t .. len-1-s so every candidate p shares the same rows.
inline Matrix ar_design(const Vector& y, int p, int first_t, int horizon) {
  const int rows = static_cast<int>(y.size()) - horizon - first_t;
  Matrix design(rows, p + 2);
  for (int k = 0; k < rows; ++k) {
    const int t = first_t + k;
    design(k, 0) = 1.0;
    for (int j = 0; j <= p; ++j) design(k, 1 + j) = y(t - j);
  }
  return design;
}

inline Vector ar_targets(const Vector& y, int first_t, int horizon) {
  const int rows = static_cast<int>(y.size()) - horizon - first_t;
  Vector target(rows);
  for (int k = 0; k < rows; ++k) target(k) = y(first_t + k + horizon);
  return target;
}

}  // namespace detail

// BIC lag selection for the direct s-step projection: choose p in 0..p_max
// minimizing ln(SSR/n) + (p+2) ln(n)/n on a common sample, ties to the
// smallest p.
inline ArFit fit_ar_bic(const Vector& y, int p_max, int horizon) {
  if (p_max < 0) throw ConfigError("p_max must be nonnegative");
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  const int n_obs = static_cast<int>(y.size()) - horizon - p_max;
  if (n_obs < p_max + 2)
    throw ConfigError("series too short for the requested lag order");
  const Vector target = detail::ar_targets(y, p_max, horizon);

  ArFit best;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int p = 0; p <= p_max; ++p) {
    const detail::LsFit ls =
        detail::least_squares(detail::ar_design(y, p, p_max, horizon), target);
    const double n = static_cast<double>(n_obs);
    const double bic = (ls.ssr > 0.0
                            ? std::log(ls.ssr / n)
                            : -std::numeric_limits<double>::infinity()) +
                       (p + 2) * std::log(n) / n;
    if (bic < best_bic) {
      best_bic = bic;
      best.p = p;
      best.coefficients = ls.coefficients;
      best.degenerate = ls.rank_deficient || ls.ssr <= 0.0;
    }
  }
  return best;
}

enum class FactorMethod { None, MFA, PCA };
enum class RSelection { IC, Rank, PCp1, Fixed };

struct ForecastSpec {
  int horizon = 1;
  int window = 120;
  int p_max = 3;
  FactorMethod factor_method = FactorMethod::MFA;
  RSelection r_selection = RSelection::IC;
  int fixed_r = 1;
  int r_max = 8;
  double bandwidth_constant = 5.0;
  std::vector<int> split_points;  // optional sub-period boundaries (forecast dates)

  void validate() const {
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    if (window <= p_max + horizon)
      throw ConfigError("window must exceed p_max + horizon");
    if (p_max < 0) throw ConfigError("p_max must be nonnegative");
    if (fixed_r < 1 || r_max < 1) throw ConfigError("factor counts must be positive");
  }
};

struct ForecastRecord {
  int date = 0;  // index of the forecast target period
  double forecast = 0.0;
  double benchmark = 0.0;
  double realized = 0.0;
};

struct PeriodSummary {
  int first_date = 0;
  int last_date = 0;
  double mse = 0.0;
  double benchmark_mse = 0.0;
  double relative_mse = 0.0;
};

struct ForecastReport {
  std::vector<ForecastRecord> records;
  double mse = 0.0;
  double benchmark_mse = 0.0;
  double relative_mse = 0.0;
  std::vector<PeriodSummary> sub_periods;
  int skipped_windows = 0;
};

namespace detail {

inline Matrix window_factors(const Panel& window_panel, const ForecastSpec& spec,
                             const EstimationConfig& cfg) {
  int r = spec.fixed_r;
  EstimationConfig window_cfg = cfg;
  window_cfg.bandwidth_constant = spec.bandwidth_constant;
  switch (spec.r_selection) {
    case RSelection::IC:
      r = select_ic(window_panel, spec.r_max, window_cfg).r_ic;
      break;
    case RSelection::Rank:
      r = std::max(1, select_rank(window_panel, spec.r_max, window_cfg).r_rank);
      break;
    case RSelection::PCp1:
      r = pcp1_select(window_panel, spec.r_max);
      break;
    case RSelection::Fixed:
      break;
  }
  if (r < 1) throw NumericalError("factor-number selection failed in window");
  if (spec.factor_method == FactorMethod::PCA)
    return pca_fit(window_panel, r).factors;
  window_cfg.n_factors = r;
  return fit(window_panel, window_cfg).model.factors;
}

inline PeriodSummary summarize(const std::vector<ForecastRecord>& records,
                               int first, int last) {
  PeriodSummary out;
  out.first_date = first;
  out.last_date = last;
  int count = 0;
  for (const auto& rec : records) {
    if (rec.date < first || rec.date > last) continue;
    out.mse += (rec.forecast - rec.realized) * (rec.forecast - rec.realized);
    out.benchmark_mse +=
        (rec.benchmark - rec.realized) * (rec.benchmark - rec.realized);
    ++count;
  }
  if (count > 0) {
    out.mse /= count;
    out.benchmark_mse /= count;
    out.relative_mse = out.benchmark_mse > 0.0 ? out.mse / out.benchmark_mse
                                               : 1.0;
  }
  return out;
}

}  // namespace detail

// Paired rolling evaluation. For each window ending at t: standardize the
// window's panel slice, select r, extract factors on the window, pick the
// lag order by BIC on the window's target history, and fit both the
// AR benchmark and the factor-augmented regression on the same rows. Every
// statistic at date t uses the window ending at t only.
inline ForecastReport rolling_eval(const Vector& target, const Panel& panel,
                                   const ForecastSpec& spec,
                                   const EstimationConfig& cfg) {
  spec.validate();
  if (target.size() != panel.n_periods())
    throw ShapeError("target and panel must share the time index");
  const int total = static_cast<int>(target.size());
  const int w = spec.window;
  const int s = spec.horizon;
  if (total < w + s) throw ConfigError("not enough periods for one window");

  ForecastReport report;
  for (int end = w - 1; end + s < total; ++end) {
    const int start = end - w + 1;
    const Vector y = target.segment(start, w);
    const ArFit ar = fit_ar_bic(y, spec.p_max, s);
    const int p = ar.p;
    const Matrix ar_design = detail::ar_design(y, p, spec.p_max, s);
    const Vector ar_target = detail::ar_targets(y, spec.p_max, s);

    // Benchmark prediction from the window's own AR fit.
    double bench = ar.coefficients(0);
    for (int j = 0; j <= p; ++j)
      bench += ar.coefficients(1 + j) * y(w - 1 - j);

    double forecast = bench;
    if (spec.factor_method != FactorMethod::None) {
      Matrix factors;
      try {
        const Panel window_panel =
            standardize(Panel(panel.values.middleCols(start, w)));
        factors = detail::window_factors(window_panel, spec, cfg);
      } catch (const std::exception&) {
        ++report.skipped_windows;
        continue;  // paired: drop this date from both models
      }
      const int r = static_cast<int>(factors.cols());
      Matrix design(ar_design.rows(), ar_design.cols() + r);
      design.leftCols(ar_design.cols()) = ar_design;
      for (Eigen::Index k = 0; k < design.rows(); ++k)
        design.row(k).tail(r) = factors.row(spec.p_max + k);
      const detail::LsFit ls = detail::least_squares(design, ar_target);
      forecast = ls.coefficients(0);
      for (int j = 0; j <= p; ++j)
        forecast += ls.coefficients(1 + j) * y(w - 1 - j);
      forecast +=
          factors.row(w - 1).dot(ls.coefficients.tail(r).transpose());
    }

    report.records.push_back(
        ForecastRecord{end + s, forecast, bench, target(end + s)});
  }
  if (report.records.empty())
    throw NumericalError("no window produced an evaluable forecast");

  const PeriodSummary full = detail::summarize(
      report.records, report.records.front().date, report.records.back().date);
  report.mse = full.mse;
  report.benchmark_mse = full.benchmark_mse;
  report.relative_mse = full.relative_mse;

  if (!spec.split_points.empty()) {
    int first = report.records.front().date;
    for (int boundary : spec.split_points) {
      report.sub_periods.push_back(
          detail::summarize(report.records, first, boundary));
      first = boundary + 1;
    }
    report.sub_periods.push_back(
        detail::summarize(report.records, first, report.records.back().date));
  }
  return report;
}

}  // namespace mfa

#endif
