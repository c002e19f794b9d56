#ifndef MFA_SELECTION_HPP
#define MFA_SELECTION_HPP

// Data-driven choice of the number of factors: the rank-threshold estimator
// (one fit at r_max, count loading-gram eigenvalues above P1) and the
// information-criterion estimator (one fit per candidate r, penalty P2).

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "mfa/core.hpp"
#include "mfa/errors.hpp"
#include "mfa/estimator.hpp"

namespace mfa {

struct SelectionOptions {
  // Exponents applied to L_NT^{4/7} inside the threshold/penalty rules.
  double rank_exponent = -0.3;
  double ic_exponent = -0.4;
};

struct SelectionReport {
  int r_max = 0;
  Vector eigenvalues;          // diagonal of Lambda'Lambda/N at r = r_max
  double threshold = 0.0;      // P1
  int r_rank = -1;             // -1 when the rank pass was not run
  std::vector<double> ic_values;
  std::vector<bool> ic_fit_failed;
  double penalty = 0.0;        // P2
  int r_ic = -1;               // -1 when the IC pass was not run
  int fit_count = 0;
};

inline Bandwidth bandwidth(Eigen::Index n, Eigen::Index t, double c) {
  return estimation_bandwidth(n, t, c);
}

// P1 = sigma1 * (L_NT^{4/7})^{-0.3} = sigma1 * L_NT^{-6/35} at the default
// exponent.
inline double rank_threshold(double sigma1, Eigen::Index n, Eigen::Index t,
                             double exponent = -0.3) {
  if (sigma1 < 0.0) throw ConfigError("leading eigenvalue must be nonnegative");
  const double l = static_cast<double>(std::min(n, t));
  return sigma1 * std::pow(std::pow(l, 4.0 / 7.0), exponent);
}

// Objective of the zero-factor model, (NT)^{-1} sum K_h(X_it).
inline double null_objective(const Panel& panel, const Bandwidth& bw) {
  const double inv_h = 1.0 / bw.h;
  const double n = static_cast<double>(panel.n_series() * panel.n_periods());
  return (kInvSqrt2Pi * inv_h / n) *
         (-0.5 * inv_h * inv_h * panel.values.array().square()).exp().sum();
}

// P2 = (3/7) (M_NT(theta^rbar) - M_NT) (L_NT^{4/7})^{-0.4}.
inline double ic_penalty(double obj_rbar, double obj_null, Eigen::Index n,
                         Eigen::Index t, double exponent = -0.4) {
  if (obj_rbar < obj_null - 1e-12)
    throw NumericalError(
        "r_max fit objective fell below the zero-factor objective");
  const double l = static_cast<double>(std::min(n, t));
  return (3.0 / 7.0) * (obj_rbar - obj_null) *
         std::pow(std::pow(l, 4.0 / 7.0), exponent);
}

namespace detail {

inline void check_rmax(const Panel& panel, int r_max) {
  if (r_max < 1 || r_max > std::min(panel.n_series(), panel.n_periods()))
    throw ConfigError("r_max must lie in [1, min(N,T)]");
}

inline EstimationConfig with_factors(EstimationConfig cfg, int r) {
  cfg.n_factors = r;
  return cfg;
}

}  // namespace detail

// Rank estimator: fit once at r_max, read the descending diagonal of
// Lambda'Lambda/N, count entries above P1.
inline SelectionReport select_rank(const Panel& panel, int r_max,
                                   const EstimationConfig& cfg,
                                   const SelectionOptions& opts = {}) {
  detail::check_rmax(panel, r_max);
  FitResult fr = fit(panel, detail::with_factors(cfg, r_max));

  SelectionReport report;
  report.r_max = r_max;
  report.fit_count = 1;
  report.eigenvalues = (fr.model.loadings.transpose() * fr.model.loadings /
                        static_cast<double>(panel.n_series()))
                           .diagonal();
  report.threshold = rank_threshold(report.eigenvalues(0), panel.n_series(),
                                    panel.n_periods(), opts.rank_exponent);
  report.r_rank = static_cast<int>(
      (report.eigenvalues.array() > report.threshold).count());
  return report;
}

// IC estimator: fit at every r = 1..r_max, IC(r) = -M_NT(theta^r) + r P2,
// argmin with ties to the smallest r. A failed fit for some r is recorded
// and that r is excluded from the argmin.
inline SelectionReport select_ic(const Panel& panel, int r_max,
                                 const EstimationConfig& cfg,
                                 const SelectionOptions& opts = {}) {
  detail::check_rmax(panel, r_max);
  const Bandwidth bw =
      cfg.bandwidth_override > 0.0
          ? Bandwidth(cfg.bandwidth_override)
          : estimation_bandwidth(panel.n_series(), panel.n_periods(),
                                 cfg.bandwidth_constant);

  SelectionReport report;
  report.r_max = r_max;
  std::vector<double> objectives(r_max, 0.0);
  report.ic_fit_failed.assign(r_max, false);
  for (int r = 1; r <= r_max; ++r) {
    try {
      FitResult fr = fit(panel, detail::with_factors(cfg, r));
      objectives[r - 1] = fr.objective_value;
      ++report.fit_count;
    } catch (const NumericalError&) {
      report.ic_fit_failed[r - 1] = true;
    }
  }
  if (report.ic_fit_failed[r_max - 1]) return report;  // partial report

  report.penalty = ic_penalty(objectives[r_max - 1], null_objective(panel, bw),
                              panel.n_series(), panel.n_periods(),
                              opts.ic_exponent);
  report.ic_values.assign(r_max, 0.0);
  for (int r = 1; r <= r_max; ++r)
    report.ic_values[r - 1] = -objectives[r - 1] + r * report.penalty;
  for (int r = 1; r <= r_max; ++r) {
    if (report.ic_fit_failed[r - 1]) continue;
    if (report.r_ic < 0 ||
        report.ic_values[r - 1] < report.ic_values[report.r_ic - 1])
      report.r_ic = r;
  }
  return report;
}

// Convenience: both selectors sharing the r_max fit would save one fit, but
// the rank estimator's contract is exactly one fit; keep the passes separate.
inline SelectionReport select_both(const Panel& panel, int r_max,
                                   const EstimationConfig& cfg,
                                   const SelectionOptions& opts = {}) {
  SelectionReport rank = select_rank(panel, r_max, cfg, opts);
  SelectionReport ic = select_ic(panel, r_max, cfg, opts);
  ic.eigenvalues = rank.eigenvalues;
  ic.threshold = rank.threshold;
  ic.r_rank = rank.r_rank;
  ic.fit_count += rank.fit_count;
  return ic;
}

}  // namespace mfa

#endif
