#ifndef MFA_BASELINES_HPP
#define MFA_BASELINES_HPP

// PCA factor estimation baseline, the PC_p1 factor-number criterion, and
// the trace-ratio span-closeness metric.

#include <Eigen/Dense>
#include <cmath>

#include "mfa/core.hpp"
#include "mfa/errors.hpp"

namespace mfa {

struct TraceRatio {
  double value = 0.0;
  bool pseudoinverse_used = false;
};

// PCA estimator: F = sqrt(T) x (top-r eigenvectors of X'X), Lambda = X F / T.
// Satisfies F'F/T = I_r by construction; column signs follow the same
// deterministic convention as normalize().
inline FactorModel pca_fit(const Panel& panel, int r) {
  if (r < 1 || r > std::min(panel.n_series(), panel.n_periods()))
    throw ConfigError("number of factors must lie in [1, min(N,T)]");
  const Matrix gram = panel.values.transpose() * panel.values;  // T x T
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);

  const Eigen::Index t = panel.n_periods();
  const double sqrt_t = std::sqrt(static_cast<double>(t));
  Matrix factors(t, r);
  for (int j = 0; j < r; ++j)
    factors.col(j) = sqrt_t * eig.eigenvectors().col(t - 1 - j);

  FactorModel model;
  model.loadings = panel.values * factors / static_cast<double>(t);
  model.factors = std::move(factors);
  detail::fix_column_signs(model.factors, model.loadings);
  model.normalized = true;
  return model;
}

namespace detail {

// PCA residual mean square V(r) = (NT)^-1 || X - Lambda F' ||^2.
inline double pca_residual_ms(const Panel& panel, int r) {
  const FactorModel model = pca_fit(panel, r);
  return (panel.values - common_component(model)).squaredNorm() /
         static_cast<double>(panel.n_series() * panel.n_periods());
}

}  // namespace detail

// Bai-Ng PC_p1: argmin over r of
//   V(r) + r sigma2 ((N+T)/(NT)) ln(NT/(N+T)),  sigma2 = V(r_max).
inline int pcp1_select(const Panel& panel, int r_max) {
  if (r_max < 1 || r_max > std::min(panel.n_series(), panel.n_periods()))
    throw ConfigError("r_max must lie in [1, min(N,T)]");
  const double n = static_cast<double>(panel.n_series());
  const double t = static_cast<double>(panel.n_periods());
  const double penalty_rate = (n + t) / (n * t) * std::log(n * t / (n + t));
  const double sigma2 = detail::pca_residual_ms(panel, r_max);

  int best_r = 1;
  double best = 0.0;
  for (int r = 1; r <= r_max; ++r) {
    const double crit =
        detail::pca_residual_ms(panel, r) + r * sigma2 * penalty_rate;
    if (r == 1 || crit < best) {
      best = crit;
      best_r = r;
    }
  }
  return best_r;
}

// tr[F0' Fhat (Fhat'Fhat)^-1 Fhat' F0] / tr[F0'F0]; depends on the column
// span of Fhat only.
inline TraceRatio trace_ratio(const Matrix& f_hat, const Matrix& f_true) {
  if (f_hat.rows() != f_true.rows())
    throw ShapeError("factor matrices must share the time dimension");
  const double denom = f_true.squaredNorm();
  if (denom == 0.0) throw NumericalError("trace ratio undefined for zero F0");

  const Matrix gram = f_hat.transpose() * f_hat;
  const Matrix cross = f_hat.transpose() * f_true;  // r1 x r0

  TraceRatio out;
  Eigen::LDLT<Matrix> ldlt(gram);
  Matrix solved;
  // cross always lies in the range of gram, so the pivots (not the solve
  // residual) decide whether the LDLT answer is trustworthy.
  const Vector pivots = ldlt.vectorD();
  if (ldlt.info() == Eigen::Success && pivots.maxCoeff() > 0.0 &&
      pivots.minCoeff() > 1e-12 * pivots.maxCoeff()) {
    solved = ldlt.solve(cross);
    out.value = (cross.array() * solved.array()).sum() / denom;
  } else {
    Eigen::JacobiSVD<Matrix> svd(gram, Eigen::ComputeFullU | Eigen::ComputeFullV);
    svd.setThreshold(1e-12);
    solved = svd.solve(cross);
    out.value = (cross.array() * solved.array()).sum() / denom;
    out.pseudoinverse_used = true;
  }
  return out;
}

}  // namespace mfa

#endif
