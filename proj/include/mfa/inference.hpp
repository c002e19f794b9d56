#ifndef MFA_INFERENCE_HPP
#define MFA_INFERENCE_HPP

// Sandwich variance estimators for the fitted loadings and factors, and
// normal-approximation confidence intervals for the factor path.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "mfa/core.hpp"
#include "mfa/errors.hpp"
#include "mfa/estimator.hpp"

namespace mfa {

struct SandwichVariance {
  Matrix bread;     // Phi_i (loadings) or Psi_t (factors)
  Matrix meat;      // Sigma_i or Omega_t
  Matrix sandwich;  // bread^-1 * meat * bread^-1
  double scale = 0.0;  // T h^3 for loadings, N h^3 for factors
  bool singular_bread = false;
  bool degenerate_meat = false;    // perfect fit, zero-width intervals
  bool unbalanced_warning = false;  // max(N,T)/min(N,T) > 3
};

// Inference-rate bandwidth h = c * T^{-1/12}.
inline Bandwidth inference_bandwidth(Eigen::Index t, double c) {
  if (t < 1) throw ConfigError("panel dimensions must be positive");
  if (!(c > 0.0)) throw ConfigError("bandwidth constant must be positive");
  return Bandwidth(c * std::pow(static_cast<double>(t), -1.0 / 12.0));
}

namespace detail {

// Shared kernel of the two variance estimators: averages over the index
// set `count` with regressor rows `regressors` (T x r or N x r) and
// residuals matched to those rows.
inline SandwichVariance sandwich_from(const Vector& residuals,
                                      const Matrix& regressors,
                                      const Bandwidth& bw, double scale,
                                      bool unbalanced) {
  const Eigen::Index count = residuals.size();
  const Eigen::Index r = regressors.cols();
  const double h = bw.h;

  Matrix bread = Matrix::Zero(r, r);
  Matrix meat = Matrix::Zero(r, r);
  for (Eigen::Index k = 0; k < count; ++k) {
    const Vector row = regressors.row(k).transpose();
    const Matrix outer = row * row.transpose();
    bread += scaled_kernel(residuals(k), bw, 2) * outer;
    const double k1 = gaussian_kernel(residuals(k) / h, 1);
    meat += (k1 * k1 / h) * outer;
  }
  bread /= static_cast<double>(count);
  meat /= static_cast<double>(count);

  SandwichVariance out;
  out.bread = bread;
  out.meat = meat;
  out.scale = scale;
  out.unbalanced_warning = unbalanced;
  out.degenerate_meat = meat.norm() == 0.0;

  Eigen::FullPivLU<Matrix> lu(bread);
  lu.setThreshold(1e-12);
  if (lu.isInvertible()) {
    const Matrix inv = lu.inverse();
    out.sandwich = inv * meat * inv;
  } else {
    Eigen::JacobiSVD<Matrix> svd(bread,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
    svd.setThreshold(1e-12);
    const Matrix pinv = svd.solve(Matrix::Identity(r, r));
    out.sandwich = pinv * meat * pinv;
    out.singular_bread = true;
  }
  // Symmetrize away roundoff.
  out.sandwich = ((out.sandwich + out.sandwich.transpose()) / 2.0).eval();
  return out;
}

inline bool unbalanced(const Panel& panel) {
  const double big = static_cast<double>(
      std::max(panel.n_series(), panel.n_periods()));
  const double small = static_cast<double>(
      std::min(panel.n_series(), panel.n_periods()));
  return big / small > 3.0;
}

}  // namespace detail

// Phi_i = T^-1 sum_t K_h^(2)(e_it) f_t f_t',
// Sigma_i = (Th)^-1 sum_t [K^(1)(e_it/h)]^2 f_t f_t'.
// Asymptotic covariance of lambda_i is sandwich / (T h^3).
inline SandwichVariance loading_variance(const Panel& panel,
                                         const FitResult& fit,
                                         const Bandwidth& bw,
                                         Eigen::Index series) {
  check_dims(panel, fit.model);
  if (series < 0 || series >= panel.n_series())
    throw ConfigError("series index out of range");
  const Vector residuals =
      panel.values.row(series).transpose() -
      fit.model.factors * fit.model.loadings.row(series).transpose();
  const double scale =
      static_cast<double>(panel.n_periods()) * std::pow(bw.h, 3);
  return detail::sandwich_from(residuals, fit.model.factors, bw, scale,
                               detail::unbalanced(panel));
}

// Mirror of loading_variance with (i, f) and (t, lambda) swapped; the
// covariance of f_t is sandwich / (N h^3).
inline SandwichVariance factor_variance(const Panel& panel,
                                        const FitResult& fit,
                                        const Bandwidth& bw,
                                        Eigen::Index period) {
  check_dims(panel, fit.model);
  if (period < 0 || period >= panel.n_periods())
    throw ConfigError("period index out of range");
  const Vector residuals =
      panel.values.col(period) -
      fit.model.loadings * fit.model.factors.row(period).transpose();
  const double scale =
      static_cast<double>(panel.n_series()) * std::pow(bw.h, 3);
  return detail::sandwich_from(residuals, fit.model.loadings, bw, scale,
                               detail::unbalanced(panel));
}

// Inverse standard normal CDF, Wichura's PPND16 rational approximation
// (absolute error below 1e-9 on (0,1)).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("quantile level must be in (0,1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -value : value;
}

struct Interval {
  double estimate;
  double lower;
  double upper;
};

// Per-coordinate CI for f_t:
//   f_{t,j} +- z_{(1+level)/2} sqrt(sandwich_jj / (N h^3)).
inline std::vector<Interval> factor_ci(const FitResult& fit,
                                       const SandwichVariance& var,
                                       Eigen::Index n, const Bandwidth& bw,
                                       double level, Eigen::Index period) {
  if (!(level > 0.0 && level < 1.0))
    throw ConfigError("confidence level must be in (0,1)");
  if (period < 0 || period >= fit.model.n_periods())
    throw ConfigError("period index out of range");
  const double z = normal_quantile((1.0 + level) / 2.0);
  const double denom = static_cast<double>(n) * std::pow(bw.h, 3);
  std::vector<Interval> out;
  out.reserve(fit.model.n_factors());
  for (Eigen::Index j = 0; j < fit.model.n_factors(); ++j) {
    const double est = fit.model.factors(period, j);
    const double se = std::sqrt(std::max(0.0, var.sandwich(j, j)) / denom);
    out.push_back(Interval{est, est - z * se, est + z * se});
  }
  return out;
}

}  // namespace mfa

#endif
