#ifndef MFA_TESTS_ORACLES_HPP
#define MFA_TESTS_ORACLES_HPP

// Test-only oracles, independent of the library's computation paths: plain
// double-loop summations and brute-force maximizers used to freeze expected
// values.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

namespace oracles {

inline double phi(double u) {
  return 0.3989422804014326779 * std::exp(-0.5 * u * u);
}

inline double kernel_h(double u, double h) { return phi(u / h) / h; }

// Direct double-loop objective.
inline double objective_sum(const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& loadings,
                            const Eigen::MatrixXd& factors, double h) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index t = 0; t < x.cols(); ++t)
      total += kernel_h(x(i, t) - loadings.row(i).dot(factors.row(t)), h);
  return total / static_cast<double>(x.rows() * x.cols());
}

// One-dimensional golden-section maximizer on [lo, hi].
template <typename F>
double golden_max(F f, double lo, double hi, double tol = 1e-10) {
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = f(x1);
    }
  }
  return (lo + hi) / 2.0;
}

// Brute-force maximizer over a scalar coefficient: grid on [lo, hi] at
// `step`, golden refinement around the best cell.
template <typename F>
double grid_max_arg(F f, double lo, double hi, double step) {
  double best_x = lo, best = f(lo);
  for (double x = lo + step; x <= hi + step / 2; x += step) {
    const double v = f(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  return golden_max(f, best_x - step, best_x + step);
}

// Per-series modal objective M_{i,T}(lambda) for a scalar loading.
inline double series_objective_r1(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& f, double lambda,
                                  double h) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < x.size(); ++t)
    total += kernel_h(x(t) - lambda * f(t), h);
  return total / static_cast<double>(x.size());
}

// Rank-1 profile objective: for fixed unit loading direction, each factor
// value maximizes its own column sum, so the factors can be profiled out
// one period at a time.
inline double rank1_profile(const Eigen::MatrixXd& x,
                            const Eigen::VectorXd& lambda, double h,
                            double f_range) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    auto column_value = [&](double f) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        s += kernel_h(x(i, t) - lambda(i) * f, h);
      return s;
    };
    total += column_value(grid_max_arg(column_value, -f_range, f_range, 0.05));
  }
  return total / static_cast<double>(x.rows() * x.cols());
}

// Global maximum of the rank-1 modal objective for an N=3 panel: dense grid
// over the unit sphere of loading directions (factors profiled out), then
// alternating golden refinement in the two angles.
inline double rank1_grid_max(const Eigen::MatrixXd& x, double h) {
  const double f_range = x.cwiseAbs().maxCoeff() * 3.0 + 10.0 * h;
  auto lambda_of = [](double theta, double phi_angle) {
    Eigen::VectorXd l(3);
    l << std::sin(theta) * std::cos(phi_angle),
        std::sin(theta) * std::sin(phi_angle), std::cos(theta);
    return l;
  };
  auto value = [&](double theta, double phi_angle) {
    return rank1_profile(x, lambda_of(theta, phi_angle), h, f_range);
  };

  double best = -1.0, best_theta = 0.0, best_phi = 0.0;
  const double pi = 3.14159265358979323846;
  for (double theta = 0.0; theta <= pi + 1e-9; theta += 0.05) {
    for (double phi_angle = 0.0; phi_angle < 2 * pi; phi_angle += 0.05) {
      const double v = value(theta, phi_angle);
      if (v > best) {
        best = v;
        best_theta = theta;
        best_phi = phi_angle;
      }
    }
  }
  for (int round = 0; round < 4; ++round) {
    best_theta = golden_max(
        [&](double th) { return value(th, best_phi); }, best_theta - 0.06,
        best_theta + 0.06, 1e-7);
    best_phi = golden_max(
        [&](double ph) { return value(best_theta, ph); }, best_phi - 0.06,
        best_phi + 0.06, 1e-7);
  }
  return value(best_theta, best_phi);
}

// Simpson quadrature on [lo, hi].
template <typename F>
double quadrature(F f, double lo, double hi, int intervals = 20000) {
  const double step = (hi - lo) / intervals;
  double total = f(lo) + f(hi);
  for (int k = 1; k < intervals; ++k)
    total += f(lo + k * step) * (k % 2 ? 4.0 : 2.0);
  return total * step / 3.0;
}

}  // namespace oracles

#endif
