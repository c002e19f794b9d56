#ifndef MFA_CORE_HPP
#define MFA_CORE_HPP

// Core data types for modal factor analysis: the observed panel, the
// factor/loading pair, the Gaussian kernel family, the kernel objective,
// the normalization that pins down the rotation, and model-comparison
// metrics.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <utility>

#include "mfa/errors.hpp"

namespace mfa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Observed N x T panel, stored cross-section-major: row i is series i,
// column t is period t.
struct Panel {
  Matrix values;  // N x T

  Panel() = default;
  explicit Panel(Matrix v) : values(std::move(v)) {
    if (values.rows() < 1 || values.cols() < 1)
      throw ShapeError("panel must have at least one series and one period");
    if (!values.allFinite()) throw DataError("panel contains non-finite entries");
  }

  Eigen::Index n_series() const { return values.rows(); }
  Eigen::Index n_periods() const { return values.cols(); }
};

// Loadings (N x r, lambda_i in rows) and factors (T x r, f_t in rows).
struct FactorModel {
  Matrix loadings;  // N x r
  Matrix factors;   // T x r
  bool normalized = false;

  Eigen::Index n_factors() const { return loadings.cols(); }
  Eigen::Index n_series() const { return loadings.rows(); }
  Eigen::Index n_periods() const { return factors.rows(); }
};

struct Bandwidth {
  double h;
  explicit Bandwidth(double value) : h(value) {
    if (!(value > 0.0) || !std::isfinite(value))
      throw ConfigError("bandwidth must be positive and finite");
  }
};

// Diagonal +-1 matrix resolving the sign indeterminacy against a reference.
struct SignAlignment {
  Vector signs;  // entries in {-1, +1}

  Matrix as_matrix() const { return signs.asDiagonal(); }
};

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// Standard normal kernel and its first two derivatives:
//   order 0: phi(u), order 1: -u phi(u), order 2: (u^2 - 1) phi(u).
inline double gaussian_kernel(double u, int order = 0) {
  const double phi = kInvSqrt2Pi * std::exp(-0.5 * u * u);
  switch (order) {
    case 0: return phi;
    case 1: return -u * phi;
    case 2: return (u * u - 1.0) * phi;
    default: throw ConfigError("kernel derivative order must be 0, 1 or 2");
  }
}

// K_h^(j)(u) = h^{-(1+j)} K^(j)(u/h).
inline double scaled_kernel(double u, const Bandwidth& bw, int order = 0) {
  return std::pow(bw.h, -(1 + order)) * gaussian_kernel(u / bw.h, order);
}

inline void check_dims(const Panel& panel, const FactorModel& model) {
  if (model.loadings.rows() != panel.n_series() ||
      model.factors.rows() != panel.n_periods() ||
      model.loadings.cols() != model.factors.cols())
    throw ShapeError("factor model dimensions do not match panel");
}

// Common component matrix, entry (i,t) = lambda_i' f_t.
inline Matrix common_component(const FactorModel& model) {
  return model.loadings * model.factors.transpose();
}

// Kernel objective M_NT = (NT)^{-1} sum_{i,t} K_h(X_it - lambda_i' f_t).
inline double objective(const Panel& panel, const FactorModel& model,
                        const Bandwidth& bw) {
  check_dims(panel, model);
  const Matrix resid = panel.values - common_component(model);
  const double inv_h = 1.0 / bw.h;
  const double n = static_cast<double>(panel.n_series() * panel.n_periods());
  return (kInvSqrt2Pi * inv_h / n) *
         (-0.5 * inv_h * inv_h * resid.array().square()).exp().sum();
}

// Mean squared gap between two common components over all (i,t) cells.
inline double component_distance(const FactorModel& a, const FactorModel& b) {
  if (a.n_series() != b.n_series() || a.n_periods() != b.n_periods())
    throw ShapeError("models compared on different panel dimensions");
  const Matrix diff = common_component(a) - common_component(b);
  return diff.squaredNorm() /
         static_cast<double>(a.n_series() * a.n_periods());
}

// S-hat = sgn(diag(F_hat' F_0)), with sgn(0) = +1.
inline SignAlignment align_sign(const Matrix& estimated_factors,
                                const Matrix& true_factors) {
  if (estimated_factors.rows() != true_factors.rows() ||
      estimated_factors.cols() != true_factors.cols())
    throw ShapeError("sign alignment requires matching factor shapes");
  Vector diag =
      (estimated_factors.transpose() * true_factors).diagonal();
  SignAlignment out;
  out.signs = diag.unaryExpr([](double v) { return v < 0.0 ? -1.0 : 1.0; });
  return out;
}

namespace detail {

// Deterministic sign convention: the largest-|entry| element of each factor
// column is made positive; earliest index wins ties.
inline void fix_column_signs(Matrix& factors, Matrix& loadings) {
  for (Eigen::Index j = 0; j < factors.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index t = 0; t < factors.rows(); ++t) {
      const double mag = std::abs(factors(t, j));
      if (mag > best) {  // strict: earliest index breaks ties
        best = mag;
        arg = t;
      }
    }
    if (factors(arg, j) < 0.0) {
      factors.col(j) = -factors.col(j);
      loadings.col(j) = -loadings.col(j);
    }
  }
}

}  // namespace detail

struct NormalizationCheck {
  double factor_gram_error = 0.0;    // || F'F/T - I ||_inf
  double loading_offdiag = 0.0;      // max |offdiag of Lambda'Lambda/N|
  bool diagonal_nonincreasing = true;
};

inline NormalizationCheck check_normalization(const FactorModel& model) {
  NormalizationCheck out;
  const Matrix fg = model.factors.transpose() * model.factors /
                    static_cast<double>(model.n_periods());
  out.factor_gram_error =
      (fg - Matrix::Identity(fg.rows(), fg.cols())).cwiseAbs().maxCoeff();
  const Matrix lg = model.loadings.transpose() * model.loadings /
                    static_cast<double>(model.n_series());
  for (Eigen::Index i = 0; i < lg.rows(); ++i)
    for (Eigen::Index j = 0; j < lg.cols(); ++j)
      if (i != j)
        out.loading_offdiag = std::max(out.loading_offdiag,
                                       std::abs(lg(i, j)));
  for (Eigen::Index j = 1; j < lg.rows(); ++j)
    if (lg(j, j) > lg(j - 1, j - 1) + 1e-12)
      out.diagonal_nonincreasing = false;
  return out;
}

struct NormalizeResult {
  FactorModel model;
  Matrix transform;  // right-multiplier applied to F
};

// Rotate (Lambda, F) so that F'F/T = I_r and Lambda'Lambda/N is diagonal
// with non-increasing diagonal, preserving Lambda F' exactly:
//   F~ = F (F'F/T)^{-1/2},  Lambda~ = Lambda (F'F/T)^{1/2},
//   eigendecompose Lambda~'Lambda~/N = Q D Q' (D descending),
//   F* = F~ Q,  Lambda* = Lambda~ Q.
inline NormalizeResult normalize(const FactorModel& model) {
  const Eigen::Index r = model.n_factors();
  const double t_count = static_cast<double>(model.n_periods());
  const double n_count = static_cast<double>(model.n_series());

  const Matrix gram = model.factors.transpose() * model.factors / t_count;
  Eigen::SelfAdjointEigenSolver<Matrix> gram_eig(gram);
  const double tiny = 1e-12 * std::max(1.0, gram_eig.eigenvalues().maxCoeff());
  if (gram_eig.eigenvalues().minCoeff() <= tiny)
    throw NumericalError("degenerate factors: F'F/T is rank deficient");

  const Matrix sqrt_gram = gram_eig.operatorSqrt();
  const Matrix inv_sqrt_gram = gram_eig.operatorInverseSqrt();

  Matrix factors = model.factors * inv_sqrt_gram;
  Matrix loadings = model.loadings * sqrt_gram;

  Eigen::SelfAdjointEigenSolver<Matrix> load_eig(
      loadings.transpose() * loadings / n_count);
  // SelfAdjointEigenSolver sorts ascending; flip to descending. Equal
  // eigenvalues keep the solver's (deterministic) ordering reversed, which
  // is stable across runs.
  Matrix rot(r, r);
  for (Eigen::Index j = 0; j < r; ++j)
    rot.col(j) = load_eig.eigenvectors().col(r - 1 - j);

  factors = factors * rot;
  loadings = loadings * rot;
  detail::fix_column_signs(factors, loadings);

  NormalizeResult out;
  out.model = FactorModel{std::move(loadings), std::move(factors), true};
  // Recover the net right-multiplier on F from F* = F T.
  out.transform =
      (model.factors.transpose() * model.factors)
          .ldlt()
          .solve(model.factors.transpose() * out.model.factors);
  return out;
}

}  // namespace mfa

#endif
