#ifndef MFA_ESTIMATOR_HPP
#define MFA_ESTIMATOR_HPP

// AMEM fitting engine: kernel-weighted E-step, weighted least-squares
// M-step, per-series modal-EM inner loop, alternating outer sweeps over the
// loading and factor blocks, and seeded multistart.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>

#include "mfa/core.hpp"
#include "mfa/errors.hpp"

namespace mfa {

struct EstimationConfig {
  double bandwidth_constant = 5.0;
  int n_factors = 1;
  double outer_epsilon = 1e-6;
  int outer_max_sweeps = 200;
  double inner_tol = 1e-8;
  int inner_max_iters = 50;
  int n_starts = 2;
  std::uint64_t seed = 0;
  double bandwidth_override = 0.0;  // > 0 replaces the c * min(N,T)^{-1/7} rule
  std::ostream* progress = nullptr;  // machine-parsable "sweep=<k> obj=<v>" lines

  void validate() const {
    if (!(bandwidth_constant > 0.0)) throw ConfigError("bandwidth constant must be positive");
    if (n_factors < 1) throw ConfigError("number of factors must be at least 1");
    if (!(outer_epsilon > 0.0) || !(inner_tol > 0.0))
      throw ConfigError("tolerances must be positive");
    if (outer_max_sweeps < 1 || inner_max_iters < 1)
      throw ConfigError("iteration limits must be positive");
    if (n_starts < 1) throw ConfigError("need at least one start");
  }
};

struct FitResult {
  FactorModel model;
  double objective_value = 0.0;
  int n_sweeps = 0;
  bool converged = false;
  int start_index = 0;
  bool degenerate_design = false;   // some WLS step fell back to a pseudoinverse
  bool uniform_weight_fallback = false;  // some E-step underflowed entirely
};

// Estimation-rate bandwidth h = c * min(N,T)^{-1/7}.
inline Bandwidth estimation_bandwidth(Eigen::Index n, Eigen::Index t, double c) {
  if (n < 1 || t < 1) throw ConfigError("panel dimensions must be positive");
  if (!(c > 0.0)) throw ConfigError("bandwidth constant must be positive");
  return Bandwidth(c * std::pow(static_cast<double>(std::min(n, t)), -1.0 / 7.0));
}

struct WeightResult {
  Vector weights;
  bool uniform_fallback = false;
};

// Normalized kernel weights over one series' residuals. All-zero kernel
// mass (every residual many bandwidths out) falls back to uniform 1/T.
inline WeightResult estep_weights(const Vector& residuals, const Bandwidth& bw) {
  const double inv_h = 1.0 / bw.h;
  Vector w = (-0.5 * inv_h * inv_h * residuals.array().square()).exp();
  const double total = w.sum();
  const double floor = static_cast<double>(residuals.size()) *
                       std::numeric_limits<double>::min();
  WeightResult out;
  // Vectorized exp clamps instead of flushing to zero, so a total in the
  // denormal range means every residual is many bandwidths out.
  if (total <= floor || !std::isfinite(total)) {
    out.weights = Vector::Constant(residuals.size(),
                                   1.0 / static_cast<double>(residuals.size()));
    out.uniform_fallback = true;
  } else {
    out.weights = w / total;
  }
  return out;
}

struct WlsResult {
  Vector coefficients;
  bool degenerate = false;
};

// argmax of the weighted log-kernel criterion: (F'WF)^{-1} F'W x. A design
// singular beyond a 1e-12 relative cutoff is solved by pseudoinverse.
inline WlsResult mstep_wls(const Vector& x, const Matrix& design,
                           const Vector& weights) {
  const Matrix weighted = weights.asDiagonal() * design;  // T x r
  const Matrix normal = design.transpose() * weighted;    // r x r
  const Vector rhs = design.transpose() * (weights.asDiagonal() * x);

  Eigen::LDLT<Matrix> ldlt(normal);
  WlsResult out;
  // The normal equations are always consistent, so rank deficiency has to
  // be caught through the pivots, not the solve residual.
  const Vector pivots = ldlt.vectorD();
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
      pivots.minCoeff() > 1e-12 * pivots.maxCoeff() && pivots.maxCoeff() > 0.0) {
    out.coefficients = ldlt.solve(rhs);
    if (out.coefficients.allFinite()) return out;
  }
  Eigen::JacobiSVD<Matrix> svd(normal, Eigen::ComputeFullU | Eigen::ComputeFullV);
  svd.setThreshold(1e-12);
  out.coefficients = svd.solve(rhs);
  out.degenerate = true;
  return out;
}

struct MemFlags {
  bool degenerate_design = false;
  bool uniform_fallback = false;
};

// Modal-EM inner loop for one series (or one period, with roles swapped):
// alternate E-step weights and the WLS M-step from coef_init until the
// per-series kernel objective moves by less than inner_tol.
inline Vector mem_solve(const Vector& x, const Matrix& design, Vector coef,
                        const Bandwidth& bw, const EstimationConfig& cfg,
                        MemFlags* flags = nullptr) {
  const double scale = kInvSqrt2Pi / (bw.h * static_cast<double>(x.size()));
  const double inv_h = 1.0 / bw.h;
  Vector residuals = x - design * coef;
  double obj =
      scale * (-0.5 * inv_h * inv_h * residuals.array().square()).exp().sum();
  for (int iter = 0; iter < cfg.inner_max_iters; ++iter) {
    WeightResult w = estep_weights(residuals, bw);
    WlsResult wls = mstep_wls(x, design, w.weights);
    if (flags) {
      flags->uniform_fallback |= w.uniform_fallback;
      flags->degenerate_design |= wls.degenerate;
    }
    residuals = x - design * wls.coefficients;
    const double new_obj =
        scale * (-0.5 * inv_h * inv_h * residuals.array().square()).exp().sum();
    if (new_obj < obj) {
      // The MEM ascent property can only be broken by a degenerate WLS
      // solve or floating-point noise; keep the previous iterate.
      break;
    }
    coef = std::move(wls.coefficients);
    const double delta = new_obj - obj;
    obj = new_obj;
    if (delta < cfg.inner_tol) break;
  }
  return coef;
}

// One alternating sweep: update all N loadings against the current factors,
// then all T factors against the updated loadings (Gauss-Seidel order).
inline FactorModel sweep(const Panel& panel, FactorModel model,
                         const Bandwidth& bw, const EstimationConfig& cfg,
                         MemFlags* flags = nullptr) {
  check_dims(panel, model);
  for (Eigen::Index i = 0; i < panel.n_series(); ++i) {
    model.loadings.row(i) =
        mem_solve(panel.values.row(i).transpose(), model.factors,
                  model.loadings.row(i).transpose(), bw, cfg, flags)
            .transpose();
  }
  for (Eigen::Index t = 0; t < panel.n_periods(); ++t) {
    model.factors.row(t) =
        mem_solve(panel.values.col(t), model.loadings,
                  model.factors.row(t).transpose(), bw, cfg, flags)
            .transpose();
  }
  model.normalized = false;
  return model;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream seed for a sub-task, decorrelated from the parent seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 1));
}

inline Matrix random_normal(Eigen::Index rows, Eigen::Index cols,
                            std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
  return out;
}

// Random start: i.i.d. standard normal entries, factor block rescaled so
// that F'F/T = I_r.
inline FactorModel random_start(Eigen::Index n, Eigen::Index t, int r,
                                std::mt19937_64& rng) {
  FactorModel model;
  model.loadings = random_normal(n, r, rng);
  Matrix factors = random_normal(t, r, rng);
  const Matrix gram = factors.transpose() * factors / static_cast<double>(t);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  model.factors = factors * eig.operatorInverseSqrt();
  return model;
}

}  // namespace detail

// Full AMEM estimator: multistart alternating sweeps, stopping when the
// panel objective moves by less than outer_epsilon, winner by highest final
// objective (ties to the lowest start index), final model normalized.
inline FitResult fit(const Panel& panel, const EstimationConfig& cfg) {
  cfg.validate();
  if (cfg.n_factors > std::min(panel.n_series(), panel.n_periods()))
    throw ConfigError("number of factors exceeds min(N,T)");
  const Bandwidth bw =
      cfg.bandwidth_override > 0.0
          ? Bandwidth(cfg.bandwidth_override)
          : estimation_bandwidth(panel.n_series(), panel.n_periods(),
                                 cfg.bandwidth_constant);

  FitResult best;
  bool have_best = false;
  for (int start = 0; start < cfg.n_starts; ++start) {
    std::mt19937_64 rng(detail::derive_seed(cfg.seed, start));
    FactorModel model = detail::random_start(panel.n_series(), panel.n_periods(),
                                             cfg.n_factors, rng);
    MemFlags flags;
    double obj = objective(panel, model, bw);
    bool converged = false;
    bool aborted = false;
    int sweeps = 0;
    while (sweeps < cfg.outer_max_sweeps) {
      model = sweep(panel, std::move(model), bw, cfg, &flags);
      ++sweeps;
      if (!model.loadings.allFinite() || !model.factors.allFinite()) {
        aborted = true;
        break;
      }
      const double new_obj = objective(panel, model, bw);
      if (cfg.progress)
        *cfg.progress << "sweep=" << sweeps << " obj=" << new_obj << '\n';
      const double delta = std::abs(new_obj - obj);
      obj = new_obj;
      if (delta < cfg.outer_epsilon) {
        converged = true;
        break;
      }
    }
    if (aborted) continue;

    FitResult candidate;
    candidate.model = normalize(model).model;
    candidate.objective_value = objective(panel, candidate.model, bw);
    candidate.n_sweeps = sweeps;
    candidate.converged = converged;
    candidate.start_index = start;
    candidate.degenerate_design = flags.degenerate_design;
    candidate.uniform_weight_fallback = flags.uniform_fallback;
    if (!have_best || candidate.objective_value > best.objective_value) {
      best = std::move(candidate);
      have_best = true;
    }
  }
  if (!have_best)
    throw NumericalError("all AMEM starts diverged to non-finite iterates");
  return best;
}

}  // namespace mfa

#endif
