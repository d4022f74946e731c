#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "graphfpe/calculus.hpp"
#include "graphfpe/error.hpp"
#include "graphfpe/spectrum.hpp"

namespace graphfpe {

/// Free energy F(rho) = 1/2 rho^T W rho + V^T rho + beta sum rho_i log rho_i.
///
/// A model built with `nonsymmetric` keeps W as given; such a model drives the
/// same ODE but has no free energy, and only the Fisher-rate machinery applies.
class EnergyModel {
 public:
  EnergyModel(Matrix w, Vector v, double beta) : EnergyModel(std::move(w), std::move(v), beta, true) {}

  static EnergyModel nonsymmetric(Matrix w, Vector v, double beta) {
    return EnergyModel(std::move(w), std::move(v), beta, false);
  }

  /// W = 0, V = 0.
  static EnergyModel entropy_only(int n, double beta) { return EnergyModel(Matrix::Zero(n, n), Vector::Zero(n), beta); }

  const Matrix& W() const { return w_; }
  const Vector& V() const { return v_; }
  double beta() const { return beta_; }
  bool symmetric() const { return symmetric_; }
  Eigen::Index size() const { return v_.size(); }

  /// M = exp(2 max_{i,j} (|V_i| + |W_ij|)), the constant of the invariant region.
  double M() const {
    double sup = 0.0;
    for (Eigen::Index i = 0; i < v_.size(); ++i)
      for (Eigen::Index j = 0; j < v_.size(); ++j) sup = std::max(sup, std::abs(v_(i)) + std::abs(w_(i, j)));
    return std::exp(2.0 * sup);
  }

 private:
  EnergyModel(Matrix w, Vector v, double beta, bool symmetric)
      : w_(std::move(w)), v_(std::move(v)), beta_(beta), symmetric_(symmetric) {
    detail::require(beta_ > 0.0 && std::isfinite(beta_), ErrorCode::InvalidArgument, "beta must be positive");
    detail::require(w_.rows() == w_.cols() && w_.rows() == v_.size(), ErrorCode::DimensionMismatch,
                    "W must be n x n and V length n");
    detail::require(w_.allFinite() && v_.allFinite(), ErrorCode::InvalidArgument, "W and V must be finite");
    if (symmetric_ && max_abs(w_ - w_.transpose()) > 1e-12 * std::max(1.0, max_abs(w_)))
      detail::fail(ErrorCode::NonSymmetricW, "W must be symmetric (use EnergyModel::nonsymmetric)");
  }

  Matrix w_;
  Vector v_;
  double beta_;
  bool symmetric_;
};

namespace detail {

inline void require_model_size(const EnergyModel& model, Eigen::Index n) {
  if (model.size() != n) fail(ErrorCode::DimensionMismatch, "model dimension does not match density");
}

inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace detail

inline double energy(const EnergyModel& model, const Density& rho) {
  detail::require_model_size(model, rho.size());
  const Vector& r = rho.values();
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) entropy += detail::xlogx(r(i));
  return 0.5 * r.dot(model.W() * r) + model.V().dot(r) + model.beta() * entropy;
}

/// F(rho)_i = (W rho)_i + V_i + beta (log rho_i + 1).
inline Vector energy_gradient(const EnergyModel& model, const Density& rho) {
  detail::require_model_size(model, rho.size());
  detail::require_interior(rho, "energy_gradient");
  const Vector& r = rho.values();
  return model.W() * r + model.V() + model.beta() * (r.array().log() + 1.0).matrix();
}

/// Hess F(rho) = W + beta diag(1 / rho).
inline Matrix energy_hessian(const EnergyModel& model, const Density& rho) {
  detail::require_model_size(model, rho.size());
  detail::require_interior(rho, "energy_hessian");
  Matrix h = model.W();
  h.diagonal() += model.beta() * rho.values().cwiseInverse();
  return h;
}

struct ConvexityCertificate {
  bool certified_convex;
  double lambda_min_bound;  // lambda_min(W) + beta
};

/// Sufficient test: diag(1/rho) >= I on the simplex, so lambda_min(W) + beta > 0
/// implies a positive definite Hessian everywhere. A negative answer is inconclusive.
inline ConvexityCertificate convexity_certificate(const EnergyModel& model) {
  if (!model.symmetric()) detail::fail(ErrorCode::NonSymmetricW, "convexity certificate needs a symmetric W");
  const double bound = symmetric_eigen(model.W()).smallest() + model.beta();
  return {bound > 0.0, bound};
}

struct GibbsResult {
  Density density;
  double normalizer;  // K
  int iterations;
  double residual;    // ||rho - G(rho)||_inf
  bool converged;
};

struct GibbsOptions {
  double tol = 1e-12;
  int max_iter = 100000;
  double damping = 0.5;
};

namespace detail {

struct GibbsMap {
  Vector density;
  double normalizer;
};

/// G(rho)_i = exp(-((W rho)_i + V_i) / beta) / K.
inline GibbsMap gibbs_map(const EnergyModel& model, const Vector& rho) {
  const Vector exponent = -(model.W() * rho + model.V()) / model.beta();
  const double shift = exponent.maxCoeff();
  const Vector weights = (exponent.array() - shift).exp().matrix();
  const double total = weights.sum();
  return {weights / total, total * std::exp(shift)};
}

}  // namespace detail

/// Damped fixed-point iteration rho <- (1 - a) rho + a G(rho); the damping is
/// halved whenever the residual grows.
///
/// Throws IncompleteError<GibbsResult> (NoConvergence) with the last iterate when
/// max_iter is exhausted.
inline GibbsResult gibbs_fixed_point(const EnergyModel& model, const Density& init, const GibbsOptions& options = {}) {
  detail::require_model_size(model, init.size());
  detail::require_interior(init, "gibbs_fixed_point");
  detail::require(options.damping > 0.0 && options.damping <= 1.0, ErrorCode::InvalidArgument,
                  "damping must lie in (0, 1]");
  detail::require(options.tol > 0.0, ErrorCode::InvalidArgument, "tolerance must be positive");

  Vector rho = init.values();
  double alpha = options.damping;
  auto image = detail::gibbs_map(model, rho);
  double residual = (rho - image.density).lpNorm<Eigen::Infinity>();
  int it = 0;
  while (residual > options.tol && it < options.max_iter) {
    ++it;
    Vector next = (1.0 - alpha) * rho + alpha * image.density;
    next /= next.sum();
    auto next_image = detail::gibbs_map(model, next);
    const double next_residual = (next - next_image.density).lpNorm<Eigen::Infinity>();
    if (next_residual > residual && alpha > 1e-6) alpha *= 0.5;
    rho = std::move(next);
    image = std::move(next_image);
    residual = next_residual;
  }
  GibbsResult result{Density::normalized(rho), image.normalizer, it, residual, residual <= options.tol};
  if (!result.converged) {
    throw IncompleteError<GibbsResult>(ErrorCode::NoConvergence,
                                       "Gibbs iteration stopped with residual " + std::to_string(residual), result);
  }
  return result;
}

struct EquilibriumSet {
  std::vector<GibbsResult> equilibria;  // sorted by energy
  int failed_starts = 0;
};

/// Multi-start Gibbs search; results closer than 10 tol in the max norm are merged.
inline EquilibriumSet find_all_equilibria(const EnergyModel& model, const std::vector<Density>& starts,
                                          const GibbsOptions& options = {}) {
  EquilibriumSet out;
  for (const Density& start : starts) {
    try {
      GibbsResult r = gibbs_fixed_point(model, start, options);
      bool duplicate = false;
      for (const GibbsResult& known : out.equilibria) {
        if ((known.density.values() - r.density.values()).lpNorm<Eigen::Infinity>() < 10.0 * options.tol) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) out.equilibria.push_back(std::move(r));
    } catch (const IncompleteError<GibbsResult>&) {
      ++out.failed_starts;
    }
  }
  std::stable_sort(out.equilibria.begin(), out.equilibria.end(), [&](const GibbsResult& a, const GibbsResult& b) {
    return energy(model, a.density) < energy(model, b.density);
  });
  return out;
}

/// Default multi-start set: the uniform density and near-vertex densities.
inline std::vector<Density> default_starts(int n, double corner_mass = 0.9) {
  std::vector<Density> starts{Density::uniform(n)};
  for (int k = 0; k < n; ++k) {
    Vector v = Vector::Constant(n, (1.0 - corner_mass) / (n - 1));
    v(k) = corner_mass;
    starts.push_back(Density::normalized(v));
  }
  return starts;
}

}  // namespace graphfpe
