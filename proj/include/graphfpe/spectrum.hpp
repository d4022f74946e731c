#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "graphfpe/error.hpp"

namespace graphfpe {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Ascending eigenvalues of a symmetric matrix with an orthonormal eigenvector
/// matrix; column k belongs to eigenvalues(k).
struct SymmetricSpectrum {
  Vector eigenvalues;
  Matrix eigenvectors;

  Eigen::Index size() const { return eigenvalues.size(); }
  double smallest() const { return eigenvalues(0); }
  double second_smallest() const { return eigenvalues(1); }
  double largest() const { return eigenvalues(eigenvalues.size() - 1); }
};

struct JacobiOptions {
  int max_sweeps = 100;
  // Off-diagonal Frobenius norm target, relative to ||M||_F.
  double relative_tolerance = 1e-12;
};

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline bool is_symmetric(const Matrix& m, double relative_tolerance = 1e-10) {
  if (m.rows() != m.cols()) return false;
  const double scale = max_abs(m);
  return max_abs(m - m.transpose()) <= relative_tolerance * scale;
}

namespace detail {

inline double off_diagonal_norm(const Matrix& a) {
  double sum = 0.0;
  for (Eigen::Index q = 0; q < a.cols(); ++q)
    for (Eigen::Index p = 0; p < q; ++p) sum += 2.0 * a(p, q) * a(p, q);
  return std::sqrt(sum);
}

}  // namespace detail

/// Full eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps visit the pairs (p, q), p < q, in row-major order, so the output is a
/// deterministic function of the input. Eigenpairs are sorted ascending with a
/// stable sort and each eigenvector is signed so that its largest-magnitude
/// entry (first one on ties) is positive.
inline SymmetricSpectrum symmetric_eigen(const Matrix& m, const JacobiOptions& options = {}) {
  detail::require(m.rows() == m.cols(), ErrorCode::DimensionMismatch, "symmetric_eigen needs a square matrix");
  detail::require(is_symmetric(m, 1e-10), ErrorCode::NotSymmetric, "matrix is not symmetric within 1e-10*max|M|");

  const Eigen::Index n = m.rows();
  Matrix a = 0.5 * (m + m.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double target = options.relative_tolerance * a.norm();

  int sweep = 0;
  while (detail::off_diagonal_norm(a) > target) {
    if (sweep++ >= options.max_sweeps) {
      detail::fail(ErrorCode::NoConvergence, "Jacobi iteration exceeded the sweep cap");
    }
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rutishauser's formulation: t = tan(phi) of the smaller rotation angle.
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });

  SymmetricSpectrum out{Vector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.eigenvalues(k) = a(src, src);
    Vector col = v.col(src);
    Eigen::Index pivot = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (std::abs(col(i)) > std::abs(col(pivot)) + 1e-14) pivot = i;
    if (col(pivot) < 0.0) col = -col;
    out.eigenvectors.col(k) = col;
  }
  return out;
}

/// Q f(Lambda) Q^T for a symmetric matrix given its spectrum.
template <typename Fn>
Matrix spectral_function(const SymmetricSpectrum& spectrum, Fn&& fn) {
  const Eigen::Index n = spectrum.size();
  Vector mapped(n);
  for (Eigen::Index k = 0; k < n; ++k) mapped(k) = fn(spectrum.eigenvalues(k));
  return spectrum.eigenvectors * mapped.asDiagonal() * spectrum.eigenvectors.transpose();
}

}  // namespace graphfpe
