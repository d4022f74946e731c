#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "graphfpe/error.hpp"
#include "graphfpe/graph.hpp"
#include "graphfpe/spectrum.hpp"

namespace graphfpe {

/// Point of the probability simplex over the nodes.
class Density {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit Density(Vector values) : values_(std::move(values)) {
    detail::require(values_.size() >= 1, ErrorCode::InvalidArgument, "empty density");
    detail::require(values_.allFinite(), ErrorCode::InvalidArgument, "density has non-finite entries");
    detail::require(values_.minCoeff() >= 0.0, ErrorCode::InvalidArgument, "density has negative entries");
    if (std::abs(values_.sum() - 1.0) > kSumTolerance)
      detail::fail(ErrorCode::InvalidArgument, "density does not sum to one");
  }

  /// Rescales a nonnegative vector onto the simplex.
  static Density normalized(const Vector& weights) {
    const double total = weights.sum();
    detail::require(total > 0.0, ErrorCode::InvalidArgument, "cannot normalize a zero vector");
    return Density(weights / total);
  }

  static Density uniform(int n) { return Density(Vector::Constant(n, 1.0 / n)); }

  const Vector& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_(i); }
  double min() const { return values_.minCoeff(); }
  double max() const { return values_.maxCoeff(); }
  bool interior() const { return values_.minCoeff() > 0.0; }

 private:
  Vector values_;
};

/// Zero-sum perturbation of a density (element of the tangent space).
class TangentVector {
 public:
  explicit TangentVector(Vector values) : values_(std::move(values)) {
    const double scale = std::max(1.0, values_.lpNorm<1>());
    if (std::abs(values_.sum()) > 1e-12 * scale)
      detail::fail(ErrorCode::NotZeroSum, "tangent vector entries must sum to zero");
  }

  /// Removes the mean; useful for turning arbitrary vectors into tangents.
  static TangentVector projected(const Vector& v) { return TangentVector((v.array() - v.mean()).matrix()); }

  const Vector& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }

 private:
  Vector values_;
};

/// Node function, defined up to an additive constant.
class Potential {
 public:
  explicit Potential(Vector values) : values_(std::move(values)) {}

  const Vector& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }

  /// Mean-zero representative.
  Potential canonical() const { return Potential((values_.array() - values_.mean()).matrix()); }

 private:
  Vector values_;
};

/// Skew-symmetric edge function. One value per stored edge, read in the edge's
/// stored orientation (i < j); v_ji = -v_ij.
class VectorField {
 public:
  VectorField(Graph graph, Vector values) : graph_(std::move(graph)), values_(std::move(values)) {
    detail::require(values_.size() == static_cast<Eigen::Index>(graph_.edge_count()), ErrorCode::DimensionMismatch,
                    "vector field needs one value per edge");
  }

  static VectorField zero(const Graph& g) { return VectorField(g, Vector::Zero(static_cast<Eigen::Index>(g.edge_count()))); }

  const Graph& graph() const { return graph_; }
  const Vector& values() const { return values_; }

  /// v_ij for an arbitrary ordered pair; zero off the edge set.
  double operator()(int i, int j) const {
    auto e = graph_.edge_index(i, j);
    if (!e) return 0.0;
    const double v = values_(static_cast<Eigen::Index>(*e));
    return i < j ? v : -v;
  }

  VectorField operator+(const VectorField& other) const { return VectorField(graph_, values_ + other.values_); }
  VectorField operator-(const VectorField& other) const { return VectorField(graph_, values_ - other.values_); }

 private:
  Graph graph_;
  Vector values_;
};

enum class ThetaKind { Average };

namespace detail {

inline void require_same_size(const Graph& g, Eigen::Index size, const char* what) {
  if (size != g.node_count()) fail(ErrorCode::DimensionMismatch, what);
}

inline void require_interior(const Density& rho, const char* where) {
  if (!rho.interior()) fail(ErrorCode::BoundaryDensity, std::string(where) + " needs an interior density");
}

inline double theta_average(double a, double b) { return 0.5 * (a + b); }

}  // namespace detail

/// Edge weight theta_ij(rho) = (rho_i + rho_j) / 2.
inline double theta(const Graph& g, const Density& rho, int i, int j) {
  detail::require_same_size(g, rho.size(), "density size does not match graph");
  if (!g.edge_index(i, j)) detail::fail(ErrorCode::NotAnEdge, "theta requested off the edge set");
  return detail::theta_average(rho[i], rho[j]);
}

/// theta per stored edge.
inline Vector edge_thetas(const Graph& g, const Vector& rho) {
  Vector out(static_cast<Eigen::Index>(g.edge_count()));
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const Edge& edge = g.edges()[e];
    out(static_cast<Eigen::Index>(e)) = detail::theta_average(rho(edge.i), rho(edge.j));
  }
  return out;
}

inline VectorField graph_gradient(const Graph& g, const Potential& phi) {
  detail::require_same_size(g, phi.size(), "potential size does not match graph");
  Vector v(static_cast<Eigen::Index>(g.edge_count()));
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const Edge& edge = g.edges()[e];
    v(static_cast<Eigen::Index>(e)) = std::sqrt(edge.weight) * (phi.values()(edge.i) - phi.values()(edge.j));
  }
  return VectorField(g, std::move(v));
}

/// div_G(rho v)_i = -sum_{j in N(i)} sqrt(w_ij) v_ij theta_ij(rho).
inline TangentVector divergence(const Graph& g, const Density& rho, const VectorField& v) {
  detail::require_same_size(g, rho.size(), "density size does not match graph");
  if (!(v.graph() == g)) detail::fail(ErrorCode::GraphMismatch, "vector field lives on another graph");
  Vector out = Vector::Zero(g.node_count());
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const Edge& edge = g.edges()[e];
    const double flux = std::sqrt(edge.weight) * v.values()(static_cast<Eigen::Index>(e)) *
                        detail::theta_average(rho[edge.i], rho[edge.j]);
    out(edge.i) -= flux;  // v_ij
    out(edge.j) += flux;  // v_ji = -v_ij
  }
  return TangentVector(std::move(out));
}

/// (v, w)_rho = 1/2 sum over ordered edge pairs of v_ij w_ij theta_ij, i.e. one
/// full-weight term per undirected edge.
inline double inner_product(const VectorField& v, const VectorField& w, const Density& rho) {
  if (!(v.graph() == w.graph())) detail::fail(ErrorCode::GraphMismatch, "fields live on different graphs");
  const Graph& g = v.graph();
  if (rho.size() != g.node_count()) detail::fail(ErrorCode::GraphMismatch, "density does not match the fields' graph");
  double sum = 0.0;
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const Edge& edge = g.edges()[e];
    const auto k = static_cast<Eigen::Index>(e);
    sum += v.values()(k) * w.values()(k) * detail::theta_average(rho[edge.i], rho[edge.j]);
  }
  return sum;
}

/// Dense D^T Theta(rho) D without the spectral cache. Accepts any vector so that
/// intermediate (not yet normalized) states can be used.
inline Matrix weighted_laplacian_matrix(const Graph& g, const Vector& rho) {
  detail::require_same_size(g, rho.size(), "density size does not match graph");
  const int n = g.node_count();
  Matrix l = Matrix::Zero(n, n);
  for (const Edge& e : g.edges()) {
    const double c = e.weight * detail::theta_average(rho(e.i), rho(e.j));
    l(e.i, e.i) += c;
    l(e.j, e.j) += c;
    l(e.i, e.j) -= c;
    l(e.j, e.i) -= c;
  }
  return l;
}

/// L(rho) = D^T Theta(rho) D with its spectrum cached at construction.
class WeightedLaplacian {
 public:
  WeightedLaplacian(const Graph& g, const Density& rho)
      : graph_(g), density_(rho), matrix_(weighted_laplacian_matrix(g, rho.values())),
        spectrum_(symmetric_eigen(matrix_)) {}

  const Matrix& matrix() const { return matrix_; }
  const Graph& graph() const { return graph_; }
  const Density& density() const { return density_; }
  const SymmetricSpectrum& spectrum() const { return spectrum_; }
  ThetaKind theta_kind() const { return ThetaKind::Average; }

  /// L^-1(rho) sigma on the mean-zero subspace (the kernel eigenpair is dropped).
  Vector apply_pseudo_inverse(const Vector& sigma) const {
    detail::require_interior(density_, "pseudo-inverse");
    const Vector centered = (sigma.array() - sigma.mean()).matrix();
    const Matrix& q = spectrum_.eigenvectors;
    const Eigen::Index n = q.cols();
    const Vector coeffs = q.rightCols(n - 1).transpose() * centered;
    const Vector scaled = coeffs.cwiseQuotient(spectrum_.eigenvalues.tail(n - 1));
    Vector phi = q.rightCols(n - 1) * scaled;
    phi.array() -= phi.mean();
    return phi;
  }

  /// Pseudo-inverse as an explicit matrix.
  Matrix pseudo_inverse() const {
    detail::require_interior(density_, "pseudo-inverse");
    return spectral_kernel_free([](double x) { return 1.0 / x; });
  }

  /// Square root restricted to the range of L(rho).
  Matrix sqrt() const {
    return spectral_kernel_free([](double x) { return std::sqrt(std::max(x, 0.0)); });
  }

 private:
  template <typename Fn>
  Matrix spectral_kernel_free(Fn fn) const {
    const Eigen::Index n = spectrum_.size();
    const Matrix& q = spectrum_.eigenvectors;
    Vector mapped(n - 1);
    for (Eigen::Index k = 1; k < n; ++k) mapped(k - 1) = fn(spectrum_.eigenvalues(k));
    return q.rightCols(n - 1) * mapped.asDiagonal() * q.rightCols(n - 1).transpose();
  }

  Graph graph_;
  Density density_;
  Matrix matrix_;
  SymmetricSpectrum spectrum_;
};

inline WeightedLaplacian weighted_laplacian(const Graph& g, const Density& rho) { return WeightedLaplacian(g, rho); }

/// Unique mean-zero Phi with L(rho) Phi = sigma.
inline Potential solve_potential(const WeightedLaplacian& l, const TangentVector& sigma) {
  detail::require_interior(l.density(), "solve_potential");
  detail::require_same_size(l.graph(), sigma.size(), "tangent vector size does not match graph");
  return Potential(l.apply_pseudo_inverse(sigma.values()));
}

/// Riemannian metric g(s1, s2) = s1^T L^-1(rho) s2.
inline double metric_inner(const WeightedLaplacian& l, const TangentVector& s1, const TangentVector& s2) {
  detail::require_interior(l.density(), "metric_inner");
  return s1.values().dot(l.apply_pseudo_inverse(s2.values()));
}

inline double metric_inner(const Graph& g, const Density& rho, const TangentVector& s1, const TangentVector& s2) {
  detail::require_interior(rho, "metric_inner");
  return metric_inner(WeightedLaplacian(g, rho), s1, s2);
}

struct HodgeDecomposition {
  Potential potential;     // mean-zero Phi
  VectorField remainder;   // u with div_G(rho u) = 0
};

/// v = grad_G Phi + u with div_G(rho u) = 0.
inline HodgeDecomposition hodge_decompose(const Graph& g, const Density& rho, const VectorField& v) {
  detail::require_interior(rho, "hodge_decompose");
  const WeightedLaplacian l(g, rho);
  const TangentVector rhs(-divergence(g, rho, v).values());
  Potential phi = solve_potential(l, rhs);
  VectorField u = v - graph_gradient(g, phi);
  return {std::move(phi), std::move(u)};
}

}  // namespace graphfpe
