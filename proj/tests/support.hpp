#pragma once

// Random instance generators shared by the unit and acceptance tests.

#include <random>
#include <vector>

#include "graphfpe/graphfpe.hpp"

namespace graphfpe::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Random spanning tree plus extra edges with probability p; weights in [0.5, 2].
inline Graph random_graph(Rng& rng, int n, double p = 0.3) {
  std::vector<Edge> edges;
  std::vector<std::vector<bool>> used(n, std::vector<bool>(n, false));
  for (int v = 1; v < n; ++v) {
    const int u = uniform_int(rng, 0, v - 1);
    edges.push_back({u, v, uniform(rng, 0.5, 2.0)});
    used[u][v] = used[v][u] = true;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (!used[i][j] && uniform(rng, 0.0, 1.0) < p) edges.push_back({i, j, uniform(rng, 0.5, 2.0)});
  return Graph(n, edges);
}

inline Density random_density(Rng& rng, int n, double lo = 0.05) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = uniform(rng, lo, 1.0);
  return Density::normalized(v);
}

inline Vector random_vector(Rng& rng, Eigen::Index n, double scale = 1.0) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(rng, -scale, scale);
  return v;
}

/// Symmetric W with entries of size ~scale, random V, beta chosen so that
/// lambda_min(W) + beta >= margin.
inline EnergyModel random_convex_model(Rng& rng, int n, double scale = 0.5, double margin = 0.5) {
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = uniform(rng, -scale, scale);
  const Matrix w = 0.5 * (a + a.transpose());
  const double lmin = symmetric_eigen(w).smallest();
  const double beta = std::max(0.5, margin - lmin);
  return EnergyModel(w, random_vector(rng, n), beta);
}

inline Graph path_graph(int n, double w = 1.0) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, w});
  return Graph(n, edges);
}

inline Graph complete_graph(int n, double w = 1.0) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.push_back({i, j, w});
  return Graph(n, edges);
}

inline Density density(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index k = 0;
  for (double x : values) v(k++) = x;
  return Density(v);
}

}  // namespace graphfpe::testing
