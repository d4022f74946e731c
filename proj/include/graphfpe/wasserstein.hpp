#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <thread>
#include <utility>
#include <vector>

#include "graphfpe/calculus.hpp"
#include "graphfpe/error.hpp"
#include "graphfpe/graph.hpp"

namespace graphfpe {

/// Piecewise-linear curve rho_0 .. rho_K on the open simplex, uniform in t.
struct DiscretePath {
  std::vector<Density> densities;
  double action = 0.0;

  int segments() const { return static_cast<int>(densities.size()) - 1; }
};

namespace detail {

struct SegmentTerms {
  double action = 0.0;
  std::vector<Vector> potentials;  // Phi_k = L^-1(rho_{k+1/2}) (rho_{k+1} - rho_k)
};

/// Midpoint-rule action sum_k dt sigma_k^T L^-1(rho_{k+1/2}) sigma_k on raw points.
inline SegmentTerms segment_terms(const Graph& g, const std::vector<Vector>& pts) {
  const int k_count = static_cast<int>(pts.size()) - 1;
  const double inv_dt = static_cast<double>(k_count);
  SegmentTerms out;
  out.potentials.reserve(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    const Vector& a = pts[static_cast<std::size_t>(k)];
    const Vector& b = pts[static_cast<std::size_t>(k) + 1];
    const Vector diff = b - a;
    const Density mid = Density::normalized(0.5 * (a + b));
    Vector phi = WeightedLaplacian(g, mid).apply_pseudo_inverse(diff);
    out.action += inv_dt * diff.dot(phi);
    out.potentials.push_back(std::move(phi));
  }
  return out;
}

inline bool all_interior(const std::vector<Vector>& pts) {
  return std::all_of(pts.begin(), pts.end(), [](const Vector& p) { return p.minCoeff() > 0.0; });
}

}  // namespace detail

/// Discrete Benamou-Brenier action of a path (midpoint rule, dt = 1/K).
inline double path_action(const Graph& g, const DiscretePath& path) {
  detail::require(path.segments() >= 1, ErrorCode::InvalidArgument, "a path needs at least one segment");
  std::vector<Vector> pts;
  pts.reserve(path.densities.size());
  for (const Density& d : path.densities) {
    detail::require_same_size(g, d.size(), "density size does not match graph");
    detail::require_interior(d, "path_action");
    pts.push_back(d.values());
  }
  return detail::segment_terms(g, pts).action;
}

/// Straight line between the endpoints, interior points blended toward uniform.
inline DiscretePath linear_path(const Graph& g, const Density& rho0, const Density& rho1, int k, double blend = 1e-6) {
  const int n = g.node_count();
  const Vector uniform = Vector::Constant(n, 1.0 / n);
  DiscretePath path;
  for (int s = 0; s <= k; ++s) {
    if (s == 0) {
      path.densities.push_back(rho0);
    } else if (s == k) {
      path.densities.push_back(rho1);
    } else {
      const double t = static_cast<double>(s) / k;
      const Vector p = (1.0 - t) * rho0.values() + t * rho1.values();
      path.densities.push_back(Density::normalized((1.0 - blend) * p + blend * uniform));
    }
  }
  path.action = path_action(g, path);
  return path;
}

struct W2Options {
  int K = 16;
  int max_iters = 5000;
  double grad_tol = 1e-8;
  double step_init = 1.0;
};

struct W2Result {
  double distance;
  DiscretePath path;
  bool converged;
  int iterations;
  double grad_norm;  // projected gradient, max norm
};

/// Discrete 2-Wasserstein distance by minimizing the path action over the free
/// interior points.
///
/// Projected gradient descent: each block of the gradient is re-centered onto the
/// tangent of the simplex; an Armijo backtracking search (halving) also enforces
/// interiority. The first trial step of every search is the Barzilai-Borwein step.
inline W2Result w2_distance(const Graph& g, const Density& rho0, const Density& rho1, const W2Options& options = {}) {
  detail::require_same_size(g, rho0.size(), "density size does not match graph");
  detail::require_same_size(g, rho1.size(), "density size does not match graph");
  detail::require_interior(rho0, "w2_distance");
  detail::require_interior(rho1, "w2_distance");
  detail::require(options.K >= 1, ErrorCode::InvalidArgument, "K must be at least 1");

  const int k_count = options.K;
  if ((rho0.values() - rho1.values()).lpNorm<Eigen::Infinity>() == 0.0) {
    DiscretePath path;
    path.densities.assign(static_cast<std::size_t>(k_count) + 1, rho0);
    return {0.0, std::move(path), true, 0, 0.0};
  }

  const DiscretePath start = linear_path(g, rho0, rho1, k_count);
  std::vector<Vector> x;
  for (const Density& d : start.densities) x.push_back(d.values());

  auto gradient = [&](const std::vector<Vector>& pts, const detail::SegmentTerms& terms) {
    const double inv_dt = static_cast<double>(k_count);
    // Derivative of each segment term with respect to its midpoint density.
    std::vector<Vector> mid_grad;
    mid_grad.reserve(terms.potentials.size());
    for (const Vector& phi : terms.potentials) {
      Vector gm = Vector::Zero(g.node_count());
      for (const Edge& e : g.edges()) {
        const double dphi = phi(e.i) - phi(e.j);
        const double c = -inv_dt * 0.5 * e.weight * dphi * dphi;
        gm(e.i) += c;
        gm(e.j) += c;
      }
      mid_grad.push_back(std::move(gm));
    }
    std::vector<Vector> grad(pts.size(), Vector::Zero(g.node_count()));
    for (int s = 1; s < k_count; ++s) {
      const auto su = static_cast<std::size_t>(s);
      Vector gs = 2.0 * inv_dt * (terms.potentials[su - 1] - terms.potentials[su]) +
                  0.5 * (mid_grad[su - 1] + mid_grad[su]);
      gs.array() -= gs.mean();
      grad[su] = std::move(gs);
    }
    return grad;
  };
  auto max_norm = [&](const std::vector<Vector>& grad) {
    double out = 0.0;
    for (const Vector& v : grad) out = std::max(out, v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0);
    return out;
  };
  auto dot = [&](const std::vector<Vector>& a, const std::vector<Vector>& b) {
    double out = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s) out += a[s].dot(b[s]);
    return out;
  };

  detail::SegmentTerms terms = detail::segment_terms(g, x);
  std::vector<Vector> grad = gradient(x, terms);
  double gnorm = max_norm(grad);
  std::vector<Vector> prev_x, prev_grad;
  int it = 0;
  bool stalled = false;
  while (gnorm > options.grad_tol && it < options.max_iters) {
    ++it;
    double alpha = options.step_init;
    if (!prev_x.empty()) {
      double ss = 0.0, sy = 0.0;
      for (std::size_t s = 0; s < x.size(); ++s) {
        const Vector ds = x[s] - prev_x[s];
        ss += ds.squaredNorm();
        sy += ds.dot(grad[s] - prev_grad[s]);
      }
      if (sy > 0.0 && std::isfinite(ss / sy)) alpha = ss / sy;
    }
    const double gg = dot(grad, grad);
    std::vector<Vector> trial(x.size());
    detail::SegmentTerms trial_terms;
    bool accepted = false;
    while (alpha > 1e-30) {
      for (std::size_t s = 0; s < x.size(); ++s) trial[s] = x[s] - alpha * grad[s];
      if (detail::all_interior(trial)) {
        for (int s = 1; s < k_count; ++s) {
          auto& p = trial[static_cast<std::size_t>(s)];
          p /= p.sum();
        }
        trial_terms = detail::segment_terms(g, trial);
        if (trial_terms.action <= terms.action - 1e-4 * alpha * gg) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      stalled = true;
      break;
    }
    prev_x = std::move(x);
    prev_grad = std::move(grad);
    x = std::move(trial);
    terms = std::move(trial_terms);
    grad = gradient(x, terms);
    gnorm = max_norm(grad);
  }

  DiscretePath path;
  for (const Vector& p : x) path.densities.push_back(Density::normalized(p));
  path.densities.front() = rho0;
  path.densities.back() = rho1;
  path.action = terms.action;
  const bool converged = gnorm <= options.grad_tol && !stalled;
  return {std::sqrt(std::max(terms.action, 0.0)), std::move(path), converged, it, gnorm};
}

struct W2TripleCheck {
  double d_ab, d_ba, d_bc, d_ac;
  bool symmetric;
  bool triangle;
  bool converged;
};

struct W2MetricReport {
  std::vector<W2TripleCheck> triples;
  bool all_pass;
};

struct DensityTriple {
  Density a, b, c;
};

/// Symmetry |d(a,b) - d(b,a)| and triangle d(a,c) <= d(a,b) + d(b,c) checks with
/// relative slack `tol`.
inline W2MetricReport w2_metric_checks(const Graph& g, const std::vector<DensityTriple>& triples,
                                       const W2Options& options = {}, double tol = 1e-3, int jobs = 1) {
  W2MetricReport report{std::vector<W2TripleCheck>(triples.size()), true};
  auto check = [&](std::size_t k) {
    const DensityTriple& t = triples[k];
    W2TripleCheck& c = report.triples[k];
    const W2Result ab = w2_distance(g, t.a, t.b, options);
    const W2Result ba = w2_distance(g, t.b, t.a, options);
    const W2Result bc = w2_distance(g, t.b, t.c, options);
    const W2Result ac = w2_distance(g, t.a, t.c, options);
    c.d_ab = ab.distance;
    c.d_ba = ba.distance;
    c.d_bc = bc.distance;
    c.d_ac = ac.distance;
    c.converged = ab.converged && ba.converged && bc.converged && ac.converged;
    c.symmetric = std::abs(c.d_ab - c.d_ba) <= tol * std::max(c.d_ab, c.d_ba) + 1e-12;
    c.triangle = c.d_ac <= (c.d_ab + c.d_bc) * (1.0 + tol) + 1e-12;
  };
  if (jobs <= 1) {
    for (std::size_t k = 0; k < triples.size(); ++k) check(k);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t k = static_cast<std::size_t>(w); k < triples.size(); k += static_cast<std::size_t>(jobs)) check(k);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& c : report.triples) report.all_pass = report.all_pass && c.symmetric && c.triangle;
  return report;
}

}  // namespace graphfpe
