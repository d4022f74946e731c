#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "graphfpe/calculus.hpp"
#include "graphfpe/dynamics.hpp"
#include "graphfpe/error.hpp"
#include "graphfpe/free_energy.hpp"
#include "graphfpe/graph.hpp"
#include "graphfpe/spectrum.hpp"

namespace graphfpe {

// ---------------------------------------------------------------------------
// Relative entropy and relative Fisher information
// ---------------------------------------------------------------------------

/// H(rho | rho_inf) = F(rho) - F(rho_inf).
///
/// Evaluated through the identity (valid whenever sum(rho - rho_inf) = 0)
///   F(rho) - F(rho_inf) = 1/2 d^T W d + (F(rho_inf) - c)^T d + beta sum rho_inf_i phi(rho_i / rho_inf_i)
/// with d = rho - rho_inf, c the mean of F(rho_inf) and phi(x) = x log x - x + 1,
/// which keeps full relative accuracy as rho approaches rho_inf.
inline double relative_entropy(const EnergyModel& model, const Density& rho, const Density& rho_inf) {
  detail::require_model_size(model, rho.size());
  detail::require_model_size(model, rho_inf.size());
  const Vector& r = rho.values();
  const Vector& q = rho_inf.values();
  if (!rho_inf.interior()) return energy(model, rho) - energy(model, rho_inf);

  const Vector d = r - q;
  Vector linear = model.W() * q + model.V() + model.beta() * q.array().log().matrix();
  linear.array() -= linear.mean();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (r(i) == 0.0) {
      kl += q(i);
      continue;
    }
    const double e = d(i) / q(i);  // x - 1
    kl += q(i) * ((1.0 + e) * std::log1p(e) - e);
  }
  return 0.5 * d.dot(model.W() * d) + linear.dot(d) + model.beta() * kl;
}

/// I(rho | rho_inf) = F^T L(rho) F, evaluated as the edge sum
/// sum_e w_e theta_e (F_i - F_j)^2 with F_i - F_j formed without cancellation.
inline double relative_fisher(const EnergyModel& model, const Graph& g, const Density& rho) {
  detail::require_model_size(model, rho.size());
  detail::require_same_size(g, rho.size(), "density size does not match graph");
  detail::require_interior(rho, "relative_fisher");
  const Vector& r = rho.values();
  const Vector drift = model.W() * r + model.V();
  double sum = 0.0;
  for (const Edge& e : g.edges()) {
    const double df = drift(e.i) - drift(e.j) + model.beta() * std::log1p((r(e.i) - r(e.j)) / r(e.j));
    sum += e.weight * detail::theta_average(r(e.i), r(e.j)) * df * df;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Explicit global rate
// ---------------------------------------------------------------------------

struct RateReport {
  double m;                // floor of the invariant region
  double lambda_sec_hat;   // second eigenvalue of the combinatorial Laplacian
  double lambda_max_hat;
  double lambda_min_hess;  // lambda_min(W) + beta
  double hess_norm1;       // ||W||_1 + beta / m, the Hessian 1-norm bound on the invariant region
  double delta_F;          // F(rho0) - F(rho_inf)
  double C1, C2, C3;
  double r;
  double C;
  double x_star;           // maximizer of min{C1 x, C2 - C3 sqrt(x)}
  double maxmin_rate;      // C1 x_star >= C
  int max_degree;
  double max_weight;
  Density rho_inf;
  double energy_inf;
};

struct RateOptions {
  GibbsOptions gibbs{};
  double consistency_tolerance = 1e-9;
};

/// Exponential entropy-decay constant C and every ingredient of it.
///
/// lambda_min(Hess F) uses the global bound lambda_min(W) + beta; ||Hess F||_1 is
/// bounded on the invariant region {rho_i >= m} by ||W||_1 + beta/m (the supremum
/// over the whole simplex is infinite).
inline RateReport rate_constants(const EnergyModel& model, const Graph& g, const Density& rho0,
                                 const RateOptions& options = {}) {
  detail::require_model_size(model, rho0.size());
  detail::require_same_size(g, rho0.size(), "density size does not match graph");
  detail::require_interior(rho0, "rate_constants");
  const ConvexityCertificate cert = convexity_certificate(model);
  if (!cert.certified_convex) detail::fail(ErrorCode::NotCertifiedConvex, "lambda_min(W) + beta <= 0");

  const GibbsResult gibbs = gibbs_fixed_point(model, Density::uniform(g.node_count()), options.gibbs);
  const SymmetricSpectrum lhat = symmetric_eigen(graph_laplacian(g));
  const double m = invariant_region(model, g, rho0).m;

  RateReport rep{.m = m,
                 .lambda_sec_hat = lhat.second_smallest(),
                 .lambda_max_hat = lhat.largest(),
                 .lambda_min_hess = cert.lambda_min_bound,
                 .hess_norm1 = model.W().cwiseAbs().colwise().sum().maxCoeff() + model.beta() / m,
                 .delta_F = relative_entropy(model, rho0, gibbs.density),
                 .C1 = 0, .C2 = 0, .C3 = 0, .r = 0, .C = 0, .x_star = 0, .maxmin_rate = 0,
                 .max_degree = g.max_degree(),
                 .max_weight = g.max_weight(),
                 .rho_inf = gibbs.density,
                 .energy_inf = energy(model, gibbs.density)};

  const double deg_w = rep.max_degree * rep.max_weight;
  rep.C2 = 2.0 * m * rep.lambda_sec_hat * rep.lambda_min_hess;
  rep.C1 = rep.C2 / rep.delta_F;
  rep.C3 = 2.0 * std::sqrt(2.0) * deg_w * rep.hess_norm1 / std::sqrt(rep.lambda_min_hess) * (1.0 - m) / m *
           rep.lambda_max_hat / rep.lambda_sec_hat;
  rep.r = std::sqrt(2.0) * deg_w * rep.hess_norm1 / std::pow(rep.lambda_min_hess, 1.5) * (1.0 - m) / (m * m) *
          rep.lambda_max_hat / (rep.lambda_sec_hat * rep.lambda_sec_hat) * std::sqrt(rep.delta_F);
  rep.C = rep.C2 / ((rep.r + 1.0) * (rep.r + 1.0));

  // sqrt(x*) = (-C3 + sqrt(C3^2 + 4 C1 C2)) / (2 C1), rationalized.
  const double sqrt_x = 2.0 * rep.C2 / (rep.C3 + std::sqrt(rep.C3 * rep.C3 + 4.0 * rep.C1 * rep.C2));
  rep.x_star = sqrt_x * sqrt_x;
  rep.maxmin_rate = rep.C1 * rep.x_star;

  const double r_alt = rep.C3 / std::sqrt(rep.C1 * rep.C2);
  const double c_alt = rep.C2 / ((r_alt + 1.0) * (r_alt + 1.0));
  const double tol = options.consistency_tolerance;
  if (std::abs(rep.r - r_alt) > tol * rep.r || std::abs(rep.C - c_alt) > tol * rep.C ||
      rep.C > rep.maxmin_rate * (1.0 + tol)) {
    detail::fail(ErrorCode::InvalidArgument, "rate constants failed their internal consistency check");
  }
  return rep;
}

struct DecayCheck {
  bool holds;
  double max_violation;  // worst (F(t) - F_inf) / (exp(-C t) delta_F)
};

/// Checks F(rho(t_k)) - F_inf <= exp(-C t_k) delta_F (1 + 1e-9) at every recorded time.
inline DecayCheck verify_decay_bound(const std::vector<double>& times, const std::vector<double>& energies,
                                     double C, double delta_F, double energy_inf) {
  detail::require(times.size() == energies.size(), ErrorCode::DimensionMismatch, "times and energies differ in length");
  DecayCheck out{true, 0.0};
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double gap = energies[k] - energy_inf;
    const double bound = std::exp(-C * times[k]) * delta_F;
    if (gap > bound * (1.0 + 1e-9)) out.holds = false;
    if (bound > 0.0) out.max_violation = std::max(out.max_violation, gap / bound);
    else if (gap > 0.0) out.max_violation = std::numeric_limits<double>::infinity();
  }
  return out;
}

inline DecayCheck verify_decay_bound(const Trajectory& traj, const RateReport& report, double energy_inf) {
  return verify_decay_bound(traj.times, traj.energy, report.C, report.delta_F, energy_inf);
}

// ---------------------------------------------------------------------------
// Local rates
// ---------------------------------------------------------------------------

namespace detail {

/// lambda_sec(L S) for symmetric positive definite S via S^{1/2} L S^{1/2}.
inline double second_eigenvalue_of_product(const Matrix& l, const Matrix& s, ErrorCode not_pd, const char* what) {
  const SymmetricSpectrum ss = symmetric_eigen(s);
  if (!(ss.smallest() > 0.0)) fail(not_pd, what);
  const Matrix root = spectral_function(ss, [](double x) { return std::sqrt(x); });
  const Matrix sym = root * l * root;
  return symmetric_eigen(0.5 * (sym + sym.transpose())).second_smallest();
}

}  // namespace detail

/// lambda = lambda_sec(L(rho_inf) Hess F(rho_inf)); log(F - F_inf) decays like -2 lambda t.
inline double asymptotic_rate(const EnergyModel& model, const Graph& g, const Density& rho_inf) {
  detail::require_interior(rho_inf, "asymptotic_rate");
  const Matrix h = energy_hessian(model, rho_inf);
  return detail::second_eigenvalue_of_product(weighted_laplacian_matrix(g, rho_inf.values()), h,
                                              ErrorCode::NonPositiveHessian, "Hessian is not positive definite");
}

/// min over Phi of Phi^T L H L Phi subject to Phi^T L Phi = 1, at any interior rho.
///
/// Solved on the eigenbasis of L(rho) with the kernel direction removed:
/// Phi = Q_T Lambda^{-1/2} y turns the problem into the smallest eigenvalue of
/// Lambda^{1/2} Q_T^T H Q_T Lambda^{1/2}.
inline double hessian_quadratic_rate(const EnergyModel& model, const Graph& g, const Density& rho) {
  detail::require_interior(rho, "hessian_quadratic_rate");
  const Matrix h = energy_hessian(model, rho);
  const WeightedLaplacian l(g, rho);
  const Eigen::Index n = l.spectrum().size();
  const Matrix qt = l.spectrum().eigenvectors.rightCols(n - 1);
  const Vector root = l.spectrum().eigenvalues.tail(n - 1).cwiseSqrt();
  Matrix reduced = root.asDiagonal() * (qt.transpose() * h * qt) * root.asDiagonal();
  reduced = 0.5 * (reduced + reduced.transpose());
  return symmetric_eigen(reduced).smallest();
}

/// lambda = lambda_sec(L(rho_inf) (JF^T + JF)(rho_inf)) with JF = W + beta diag(1/rho).
inline double fisher_rate(const EnergyModel& model, const Graph& g, const Density& rho_inf) {
  detail::require_model_size(model, rho_inf.size());
  detail::require_interior(rho_inf, "fisher_rate");
  Matrix s = model.W() + model.W().transpose();
  s.diagonal() += 2.0 * model.beta() * rho_inf.values().cwiseInverse();
  return detail::second_eigenvalue_of_product(weighted_laplacian_matrix(g, rho_inf.values()), s,
                                              ErrorCode::NonPositiveSymmetrizedJacobian,
                                              "symmetrized Jacobian is not positive definite");
}

/// Least-squares slope of log(values) against times over the last `fraction`
/// of the samples whose value exceeds `floor`.
inline std::optional<double> tail_log_slope(const std::vector<double>& times, const std::vector<double>& values,
                                            double floor = 1e-11, double fraction = 0.3) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < times.size(); ++k)
    if (values[k] > floor) pts.emplace_back(times[k], std::log(values[k]));
  const std::size_t count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pts.size())));
  if (count < 2) return std::nullopt;
  const std::size_t first = pts.size() - count;
  double st = 0, sy = 0;
  for (std::size_t k = first; k < pts.size(); ++k) {
    st += pts[k].first;
    sy += pts[k].second;
  }
  const double mt = st / static_cast<double>(count), my = sy / static_cast<double>(count);
  double num = 0, den = 0;
  for (std::size_t k = first; k < pts.size(); ++k) {
    num += (pts[k].first - mt) * (pts[k].second - my);
    den += (pts[k].first - mt) * (pts[k].first - mt);
  }
  if (den <= 0.0) return std::nullopt;
  return num / den;
}

// ---------------------------------------------------------------------------
// Log-Sobolev constant
// ---------------------------------------------------------------------------

struct LsiSampler {
  long count = 10000;
  std::uint64_t seed = 1;
  double min_mass = 1e-4;
  int jobs = 1;
};

struct LsiEstimate {
  double lambda_hat;       // min(sample_min, local_limit)
  double sample_min;       // min over retained samples of I / (2 H)
  double local_limit;      // limit of I / (2 H) as rho -> rho_inf
  Density worst_density;   // argmin sample (rho_inf when the local limit is smaller)
  long retained;
  long rejected_min_mass;
  long excluded_small_entropy;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Small counter-based stream; each sample index owns an independent stream, so
/// results do not depend on how samples are split across threads.
class SampleStream {
 public:
  SampleStream(std::uint64_t seed, std::uint64_t index)
      : state_(splitmix64(seed ^ splitmix64(index + 0x632BE59BD9B4E019ULL))) {}

  /// Uniform in (0, 1].
  double uniform() {
    state_ = splitmix64(state_);
    return (static_cast<double>(state_ >> 11) + 1.0) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

/// Attempt-th draw of sample `index`: symmetric Dirichlet(1), i.e. uniform on the simplex.
inline Vector dirichlet_uniform(int n, std::uint64_t seed, std::uint64_t index, std::uint64_t attempt) {
  SampleStream stream(seed, index * 1024 + attempt);
  Vector x(n);
  for (int i = 0; i < n; ++i) x(i) = -std::log(stream.uniform());
  return x / x.sum();
}

}  // namespace detail

/// Draws `count` interior densities from the uniform distribution on the simplex,
/// rejecting those with min_i rho_i < min_mass; sample k is deterministic in (seed, k).
inline std::vector<Density> sample_simplex(int n, const LsiSampler& sampler, long* rejected = nullptr) {
  std::vector<Density> out;
  out.reserve(static_cast<std::size_t>(std::max<long>(sampler.count, 0)));
  long rej = 0;
  for (long k = 0; k < sampler.count; ++k) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      Vector x = detail::dirichlet_uniform(n, sampler.seed, static_cast<std::uint64_t>(k), attempt);
      if (x.minCoeff() >= sampler.min_mass) {
        out.emplace_back(Density::normalized(x));
        break;
      }
      ++rej;
      if (attempt > 100000) detail::fail(ErrorCode::NoValidSamples, "min_mass rejects essentially every sample");
    }
  }
  if (rejected) *rejected = rej;
  return out;
}

/// Estimates the constant lambda in H(rho|rho_inf) <= I(rho|rho_inf) / (2 lambda).
///
/// The sample minimum of I / (2 H) is combined with the local limit at rho_inf,
/// lambda_sec(H^{1/2} L(rho_inf) H^{1/2}), which the ratio approaches as rho -> rho_inf.
/// Samples with H < 1e-12 are excluded. Deterministic for a fixed seed, any `jobs`.
inline LsiEstimate estimate_lsi_constant(const EnergyModel& model, const Graph& g, const Density& rho_inf,
                                         const LsiSampler& sampler) {
  detail::require_model_size(model, rho_inf.size());
  detail::require_interior(rho_inf, "estimate_lsi_constant");
  detail::require(sampler.count > 0, ErrorCode::InvalidArgument, "sample count must be positive");
  long rejected = 0;
  const std::vector<Density> samples = sample_simplex(g.node_count(), sampler, &rejected);

  const std::size_t total = samples.size();
  const int jobs = std::max(1, sampler.jobs);
  std::vector<double> ratio(total, std::numeric_limits<double>::infinity());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const double h = relative_entropy(model, samples[k], rho_inf);
      if (h < 1e-12) continue;
      ratio[k] = relative_fisher(model, g, samples[k]) / (2.0 * h);
    }
  };
  if (jobs == 1) {
    work(0, total);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (total + static_cast<std::size_t>(jobs) - 1) / static_cast<std::size_t>(jobs);
    for (std::size_t b = 0; b < total; b += chunk) pool.emplace_back(work, b, std::min(total, b + chunk));
    for (auto& t : pool) t.join();
  }

  long excluded = 0;
  std::size_t best = total;
  for (std::size_t k = 0; k < total; ++k) {
    if (!std::isfinite(ratio[k])) {
      ++excluded;
      continue;
    }
    if (best == total || ratio[k] < ratio[best]) best = k;
  }
  if (best == total) detail::fail(ErrorCode::NoValidSamples, "no sample has positive relative entropy");

  const double local = asymptotic_rate(model, g, rho_inf);
  const double sample_min = ratio[best];
  const bool local_wins = local < sample_min;
  return {std::min(local, sample_min),
          sample_min,
          local,
          local_wins ? rho_inf : samples[best],
          static_cast<long>(total) - excluded,
          rejected,
          excluded};
}

}  // namespace graphfpe
