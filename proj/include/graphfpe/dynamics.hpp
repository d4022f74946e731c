#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "graphfpe/calculus.hpp"
#include "graphfpe/error.hpp"
#include "graphfpe/free_energy.hpp"
#include "graphfpe/graph.hpp"

namespace graphfpe {

namespace detail {

/// dRho/dt for a raw state vector. Returns false if any entry is not positive.
inline bool fpe_rhs_raw(const EnergyModel& model, const Graph& g, const Vector& rho, Vector& out) {
  if (!(rho.minCoeff() > 0.0)) return false;
  const Vector drift = model.W() * rho + model.V();
  out.setZero(rho.size());
  for (const Edge& e : g.edges()) {
    // F_j - F_i; the +beta constant in F cancels.
    const double df = drift(e.j) - drift(e.i) + model.beta() * std::log(rho(e.j) / rho(e.i));
    const double flux = e.weight * theta_average(rho(e.i), rho(e.j)) * df;
    out(e.i) += flux;
    out(e.j) -= flux;
  }
  return true;
}

}  // namespace detail

/// Right-hand side of the nonlinear Fokker-Planck system on the graph:
/// drho_i/dt = sum_{j in N(i)} w_ij theta_ij (F_j - F_i) = -(L(rho) F(rho))_i.
inline TangentVector fpe_rhs(const EnergyModel& model, const Graph& g, const Density& rho) {
  detail::require_model_size(model, rho.size());
  detail::require_same_size(g, rho.size(), "density size does not match graph");
  detail::require_interior(rho, "fpe_rhs");
  Vector out;
  detail::fpe_rhs_raw(model, g, rho.values(), out);
  return TangentVector::projected(out);
}

/// dF/dt along the flow: -F^T L(rho) F (never positive).
inline double dissipation(const EnergyModel& model, const Graph& g, const Density& rho) {
  const Vector f = energy_gradient(model, rho);
  return -f.dot(weighted_laplacian_matrix(g, rho.values()) * f);
}

/// Repeller construction: epsilons of the nested constraints and the floor m(rho0)
/// that every coordinate of the trajectory stays above.
struct InvariantRegion {
  std::vector<double> epsilons;  // eps_1 .. eps_n
  double m;
  double M;
};

inline InvariantRegion invariant_region(const EnergyModel& model, const Graph& g, const Density& rho0) {
  detail::require_model_size(model, rho0.size());
  detail::require_same_size(g, rho0.size(), "density size does not match graph");
  detail::require_interior(rho0, "invariant_region");
  const int n = g.node_count();
  const double big_m = model.M();
  const double shrink = 1.0 / (1.0 + std::pow(2.0 * big_m, 1.0 / model.beta()));
  const double base = std::min(shrink, rho0.min());

  InvariantRegion region{{}, 0.0, big_m};
  region.epsilons.reserve(static_cast<std::size_t>(n));
  region.epsilons.push_back(0.5 * base);
  for (int l = 2; l <= n; ++l) region.epsilons.push_back(region.epsilons.back() * shrink);
  region.m = 0.5 * std::pow(shrink, n - 2) * base;
  return region;
}

struct IntegrateOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  int record_every = 1;           // 0: initial and final state only
  bool positivity_guard = true;   // reject steps that fall below m(rho0)/2
  double initial_step = 0.0;      // 0: automatic
};

struct StepStatistics {
  long accepted = 0;
  long rejected_error = 0;
  long rejected_positivity = 0;
  long rejected_energy = 0;
  long rhs_evaluations = 0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Density> densities;
  std::vector<double> energy;       // F(rho(t))
  std::vector<double> dissipation;  // -F^T L(rho) F
  StepStatistics stats;
  double floor = 0.0;               // positivity floor enforced during integration

  std::size_t size() const { return times.size(); }
  const Density& final_density() const { return densities.back(); }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DormandPrince {
  static constexpr std::array<double, 7> c{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
  };
  // Fifth-order weights equal row 6 of a; e = b5 - b4.
  static constexpr std::array<double, 7> e{71.0 / 57600,  0.0,           -71.0 / 16695, 71.0 / 1920,
                                           -17253.0 / 339200, 22.0 / 525, -1.0 / 40};
};

inline void record(Trajectory& traj, const EnergyModel& model, const Graph& g, double t, const Density& rho) {
  traj.times.push_back(t);
  traj.energy.push_back(energy(model, rho));
  traj.dissipation.push_back(dissipation(model, g, rho));
  traj.densities.push_back(rho);
}

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) integration of the graph Fokker-Planck flow.
///
/// A step is rejected (and the step size cut) when the embedded error estimate
/// exceeds tolerance, when any coordinate would drop below the positivity floor
/// max(m(rho0)/2, 1e-14) (or 1e-14 with the guard off), or, for symmetric models,
/// when the free energy would increase by more than abs_tol. Every accepted state
/// is renormalized onto the simplex.
///
/// Throws IncompleteError<Trajectory> (StepSizeUnderflow) with the states recorded
/// so far plus the last accepted state.
inline Trajectory integrate(const EnergyModel& model, const Graph& g, const Density& rho0, double t_end,
                            const IntegrateOptions& options = {}) {
  using DP = detail::DormandPrince;
  detail::require_model_size(model, rho0.size());
  detail::require_same_size(g, rho0.size(), "density size does not match graph");
  detail::require_interior(rho0, "integrate");
  detail::require(t_end > 0.0, ErrorCode::InvalidArgument, "t_end must be positive");
  detail::require(options.record_every >= 0, ErrorCode::InvalidArgument, "record_every must be nonnegative");
  detail::require(options.rel_tol > 0.0 && options.abs_tol > 0.0 && options.max_step > 0.0,
                  ErrorCode::InvalidArgument, "tolerances and max_step must be positive");

  constexpr double kHardFloor = 1e-14;
  Trajectory traj;
  traj.floor = options.positivity_guard ? std::max(0.5 * invariant_region(model, g, rho0).m, kHardFloor) : kHardFloor;
  const bool energy_guard = model.symmetric();

  const Eigen::Index n = rho0.size();
  Vector y = rho0.values();
  double t = 0.0;
  double current_energy = energy(model, rho0);
  detail::record(traj, model, g, t, rho0);

  std::array<Vector, 7> k;
  auto eval = [&](const Vector& state, Vector& out) {
    ++traj.stats.rhs_evaluations;
    return detail::fpe_rhs_raw(model, g, state, out);
  };
  eval(y, k[0]);

  double h = options.initial_step;
  if (!(h > 0.0)) {
    const double slope = k[0].lpNorm<Eigen::Infinity>();
    h = slope > 0.0 ? 0.01 * y.minCoeff() / slope : options.max_step;
    h = std::max(h, 1e-10);
  }
  h = std::min({h, options.max_step, t_end});

  auto fail_underflow = [&](const std::string& why) {
    Trajectory partial = traj;
    if (partial.times.back() != t) detail::record(partial, model, g, t, Density::normalized(y));
    throw IncompleteError<Trajectory>(ErrorCode::StepSizeUnderflow, why + " at t=" + std::to_string(t), partial);
  };

  Vector stage(n);
  Vector y_new(n);
  long since_record = 0;
  bool recorded_last = true;
  while (t < t_end) {
    // Absorb a round-off sliver at the end instead of taking a vanishing final step.
    const bool last = t + h >= t_end - 1e-12 * std::max(1.0, t_end);
    const double step = last ? t_end - t : h;
    if (step < 1e-14 * std::max(1.0, std::abs(t))) fail_underflow("step size underflow");

    bool stages_ok = true;
    for (int s = 1; s < 7 && stages_ok; ++s) {
      stage = y;
      for (int j = 0; j < s; ++j)
        if (DP::a[s][j] != 0.0) stage.noalias() += step * DP::a[s][j] * k[static_cast<std::size_t>(j)];
      if (s == 6) y_new = stage;
      stages_ok = eval(stage, k[static_cast<std::size_t>(s)]);
    }
    if (!stages_ok) {
      ++traj.stats.rejected_positivity;
      h = 0.5 * step;
      continue;
    }

    Vector err = Vector::Zero(n);
    for (std::size_t s = 0; s < 7; ++s)
      if (DP::e[s] != 0.0) err.noalias() += step * DP::e[s] * k[s];
    double err_norm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double scale = options.abs_tol + options.rel_tol * std::max(std::abs(y(i)), std::abs(y_new(i)));
      err_norm = std::max(err_norm, std::abs(err(i)) / scale);
    }
    if (err_norm > 1.0) {
      ++traj.stats.rejected_error;
      h = step * std::max(0.2, 0.9 * std::pow(err_norm, -0.2));
      continue;
    }

    y_new /= y_new.sum();
    if (y_new.minCoeff() < traj.floor) {
      ++traj.stats.rejected_positivity;
      h = 0.5 * step;
      continue;
    }
    const Density next(y_new);
    const double next_energy = energy(model, next);
    if (energy_guard && next_energy > current_energy + options.abs_tol) {
      ++traj.stats.rejected_energy;
      h = 0.5 * step;
      continue;
    }

    // Accept.
    t = last ? t_end : t + step;
    y = y_new;
    current_energy = next_energy;
    ++traj.stats.accepted;
    eval(y, k[0]);
    recorded_last = false;
    if (options.record_every > 0 && ++since_record >= options.record_every) {
      detail::record(traj, model, g, t, next);
      since_record = 0;
      recorded_last = true;
    }
    const double growth = err_norm > 0.0 ? std::min(5.0, 0.9 * std::pow(err_norm, -0.2)) : 5.0;
    h = std::min(step * growth, options.max_step);
  }
  if (!recorded_last) detail::record(traj, model, g, t, Density(y));
  return traj;
}

}  // namespace graphfpe
