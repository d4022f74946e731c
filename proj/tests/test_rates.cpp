#include <gtest/gtest.h>

#include "graphfpe/rates.hpp"
#include "support.hpp"

using namespace graphfpe;
using namespace graphfpe::testing;

namespace {

const Graph kTwo(2, {{0, 1, 1.0}});

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(RelativeEntropy, Examples) {
  const EnergyModel model = EnergyModel::entropy_only(2, 1.0);
  EXPECT_EQ(relative_entropy(model, Density::uniform(2), Density::uniform(2)), 0.0);
  EXPECT_NEAR(relative_entropy(model, density({0.9, 0.1}), Density::uniform(2)), 0.368064, 1e-6);
  EXPECT_NEAR(relative_entropy(model, density({0.9, 0.1}), Density::uniform(2)),
              energy(model, density({0.9, 0.1})) - energy(model, Density::uniform(2)), 1e-15);
}

TEST(RelativeEntropy, KullbackLeiblerWhenWIsZero) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = uniform_int(rng, 2, 8);
    const EnergyModel model(Matrix::Zero(n, n), random_vector(rng, n), uniform(rng, 0.5, 2.0));
    // Closed-form Gibbs measure for W = 0.
    const Density inf = Density::normalized((-model.V() / model.beta()).array().exp().matrix());
    const Density rho = random_density(rng, n);
    double kl = 0.0;
    for (int i = 0; i < n; ++i) kl += rho[i] * std::log(rho[i] / inf[i]);
    EXPECT_NEAR(relative_entropy(model, rho, inf), model.beta() * kl, 1e-12);
  }
}

TEST(RelativeFisher, ExamplesAndDissipationIdentity) {
  const EnergyModel model = EnergyModel::entropy_only(2, 1.0);
  EXPECT_EQ(relative_fisher(model, kTwo, Density::uniform(2)), 0.0);
  const double ln9 = std::log(9.0);
  EXPECT_NEAR(relative_fisher(model, kTwo, density({0.9, 0.1})), 0.5 * ln9 * ln9, 1e-14);
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = uniform_int(rng, 2, 8);
    const Graph g = random_graph(rng, n);
    const EnergyModel m = random_convex_model(rng, n);
    const Density rho = random_density(rng, n);
    const double i = relative_fisher(m, g, rho);
    EXPECT_NEAR(i, -dissipation(m, g, rho), 1e-12 * std::max(1.0, i));
  }
}

// Constants frozen from tests/oracles/theorem_constants.py (50-digit mpmath).
TEST(RateConstants, CanonicalTwoNodeMatchesOracle) {
  const RateReport r = rate_constants(EnergyModel::entropy_only(2, 1.0), kTwo, density({0.9, 0.1}));
  EXPECT_LT(rel(r.m, 0.05), 1e-12);
  EXPECT_LT(rel(r.lambda_sec_hat, 2.0), 1e-12);
  EXPECT_LT(rel(r.lambda_max_hat, 2.0), 1e-12);
  EXPECT_LT(rel(r.lambda_min_hess, 1.0), 1e-12);
  EXPECT_LT(rel(r.hess_norm1, 20.0), 1e-12);
  EXPECT_LT(rel(r.delta_F, 0.36806420716849707), 1e-12);
  EXPECT_LT(rel(r.C1, 0.54338345349739884), 1e-9);
  EXPECT_LT(rel(r.C2, 0.2), 1e-9);
  EXPECT_LT(rel(r.C3, 1074.8023074035522), 1e-9);
  EXPECT_LT(rel(r.r, 3260.3211962974132), 1e-9);
  EXPECT_LT(rel(r.C, 1.8803679901416782e-8), 1e-9);
  EXPECT_LT(rel(r.maxmin_rate, 1.8815212993720551e-8), 1e-9);
  EXPECT_EQ(r.max_degree, 1);
}

TEST(RateConstants, OtherStartingPoint) {
  const RateReport r = rate_constants(EnergyModel::entropy_only(2, 1.0), kTwo, density({0.6, 0.4}));
  EXPECT_NEAR(r.m, 1.0 / 6.0, 1e-15);
  for (double x : {r.C1, r.C2, r.C3, r.r, r.C}) {
    EXPECT_TRUE(std::isfinite(x));
    EXPECT_GT(x, 0.0);
  }
}

// C = C2/(r+1)^2 is a closed form of the max-min only up to the cross term; we
// check the exact algebra (r = C3/sqrt(C1 C2)) and that C never exceeds the max-min.
TEST(RateConstants, AlgebraOnRandomConvexModels) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = uniform_int(rng, 2, 6);
    const Graph g = random_graph(rng, n);
    const EnergyModel model = random_convex_model(rng, n);
    const RateReport r = rate_constants(model, g, random_density(rng, n));
    EXPECT_GT(r.C, 0.0);
    EXPECT_LT(rel(r.r, r.C3 / std::sqrt(r.C1 * r.C2)), 1e-12);
    EXPECT_LT(rel(r.C, 2 * r.m * r.lambda_sec_hat * r.lambda_min_hess / ((r.r + 1) * (r.r + 1))), 1e-12);
    EXPECT_LE(r.C, r.maxmin_rate * (1 + 1e-12));
    // x* balances the two branches.
    EXPECT_LT(std::abs(r.C1 * r.x_star - (r.C2 - r.C3 * std::sqrt(r.x_star))), 1e-9 * r.C2);
  }
}

TEST(RateConstants, NonConvexRejected) {
  try {
    rate_constants(EnergyModel(-3.0 * Matrix::Identity(2, 2), Vector::Zero(2), 1.0), kTwo, density({0.9, 0.1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotCertifiedConvex);
  }
}

TEST(DecayBound, HoldsAndDetectsInflatedRate) {
  const EnergyModel model = EnergyModel::entropy_only(2, 1.0);
  const RateReport r = rate_constants(model, kTwo, density({0.9, 0.1}));
  const Trajectory traj = integrate(model, kTwo, density({0.9, 0.1}), 5.0);
  EXPECT_TRUE(verify_decay_bound(traj, r, r.energy_inf).holds);
  RateReport inflated = r;
  inflated.C *= 1e9;
  EXPECT_FALSE(verify_decay_bound(traj, inflated, r.energy_inf).holds);
  const std::vector<double> t{0, 1, 2}, e(3, r.energy_inf);
  EXPECT_TRUE(verify_decay_bound(t, e, r.C, 0.0, r.energy_inf).holds);
}

TEST(LocalRates, AnalyticExamples) {
  EXPECT_NEAR(asymptotic_rate(EnergyModel::entropy_only(2, 1.0), kTwo, Density::uniform(2)), 2.0, 1e-10);
  EXPECT_NEAR(asymptotic_rate(EnergyModel::entropy_only(3, 1.0), complete_graph(3), Density::uniform(3)), 3.0, 1e-10);
  EXPECT_NEAR(fisher_rate(EnergyModel::entropy_only(2, 1.0), kTwo, Density::uniform(2)), 4.0, 1e-10);
  // Tangent direction (1,-1), Phi = (1/2,-1/2): (0.25 (1/0.9 + 10)) / 0.5.
  EXPECT_NEAR(hessian_quadratic_rate(EnergyModel::entropy_only(2, 1.0), kTwo, density({0.9, 0.1})),
              0.5 * (1.0 / 0.9 + 10.0), 1e-12);
}

TEST(LocalRates, RoutesAgreeOnRandomModels) {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = uniform_int(rng, 2, 8);
    const Graph g = random_graph(rng, n);
    const EnergyModel model = random_convex_model(rng, n);
    const Density inf = gibbs_fixed_point(model, Density::uniform(n)).density;
    const double lam = asymptotic_rate(model, g, inf);
    EXPECT_GT(lam, 0.0);
    EXPECT_NEAR(hessian_quadratic_rate(model, g, inf), lam, 1e-10 * std::max(1.0, lam));
    EXPECT_NEAR(fisher_rate(model, g, inf), 2.0 * lam, 1e-10 * std::max(1.0, lam));
    EXPECT_GT(hessian_quadratic_rate(model, g, random_density(rng, n)), 0.0);
  }
}

TEST(LocalRates, IndefiniteHessianRejected) {
  const EnergyModel model(-3.0 * Matrix::Identity(2, 2), Vector::Zero(2), 1.0);
  try {
    asymptotic_rate(model, kTwo, Density::uniform(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveHessian);
  }
  Matrix w(2, 2);
  w << -5, 0, 0, -5;
  try {
    fisher_rate(EnergyModel::nonsymmetric(w, Vector::Zero(2), 1.0), kTwo, Density::uniform(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveSymmetrizedJacobian);
  }
}

TEST(LocalRates, TailSlopeMatchesAsymptoticRate) {
  const EnergyModel model = EnergyModel::entropy_only(2, 1.0);
  const Trajectory traj = integrate(model, kTwo, density({0.9, 0.1}), 8.0);
  std::vector<double> gap;
  for (const Density& d : traj.densities) gap.push_back(relative_entropy(model, d, Density::uniform(2)));
  const auto slope = tail_log_slope(traj.times, gap);
  ASSERT_TRUE(slope.has_value());
  EXPECT_GE(-*slope, 2 * 0.95 * 2.0);
  EXPECT_LE(-*slope, 2 * 1.05 * 2.0);
}

TEST(TailSlope, ExactExponential) {
  std::vector<double> t, v;
  for (int k = 0; k < 50; ++k) {
    t.push_back(0.1 * k);
    v.push_back(3.0 * std::exp(-1.7 * t.back()));
  }
  EXPECT_NEAR(*tail_log_slope(t, v), -1.7, 1e-12);
  EXPECT_FALSE(tail_log_slope({0.0}, {1.0}).has_value());
}

TEST(Sandwich, EigenvalueBoundsOnRandomDensities) {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = uniform_int(rng, 2, 12);
    const Graph g = random_graph(rng, n);
    const Density rho = random_density(rng, n, 0.0);
    const SymmetricSpectrum hat = symmetric_eigen(graph_laplacian(g));
    const WeightedLaplacian l(g, rho);
    const double sec = l.spectrum().second_smallest(), top = l.spectrum().largest();
    EXPECT_LE(hat.second_smallest() * rho.min(), sec + 1e-10);
    EXPECT_LE(top, rho.max() * hat.largest() + 1e-10);
    EXPECT_LE(1.0 / (rho.max() * hat.largest()), 1.0 / top + 1e-10);
    EXPECT_LE(1.0 / sec, 1.0 / (rho.min() * hat.second_smallest()) + 1e-10);
  }
}

TEST(Lsi, DeterministicAndThreadInvariant) {
  const EnergyModel model = EnergyModel::entropy_only(3, 1.0);
  const Graph g = path_graph(3);
  LsiSampler s;
  s.count = 2000;
  s.seed = 42;
  const LsiEstimate a = estimate_lsi_constant(model, g, Density::uniform(3), s);
  const LsiEstimate b = estimate_lsi_constant(model, g, Density::uniform(3), s);
  s.jobs = 4;
  const LsiEstimate c = estimate_lsi_constant(model, g, Density::uniform(3), s);
  EXPECT_EQ(a.lambda_hat, b.lambda_hat);
  EXPECT_EQ(a.lambda_hat, c.lambda_hat);
  EXPECT_EQ(a.worst_density.values(), c.worst_density.values());
  EXPECT_EQ(a.retained, 2000);
  s.seed = 43;
  EXPECT_NE(estimate_lsi_constant(model, g, Density::uniform(3), s).sample_min, a.sample_min);
}

TEST(Lsi, RatioNearEquilibriumApproachesLocalRate) {
  const EnergyModel model = EnergyModel::entropy_only(2, 1.0);
  const Density near = density({0.501, 0.499});
  const double ratio = relative_fisher(model, kTwo, near) / (2 * relative_entropy(model, near, Density::uniform(2)));
  EXPECT_NEAR(ratio, 2.0, 0.04);
}

TEST(Lsi, SamplerRespectsMinMass) {
  LsiSampler s;
  s.count = 500;
  s.min_mass = 0.05;
  long rejected = 0;
  const auto samples = sample_simplex(4, s, &rejected);
  EXPECT_EQ(samples.size(), 500u);
  EXPECT_GT(rejected, 0);
  for (const Density& d : samples) EXPECT_GE(d.min(), 0.05);
  s.min_mass = 0.5;
  try {
    sample_simplex(4, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoValidSamples);
  }
}
