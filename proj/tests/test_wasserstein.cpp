#include <gtest/gtest.h>

#include "graphfpe/wasserstein.hpp"
#include "support.hpp"

using namespace graphfpe;
using namespace graphfpe::testing;

namespace {

const Graph kTwo(2, {{0, 1, 1.0}});

}  // namespace

TEST(PathAction, Examples) {
  for (int k : {1, 4, 16}) {
    DiscretePath path;
    for (int s = 0; s <= k; ++s) {
      const double t = static_cast<double>(s) / k;
      path.densities.push_back(density({0.5 + 0.4 * t, 0.5 - 0.4 * t}));
    }
    EXPECT_NEAR(path_action(kTwo, path), 0.32, 1e-12);
  }
  DiscretePath still;
  still.densities.assign(5, Density::uniform(2));
  EXPECT_EQ(path_action(kTwo, still), 0.0);
}

TEST(PathAction, ReversalInvariant) {
  Rng rng(6);
  const Graph g = complete_graph(4);
  DiscretePath path;
  for (int s = 0; s <= 6; ++s) path.densities.push_back(random_density(rng, 4));
  DiscretePath reversed{{path.densities.rbegin(), path.densities.rend()}, 0.0};
  EXPECT_NEAR(path_action(g, path), path_action(g, reversed), 1e-12 * path_action(g, path));
}

TEST(W2, TwoNodeClosedForm) {
  W2Options opts;
  opts.K = 32;
  const W2Result r = w2_distance(kTwo, Density::uniform(2), density({0.9, 0.1}), opts);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.distance, std::sqrt(2.0) * 0.4, 1e-4 * std::sqrt(2.0) * 0.4);
  const Graph heavy(2, {{0, 1, 4.0}});
  const W2Result h = w2_distance(heavy, Density::uniform(2), density({0.9, 0.1}), opts);
  EXPECT_NEAR(h.distance, std::sqrt(0.5) * 0.4, 1e-4 * std::sqrt(0.5) * 0.4);
  EXPECT_EQ(r.path.densities.front().values(), Density::uniform(2).values());
  EXPECT_EQ(r.path.densities.back().values(), density({0.9, 0.1}).values());
}

TEST(W2, IdenticalEndpoints) {
  const W2Result r = w2_distance(complete_graph(3), Density::uniform(3), Density::uniform(3));
  EXPECT_EQ(r.distance, 0.0);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.path.segments(), 16);
}

TEST(W2, RefinementDoesNotIncreaseAction) {
  double prev = std::numeric_limits<double>::infinity();
  for (int k : {4, 8, 16, 32}) {
    W2Options opts;
    opts.K = k;
    const W2Result r = w2_distance(kTwo, density({0.2, 0.8}), density({0.7, 0.3}), opts);
    EXPECT_LE(r.path.action, prev * (1 + 1e-6));
    prev = r.path.action;
  }
}

TEST(W2, OptimizedActionBelowLinearPath) {
  Rng rng(31);
  const Graph g = complete_graph(3);
  for (int trial = 0; trial < 3; ++trial) {
    const Density a = random_density(rng, 3), b = random_density(rng, 3);
    const W2Result r = w2_distance(g, a, b);
    EXPECT_LE(r.path.action, linear_path(g, a, b, 16).action * (1 + 1e-12));
    EXPECT_NEAR(path_action(g, r.path), r.path.action, 1e-12);
  }
}

TEST(W2, MetricChecksOnTriples) {
  const Graph g2 = kTwo;
  std::vector<DensityTriple> aligned{{density({0.2, 0.8}), density({0.4, 0.6}), density({0.7, 0.3})},
                                     {Density::uniform(2), Density::uniform(2), Density::uniform(2)}};
  const W2MetricReport rep = w2_metric_checks(g2, aligned);
  EXPECT_TRUE(rep.all_pass);
  // Monotone aligned 1-D triple: the triangle inequality is tight.
  const auto& c = rep.triples[0];
  EXPECT_NEAR(c.d_ac, c.d_ab + c.d_bc, 1e-6);
  EXPECT_EQ(rep.triples[1].d_ab, 0.0);
}

TEST(W2, BoundaryEndpointRejected) {
  try {
    w2_distance(kTwo, density({1.0, 0.0}), Density::uniform(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BoundaryDensity);
  }
}

// Vector-field form of the action: among all fields with div(rho v) = -sigma the
// gradient one is minimal, and its energy (v, v)_rho equals sigma^T L^-1 sigma.
TEST(W2, VectorFieldActionReducesToPotentialForm) {
  Rng rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = uniform_int(rng, 3, 7);
    const Graph g = random_graph(rng, n, 0.6);
    const Density rho = random_density(rng, n);
    const TangentVector sigma = TangentVector::projected(random_vector(rng, n));
    const WeightedLaplacian l(g, rho);
    const Potential phi = solve_potential(l, sigma);
    const VectorField grad = graph_gradient(g, phi);
    // div(rho grad phi) = -L phi = -sigma.
    EXPECT_LT((divergence(g, rho, grad).values() + sigma.values()).lpNorm<Eigen::Infinity>(), 1e-10);
    const double potential_form = metric_inner(l, sigma, sigma);
    EXPECT_NEAR(inner_product(grad, grad, rho), potential_form, 1e-10 * potential_form);
    // Any other admissible field is the gradient plus a divergence-free part.
    const VectorField other(g, random_vector(rng, static_cast<Eigen::Index>(g.edge_count())));
    const VectorField u = hodge_decompose(g, rho, other).remainder;
    const VectorField v = grad + u;
    EXPECT_LT((divergence(g, rho, v).values() + sigma.values()).lpNorm<Eigen::Infinity>(), 1e-10);
    EXPECT_GE(inner_product(v, v, rho), potential_form * (1 - 1e-12));
  }
}
