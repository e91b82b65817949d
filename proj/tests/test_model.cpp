#include <gtest/gtest.h>

#include <random>

#include "ness/dynamics.hpp"
#include "ness/model.hpp"

using namespace ness;

namespace {

const auto harmonic = PolynomialPotential::harmonic();

std::vector<double> random_vector(std::mt19937_64& gen, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

}  // namespace

TEST(BuildChain, Structure) {
  const auto c = build_chain(3, harmonic, harmonic, 1.0, 1.0, 1.0, 1.0);
  EXPECT_EQ(c.vertex_count(), 3u);
  EXPECT_EQ(c.aux_count(), 2u);
  EXPECT_EQ(c.topology().edges().size(), 2u);
  EXPECT_EQ(c.topology().attachments()[0].vertex, 0u);
  EXPECT_EQ(c.topology().attachments()[1].vertex, 2u);
  EXPECT_TRUE(c.warnings().empty());
}

TEST(BuildChain, SingleSiteHasTwoAuxVariables) {
  const auto c = build_chain(1, harmonic, harmonic, 1.0, 2.0, 1.0, 1.0);
  EXPECT_EQ(c.aux_count(), 2u);
  EXPECT_EQ(SystemState::zeros(c).r.size(), 2u);
  EXPECT_TRUE(c.topology().edges().empty());
}

TEST(BuildChain, QuarticPairQuadraticOnsiteIsWarningFree) {
  const auto c = build_chain(4, harmonic, PolynomialPotential::quartic(0.0, 1.0), 1.0, 1.0, 1.0, 1.0);
  EXPECT_TRUE(c.warnings().empty());
  const auto breather = build_chain(4, PolynomialPotential::quartic(0.0, 1.0), harmonic, 1.0, 1.0, 1.0, 1.0);
  EXPECT_FALSE(breather.warnings().empty());
}

TEST(BuildChain, Errors) {
  EXPECT_THROW(build_chain(0, harmonic, harmonic, 1.0, 1.0, 1.0, 1.0), ConfigError);
  EXPECT_THROW(build_chain(3, harmonic, harmonic, -1.0, 1.0, 1.0, 1.0), ConfigError);
  EXPECT_THROW(build_chain(3, harmonic, harmonic, 1.0, 1.0, 1.0, 0.0), ConfigError);
}

TEST(BuildHypercube, Structure) {
  const auto line = build_hypercube(1, 1, harmonic, harmonic, 1.0, 1.0, 1.0);
  EXPECT_EQ(line.vertex_count(), 3u);
  EXPECT_EQ(line.topology().attachments().size(), 2u);
  EXPECT_EQ(line.topology().attachments()[0].vertex, 0u);
  EXPECT_EQ(line.topology().attachments()[1].vertex, 2u);
  EXPECT_EQ(line.aux_count(), 0u);

  const auto grid = build_hypercube(1, 2, harmonic, harmonic, 2.0, 1.0, 1.0);
  EXPECT_EQ(grid.vertex_count(), 9u);
  EXPECT_EQ(grid.topology().edges().size(), 12u);
  std::size_t left = 0, right = 0;
  for (const auto& a : grid.topology().attachments()) (a.reservoir == 0 ? left : right)++;
  EXPECT_EQ(left, 3u);
  EXPECT_EQ(right, 3u);
  EXPECT_EQ(grid.topology().layer_count(), 3u);

  const auto eq = build_hypercube(2, 1, harmonic, harmonic, 1.5, 1.5, 1.0);
  EXPECT_TRUE(eq.equilibrium());

  EXPECT_THROW(build_hypercube(10, 6, harmonic, harmonic, 1.0, 1.0, 1.0), ConfigError);
}

TEST(BuildGraph, DiamondAndErrors) {
  const ReservoirSpec bath{1.0, 1.0, 1.0, ReservoirKind::langevin};
  const auto d = build_graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}}, {{0, bath}, {2, bath}}, harmonic, harmonic);
  EXPECT_EQ(d.vertex_count(), 4u);
  EXPECT_TRUE(d.topology().connected());
  EXPECT_THROW(build_graph(4, {{0, 1}}, {{7, bath}}, harmonic, harmonic), ConfigError);
  EXPECT_THROW(build_graph(2, {{0, 0}}, {{0, bath}}, harmonic, harmonic), ConfigError);
  EXPECT_THROW(build_graph(2, {{0, 1}, {0, 1}}, {{0, bath}}, harmonic, harmonic), ConfigError);
  EXPECT_THROW(build_graph(2, {{0, 1}}, {}, harmonic, harmonic), ConfigError);

  const auto split = build_graph(4, {{0, 1}, {2, 3}}, {{0, bath}}, harmonic, harmonic);
  EXPECT_FALSE(split.topology().connected());
  EXPECT_FALSE(split.warnings().empty());
}

TEST(BuildGraph, SingleVertexLangevinOscillator) {
  const auto c = build_graph(1, {}, {{0, {1.0, 0.5, 0.5, ReservoirKind::langevin}}}, harmonic, harmonic);
  EXPECT_EQ(c.vertex_count(), 1u);
  EXPECT_EQ(c.aux_count(), 0u);
  SystemState s = SystemState::zeros(c);
  s.p = {2.0};
  s.q = {1.0};
  const auto v = drift(c, s);
  EXPECT_DOUBLE_EQ(v.dq[0], 2.0);
  EXPECT_DOUBLE_EQ(v.dp[0], -1.0 - 0.5 * 2.0);
}

TEST(BuildGraph, PathGraphMatchesLangevinChainDrift) {
  const auto pair = PolynomialPotential::quartic(1.0, 0.5);
  const auto onsite = PolynomialPotential::quartic(0.5, 0.25);
  const auto cube = build_hypercube(2, 1, onsite, pair, 2.0, 1.0, 0.7);  // 5-site langevin chain
  const auto path = build_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}},
                                {{0, {2.0, 0.7, 0.7, ReservoirKind::langevin}}, {4, {1.0, 0.7, 0.7, ReservoirKind::langevin}}},
                                onsite, pair);
  std::mt19937_64 gen(11);
  for (int k = 0; k < 100; ++k) {
    SystemState s = SystemState::zeros(path);
    s.p = random_vector(gen, 5);
    s.q = random_vector(gen, 5);
    const auto a = drift(cube, s), b = drift(path, s);
    EXPECT_EQ(a.dq, b.dq);
    EXPECT_EQ(a.dp, b.dp);
  }
}

TEST(PotentialEnergy, Examples) {
  const auto c = build_chain(2, harmonic, harmonic, 1.0, 1.0, 1.0, 1.0);
  std::vector<double> q{0.0, 0.0};
  EXPECT_EQ(potential_energy(c, q), 0.0);
  q = {1.0, -1.0};
  EXPECT_DOUBLE_EQ(potential_energy(c, q), 3.0);
  q = {1.0, 0.0};
  EXPECT_EQ(potential_gradient(c, q), (std::vector<double>{2.0, -1.0}));
  q = {0.0, 0.0};
  EXPECT_EQ(potential_gradient(c, q), (std::vector<double>{0.0, 0.0}));
  EXPECT_THROW(potential_energy(c, std::vector<double>{1.0}), ConfigError);
}

TEST(PotentialEnergy, MatchesTermByTermLoop) {
  const auto u1 = PolynomialPotential(Polynomial({0.3, 0.1, 0.5, 0.0, 0.25}));
  const auto u2 = PolynomialPotential(Polynomial({0.0, 0.2, 1.0, -0.1, 0.5}));
  const auto c = build_graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {1, 3}},
                             {{0, {1.0, 1.0, 1.0, ReservoirKind::langevin}}}, u1, u2);
  std::mt19937_64 gen(3);
  for (int k = 0; k < 100; ++k) {
    const auto q = random_vector(gen, 4, 1.5);
    double v = 0.0;
    for (double x : q) v += 0.3 + 0.1 * x + 0.5 * x * x + 0.25 * x * x * x * x;
    const std::pair<int, int> edges[] = {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {1, 3}};
    for (auto [a, b] : edges) {
      const double d = q[a] - q[b];
      v += 0.2 * d + d * d - 0.1 * d * d * d + 0.5 * d * d * d * d;
    }
    EXPECT_NEAR(potential_energy(c, q), v, 1e-12 * (1.0 + std::abs(v)));
  }
}

TEST(PotentialGradient, MatchesCentralDifferences) {
  const std::vector<PolynomialPotential> shipped{harmonic, PolynomialPotential::quartic(1.0, 1.0),
                                                  PolynomialPotential::quartic(0.0, 1.0),
                                                  PolynomialPotential(Polynomial({0, 0.3, 0.5, -0.2, 0.4}))};
  std::mt19937_64 gen(5);
  for (const auto& u1 : shipped) {
    for (const auto& u2 : shipped) {
      const auto c = build_chain(4, u1, u2, 1.0, 1.0, 1.0, 1.0);
      for (int k = 0; k < 100; ++k) {
        auto q = random_vector(gen, 4);
        const auto g = potential_gradient(c, q);
        const double h = 1e-5;
        for (std::size_t i = 0; i < 4; ++i) {
          auto qp = q, qm = q;
          qp[i] += h;
          qm[i] -= h;
          const double fd = (potential_energy(c, qp) - potential_energy(c, qm)) / (2 * h);
          EXPECT_NEAR(g[i], fd, 1e-6 * std::max(1.0, std::abs(g[i])));
        }
      }
    }
  }
}

TEST(TotalEnergy, Examples) {
  const auto c = build_chain(1, harmonic, harmonic, 1.0, 1.0, 1.0, 1.0);
  SystemState s = SystemState::zeros(c);
  EXPECT_EQ(total_energy_G(c, s), 0.0);
  s.p = {1.0};
  s.r = {1.0, 1.0};
  EXPECT_DOUBLE_EQ(total_energy_G(c, s), 1.5);

  const auto cube = build_hypercube(1, 1, harmonic, harmonic, 1.0, 1.0, 1.0);
  SystemState h = SystemState::zeros(cube);
  h.p = {1.0, 2.0, 0.0};
  EXPECT_DOUBLE_EQ(total_energy_G(cube, h), hamiltonian(cube, h));
}

TEST(State, ShapeAndFiniteness) {
  const auto c = build_chain(2, harmonic, harmonic, 1.0, 1.0, 1.0, 1.0);
  SystemState s = SystemState::zeros(c);
  EXPECT_NO_THROW(s.check_shape(c));
  s.r.pop_back();
  EXPECT_THROW(s.check_shape(c), ConfigError);
  s = SystemState::zeros(c);
  s.p[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(s.finite());
}

TEST(Digest, StableAndSensitive) {
  const auto a = build_chain(3, harmonic, harmonic, 1.0, 2.0, 1.0, 1.0);
  const auto b = build_chain(3, harmonic, harmonic, 1.0, 2.0, 1.0, 1.0);
  const auto c = build_chain(3, harmonic, harmonic, 1.0, 2.5, 1.0, 1.0);
  EXPECT_EQ(config_digest(a), config_digest(b));
  EXPECT_NE(config_digest(a), config_digest(c));
  EXPECT_EQ(config_digest(a).size(), 16u);
}
