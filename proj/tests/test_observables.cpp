#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "ness/dynamics.hpp"
#include "ness/observables.hpp"

using namespace ness;

namespace {

const auto harmonic = PolynomialPotential::harmonic();
const auto quartic = PolynomialPotential::quartic(1.0, 1.0);

SystemState random_state(const SystemConfig& c, std::mt19937_64& gen) {
  std::normal_distribution<double> d;
  SystemState s = SystemState::zeros(c);
  for (auto* v : {&s.p, &s.q, &s.r})
    for (double& x : *v) x = d(gen);
  return s;
}

}  // namespace

TEST(LocalEnergies, Examples) {
  const auto c = build_chain(2, harmonic, harmonic, 1.0, 1.0, 1.0, 1.0);
  SystemState s = SystemState::zeros(c);
  EXPECT_EQ(local_energies(c, s), (std::vector<double>{0.0, 0.0}));
  s.q = {1.0, 0.0};
  const auto h = local_energies(c, s);
  EXPECT_DOUBLE_EQ(h[0], 0.5 + 0.25);
  EXPECT_DOUBLE_EQ(h[1], 0.25);
  EXPECT_DOUBLE_EQ(h[0] + h[1], potential_energy(c, s.q));
}

TEST(LocalEnergies, TelescopeToHamiltonian) {
  std::mt19937_64 gen(1);
  const auto chain = build_chain(5, quartic, quartic, 2.0, 1.0, 1.0, 1.0);
  const auto cube = build_hypercube(1, 3, quartic, quartic, 2.0, 1.0, 1.0);
  for (const SystemConfig* c : {&chain, &cube}) {
    for (int k = 0; k < 100; ++k) {
      const auto s = random_state(*c, gen);
      const auto h = local_energies(*c, s);
      const double sum = std::accumulate(h.begin(), h.end(), 0.0);
      EXPECT_NEAR(sum, hamiltonian(*c, s), 1e-12 * (1.0 + std::abs(sum)));
    }
  }
}

TEST(LocalEnergies, RejectsGeneralGraph) {
  const auto g = build_graph(3, {{0, 1}, {1, 2}}, {{0, {1.0, 1.0, 1.0, ReservoirKind::langevin}}}, harmonic, harmonic);
  EXPECT_THROW(local_energies(g, SystemState::zeros(g)), ConfigError);
}

TEST(HeatFlows, Examples) {
  const auto c = build_chain(3, harmonic, harmonic, 2.0, 1.0, 1.0, 1.0);
  SystemState s = SystemState::zeros(c);
  s.q = {0.3, -0.2, 1.0};
  s.r = {0.5, -0.7};
  for (double f : heat_flows(c, s)) EXPECT_EQ(f, 0.0);
  s.p = {3.0, 0.0, 0.0};
  s.r = {2.0, 0.0};
  EXPECT_DOUBLE_EQ(heat_flows(c, s)[0], -6.0);
  EXPECT_EQ(heat_flows(c, s).size(), 4u);
}

TEST(HeatFlows, InteriorPathwiseBalanceUnderStrideRefinement) {
  // Interior sites carry no noise, so dH_i/dt = Phi_{i-1} - Phi_i holds along each path.
  const auto c = build_chain(4, quartic, quartic, 2.0, 1.0, 1.0, 1.0);
  std::vector<std::string> names{"H_2", "H_3", "Phi_1", "Phi_2", "Phi_3"};
  SystemState s0 = SystemState::zeros(c);
  s0.q = {0.4, -0.3, 0.2, 0.1};
  s0.p = {0.1, 0.5, -0.4, 0.2};
  double prev = 0.0;
  for (double dt : {2e-3, 1e-3, 5e-4}) {
    const auto rec = simulate(c, s0, {Scheme::splitting, dt, std::nullopt}, 1.0, 9, names, 1);
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < rec.size(); ++k) {
      for (int i = 0; i < 2; ++i) {
        const auto& h = rec.columns[static_cast<std::size_t>(i)];
        const double dh = (h[k + 1] - h[k - 1]) / (rec.sample_times[k + 1] - rec.sample_times[k - 1]);
        const double balance = rec.columns[2 + i][k] - rec.columns[3 + i][k];
        worst = std::max(worst, std::abs(dh - balance));
      }
    }
    if (prev > 0.0) EXPECT_LT(worst, 0.7 * prev);
    prev = worst;
  }
  EXPECT_LT(prev, 5e-2);
}

TEST(EntropyProduction, Examples) {
  const auto eq = build_chain(3, harmonic, harmonic, 1.5, 1.5, 1.0, 1.0);
  std::mt19937_64 gen(2);
  for (int k = 0; k < 20; ++k) {
    const auto s = random_state(eq, gen);
    for (std::size_t j = 0; j <= 3; ++j) EXPECT_EQ(entropy_production(eq, s, j), 0.0);
  }
  // T_1 = 2, T_n = 1, Phi_0 = 4: (1/T_n - 1/T_1) * 4 = 2
  const auto c = build_chain(3, harmonic, harmonic, 2.0, 1.0, 1.0, 1.0);
  SystemState s = SystemState::zeros(c);
  s.p[0] = 4.0;
  s.r[0] = -1.0;
  EXPECT_DOUBLE_EQ(heat_flows(c, s)[0], 4.0);
  EXPECT_DOUBLE_EQ(entropy_production(c, s, 0), 2.0);
  EXPECT_THROW(entropy_production(build_chain(3, harmonic, harmonic, 0.0, 1.0, 1.0, 1.0), s, 0), std::domain_error);
}

TEST(EntropyProduction, BoundaryAndGraphVariants) {
  const auto c = build_chain(2, harmonic, harmonic, 2.0, 1.0, 1.0, 1.0);
  SystemState s = SystemState::zeros(c);
  s.p = {1.0, 2.0};
  s.r = {-3.0, 0.5};
  const auto phi = heat_flows(c, s);
  EXPECT_DOUBLE_EQ(boundary_entropy_production(c, s), phi[2] / 1.0 - phi[0] / 2.0);

  const auto g = build_graph(2, {{0, 1}}, {{0, {2.0, 0.5, 0.5, ReservoirKind::langevin}}, {1, {1.0, 0.5, 0.5, ReservoirKind::langevin}}},
                             harmonic, harmonic);
  SystemState t = SystemState::zeros(g);
  t.p = {1.0, 2.0};
  EXPECT_DOUBLE_EQ(graph_entropy_production(g, t), 0.5 * (1.0 - 2.0) / 2.0 + 0.5 * (4.0 - 1.0) / 1.0);
}

TEST(TwoTemperatureWeight, ReducesToGibbsAndIdentity) {
  std::mt19937_64 gen(4);
  const auto eq = build_chain(4, quartic, quartic, 1.7, 1.7, 1.0, 1.0);
  const auto c = build_chain(4, quartic, quartic, 2.0, 1.0, 1.0, 1.0);
  EXPECT_EQ(two_temperature_weight(c, SystemState::zeros(c), 2), 0.0);
  for (int k = 0; k < 50; ++k) {
    const auto s = random_state(c, gen);
    for (std::size_t j = 0; j <= 4; ++j) {
      EXPECT_NEAR(two_temperature_weight(eq, s, j), total_energy_G(eq, s) / 1.7, 1e-12 * total_energy_G(eq, s));
      EXPECT_NEAR(std::exp(-two_temperature_weight(eq, s, j)), std::exp(-total_energy_G(eq, s) / 1.7), 1e-13);
    }
    const auto h = local_energies(c, s);
    for (std::size_t j = 0; j < 4; ++j) {
      // R_j - R_{j+1} = (1/T_n - 1/T_1) H_{j+1}
      EXPECT_NEAR(two_temperature_weight(c, s, j) - two_temperature_weight(c, s, j + 1), (1.0 - 0.5) * h[j], 1e-12);
    }
  }
}

TEST(LyapunovWeight, Examples) {
  const auto c = build_chain(3, quartic, quartic, 2.0, 1.0, 1.0, 1.0);
  EXPECT_EQ(lyapunov_weight(c, SystemState::zeros(c), 0.3).value, 1.0);
  std::mt19937_64 gen(6);
  const auto s = random_state(c, gen);
  EXPECT_EQ(lyapunov_weight(c, s, 0.0).value, 1.0);
  const double l1 = lyapunov_weight(c, s, 0.1).log_value, l2 = lyapunov_weight(c, s, 0.2).log_value;
  EXPECT_NEAR(l2, 2.0 * l1, 1e-14 * std::abs(l2));
  EXPECT_TRUE(lyapunov_weight(c, s, 0.25).theta_in_range);
  EXPECT_FALSE(lyapunov_weight(c, s, 0.6).theta_in_range);
  SystemState big = s;
  big.p[0] = 1e4;
  const auto w = lyapunov_weight(c, big, 0.4);
  EXPECT_TRUE(w.overflow);
  EXPECT_TRUE(std::isfinite(w.log_value));
}

TEST(ObservableSet, ParsesNamesAndEvaluates) {
  const auto c = build_chain(3, harmonic, harmonic, 2.0, 1.0, 1.0, 1.0);
  ObservableSet set(c, {"G", "H_1", "Phi_0", "sigma_1", "R_0", "W_theta(0.1)", "p_3", "q_1", "r_2", "sigma_b"});
  std::mt19937_64 gen(8);
  const auto s = random_state(c, gen);
  std::vector<double> out(set.size());
  set.evaluate(s, out);
  EXPECT_DOUBLE_EQ(out[0], total_energy_G(c, s));
  EXPECT_DOUBLE_EQ(out[1], local_energies(c, s)[0]);
  EXPECT_DOUBLE_EQ(out[2], heat_flows(c, s)[0]);
  EXPECT_DOUBLE_EQ(out[3], entropy_production(c, s, 1));
  EXPECT_DOUBLE_EQ(out[4], two_temperature_weight(c, s, 0));
  EXPECT_DOUBLE_EQ(out[5], std::exp(0.1 * total_energy_G(c, s)));
  EXPECT_EQ(out[6], s.p[2]);
  EXPECT_EQ(out[7], s.q[0]);
  EXPECT_EQ(out[8], s.r[1]);
  for (const char* bad : {"H_0", "H_4", "Phi_4", "p_0", "r_3", "W_theta", "W_theta(x)", "foo"}) {
    EXPECT_THROW(parse_observable(bad, c), ConfigError) << bad;
  }
}

TEST(AccumulateEntropy, ConstantAndEquilibrium) {
  std::vector<double> t{0.0, 0.5, 1.0, 1.5}, v{3.0, 3.0, 3.0, 3.0};
  for (const auto& a : accumulate_series(t, v, 1)) EXPECT_DOUBLE_EQ(a.average, 3.0);

  const auto eq = build_chain(3, harmonic, harmonic, 1.0, 1.0, 1.0, 1.0);
  const auto rec = simulate(eq, SystemState::zeros(eq), {}, 5.0, 1, {"sigma_1"}, 5);
  for (const auto& a : accumulate_entropy(rec, 1)) EXPECT_EQ(a.integral, 0.0);

  TrajectoryRecord missing;
  EXPECT_THROW(accumulate_entropy(missing, 2), AnalysisError);
}

TEST(AccumulateEntropy, StrideRefinementConvergesAtQuadratureOrder) {
  const int n = 201;
  std::vector<double> t(n), v(n);
  for (int i = 0; i < n; ++i) {
    t[i] = 0.05 * i;
    v[i] = std::sin(t[i]) + 0.3 * t[i];
  }
  std::vector<double> t2, v2;
  for (int i = 0; i < n; i += 2) {
    t2.push_back(t[i]);
    v2.push_back(v[i]);
  }
  const double exact = 1.0 - std::cos(10.0) + 0.15 * 100.0;
  const double e1 = std::abs(accumulate_series(t, v, 0).back().integral - exact);
  const double e2 = std::abs(accumulate_series(t2, v2, 0).back().integral - exact);
  EXPECT_NEAR(e2 / e1, 4.0, 0.2);
}

TEST(FlowProbe, MatchesHeatFlows) {
  std::mt19937_64 gen(11);
  const auto chain = build_chain(4, quartic, quartic, 2.0, 1.0, 0.7, 1.3);
  const auto cube = build_hypercube(1, 2, quartic, quartic, 2.0, 1.0, 0.5);
  for (const auto* c : {&chain, &cube}) {
    for (int rep = 0; rep < 5; ++rep) {
      const auto s = random_state(*c, gen);
      const auto phi = heat_flows(*c, s);
      for (std::size_t j = 0; j < phi.size(); ++j) EXPECT_NEAR(FlowProbe(*c, j)(s), phi[j], 1e-12) << j;
    }
  }
  EXPECT_THROW(FlowProbe(chain, 5), std::out_of_range);
}
