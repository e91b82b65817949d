#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ness/analysis.hpp"

using namespace ness;

namespace {

const auto harmonic = PolynomialPotential::harmonic();
const auto quartic = PolynomialPotential::quartic(1.0, 1.0);

std::vector<double> ou_series(double rate, double spacing, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d;
  const double a = std::exp(-rate * spacing), b = std::sqrt(1.0 - a * a);
  std::vector<double> x(n);
  double v = d(gen);
  for (auto& xi : x) xi = v = a * v + b * d(gen);
  return x;
}

std::vector<double> iid(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d;
  std::vector<double> x(n);
  for (auto& xi : x) xi = d(gen);
  return x;
}

/// S_t Brownian with drift m and variance 2m per unit time, so e(alpha) = m alpha (1 - alpha).
EntropySamples gaussian_gc_samples(double m, std::vector<double> times, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d;
  EntropySamples s;
  s.times = times;
  s.integrals.assign(times.size(), std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0, prev = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double h = times[k] - prev;
      acc += m * h + std::sqrt(2.0 * m * h) * d(gen);
      prev = times[k];
      s.integrals[k][i] = acc;
    }
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(SteadyState, IidStandardError) {
  const std::vector<std::vector<double>> runs{iid(200000, 1)};
  const auto e = estimate_mean("x", runs, 1.0, 0.0, 40);
  EXPECT_NEAR(e.se / (1.0 / std::sqrt(200000.0)), 1.0, 0.3);
  EXPECT_NEAR(e.tau_int, 1.0, 0.1);
  EXPECT_FALSE(e.mixing_warning);
  EXPECT_GT(e.se, 0.0);
}

TEST(SteadyState, ShortRecordAndMixingWarning) {
  const std::vector<std::vector<double>> tiny{iid(30, 2)};
  EXPECT_THROW(estimate_mean("x", tiny, 1.0, 0.1, 20), AnalysisError);
  // tau ~ 200 samples, 200 batches of 100
  const std::vector<std::vector<double>> slow{ou_series(0.01, 1.0, 20000, 3)};
  EXPECT_TRUE(estimate_mean("x", slow, 1.0, 0.0, 200).mixing_warning);
  EXPECT_FALSE(estimate_mean("x", slow, 1.0, 0.0, 10).mixing_warning);
}

TEST(SteadyState, DisjointHalvesAgree) {
  const auto x = ou_series(0.2, 0.5, 400000, 4);
  const std::vector<std::vector<double>> a{{x.begin(), x.begin() + 200000}}, b{{x.begin() + 200000, x.end()}};
  const auto ea = estimate_mean("x", a, 0.5, 0.0, 20), eb = estimate_mean("x", b, 0.5, 0.0, 20);
  EXPECT_LT(std::abs(ea.mean - eb.mean), 3.0 * std::hypot(ea.se, eb.se));
}

TEST(SteadyState, EquilibriumHarmonicChainKineticTemperature) {
  const auto c = build_chain(2, harmonic, harmonic, 1.0, 1.0, 1.0, 1.0);
  const auto rec = simulate(c, SystemState::zeros(c), {Scheme::splitting, 0.02, std::nullopt}, 4000.0, 5,
                            {"p_1", "p_2", "r_1"}, 5);
  for (const auto& name : rec.names) {
    std::vector<std::vector<double>> sq{rec.series(name)};
    for (double& v : sq[0]) v *= v;
    const auto e = estimate_mean(name + "^2", sq, 0.1, 0.05, 20);
    EXPECT_LT(std::abs(e.mean - 1.0), 3.0 * e.se) << e.name;
    EXPECT_GT(e.tau_int, 0.0);
  }
}

TEST(SteadyState, HarmonicChainFluxMatchesOracle) {
  const auto c = build_chain(3, harmonic, harmonic, 2.0, 1.0, 1.0, 1.0);
  const double exact = exact_flux(stationary_covariance(assemble_linear(c)), c, 1);
  const auto rec =
      simulate(c, SystemState::zeros(c), {Scheme::splitting, 0.02, std::nullopt}, 6000.0, 6, {"Phi_1"}, 5);
  const auto e = steady_state(rec, 0.05, 20).at("Phi_1");
  EXPECT_LT(std::abs(e.mean - exact), 3.0 * e.se);
  EXPECT_THROW(steady_state(rec).at("nope"), AnalysisError);
}

// ---------------------------------------------------------------------------

TEST(Cumulant, AlphaDomain) {
  const auto c = build_chain(2, quartic, quartic, 2.0, 1.0, 1.0, 1.0);
  const auto [lo, hi] = alpha_domain(c);
  EXPECT_DOUBLE_EQ(lo, -1.0);
  EXPECT_DOUBLE_EQ(hi, 2.0);
  const std::vector<double> bad{2.5}, t{1.0};
  try {
    mgf_cumulant(c, bad, t, 1, EnsembleSpec{});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("(-1, 2)"), std::string::npos) << e.what();
  }
  const auto eq = build_chain(2, quartic, quartic, 1.0, 1.0, 1.0, 1.0);
  EXPECT_TRUE(std::isinf(alpha_domain(eq).first));
}

TEST(Cumulant, EquilibriumIsIdenticallyZero) {
  const auto eq = build_chain(2, quartic, quartic, 1.0, 1.0, 1.0, 1.0);
  const std::vector<double> alphas{-3.0, 0.0, 0.5, 4.0}, t{10.0, 20.0};
  EnsembleSpec spec;
  spec.n_traj = 10;
  const auto curve = mgf_cumulant(eq, alphas, t, 1, spec);
  for (const auto& p : curve.points) {
    EXPECT_EQ(p.e, 0.0);
    EXPECT_EQ(p.se, 0.0);
  }
  const auto sym = gc_symmetry_check(mgf_cumulant(eq, std::vector<double>{0.2, 0.5, 0.8}, t, 1, spec));
  EXPECT_EQ(sym.max_deviation, 0.0);
  EXPECT_TRUE(sym.pass);
}

TEST(Cumulant, GaussianSamplesSatisfySymmetry) {
  // mean S_200 = 3 keeps n_eff at alpha = 1 near N e^{-6}
  const double m = 0.015;
  const auto s = gaussian_gc_samples(m, {50.0, 100.0, 200.0}, 20000, 9);
  std::vector<double> alphas;
  for (int k = 0; k <= 10; ++k) alphas.push_back(0.1 * k);
  const auto curve = cumulant_curve(s, alphas);
  EXPECT_EQ(curve.at(0.0).e, 0.0);
  for (const auto& p : curve.points) {
    EXPECT_TRUE(p.usable);
    EXPECT_LT(std::abs(p.e - m * p.alpha * (1.0 - p.alpha)), 4.0 * p.se + 1e-12) << p.alpha;
    EXPECT_LE(p.ci_lo, p.ci_hi);
  }
  const auto sym = gc_symmetry_check(curve);
  EXPECT_TRUE(sym.pass);
  EXPECT_EQ(sym.usable_pairs, 6u);
  for (const auto& pr : sym.pairs)
    if (pr.alpha == 0.5) EXPECT_EQ(pr.deviation, 0.0);
}

TEST(Cumulant, FewTrajectoryDominanceIsFlagged) {
  const auto s = gaussian_gc_samples(1.0, {50.0, 100.0}, 2000, 10);
  const std::vector<double> alphas{0.5, 3.0};
  CumulantOptions opt;
  opt.bootstrap = 0;
  const auto curve = cumulant_curve(s, alphas, opt);
  EXPECT_TRUE(curve.at(0.5).usable || curve.at(0.5).n_eff < 30.0);
  EXPECT_FALSE(curve.at(3.0).usable);
}

TEST(Cumulant, AsymmetricGridRejected) {
  const auto s = gaussian_gc_samples(0.05, {50.0}, 100, 11);
  const auto curve = cumulant_curve(s, std::vector<double>{0.1, 0.5, 0.8});
  EXPECT_THROW(gc_symmetry_check(curve), AnalysisError);
}

// ---------------------------------------------------------------------------

TEST(Legendre, QuadraticClosedForm) {
  // e(alpha) = c alpha (1 - alpha)  ->  I(w) = (c - w)^2 / (4c), I(w) - I(-w) = -w
  const double c = 0.7;
  std::vector<double> a, e, w;
  for (int k = -200; k <= 300; ++k) {
    a.push_back(0.01 * k);
    e.push_back(c * a.back() * (1.0 - a.back()));
  }
  for (int k = -20; k <= 20; ++k) w.push_back(0.1 * c * k);
  const auto rf = legendre_rate(a, e, w, 1e-9);
  EXPECT_TRUE(rf.convex);
  for (const auto& p : rf.points) {
    EXPECT_TRUE(p.interior);
    EXPECT_NEAR(p.value, (c - p.w) * (c - p.w) / (4.0 * c), 1e-4) << p.w;
  }
  for (std::size_t k = 0; k < w.size(); ++k) {
    EXPECT_NEAR(rf.points[k].value - rf.points[w.size() - 1 - k].value, -w[k], 2e-4);
  }
  EXPECT_NEAR(rf.at(c).value, 0.0, 1e-4);  // minimum at the mean rate
  for (double alpha : {0.0, 0.3, 0.5, 0.8}) {
    EXPECT_NEAR(legendre_inverse(rf, alpha), c * alpha * (1.0 - alpha), 2e-3) << alpha;
  }
}

TEST(Legendre, DegenerateZeroCumulant) {
  const std::vector<double> a{-1.0, 0.0, 1.0, 2.0}, e(4, 0.0), w{-0.5, 0.0, 0.5};
  const auto rf = legendre_rate(a, e, w, 1e-12);
  EXPECT_EQ(rf.at(0.0).value, 0.0);
  EXPECT_FALSE(rf.at(0.5).interior);
  EXPECT_FALSE(rf.at(-0.5).interior);
}

TEST(Legendre, NonConcaveRejected) {
  const std::vector<double> a{0.0, 0.5, 1.0}, e{0.0, -1.0, 0.0}, w{0.0};
  EXPECT_THROW(legendre_rate(a, e, w, 1e-3), AnalysisError);
  // small violations are absorbed by the isotonic adjustment
  const std::vector<double> e2{0.0, 0.1, 0.11, 0.1205, 0.1};
  const std::vector<double> a2{0.0, 0.25, 0.5, 0.75, 1.0};
  EXPECT_NO_THROW(legendre_rate(a2, e2, w, 0.05));
}

TEST(Legendre, FromMonteCarloCurve) {
  const double m = 0.015;
  const auto s = gaussian_gc_samples(m, {50.0, 100.0, 200.0}, 20000, 12);
  std::vector<double> alphas, w;
  for (int k = 0; k <= 10; ++k) alphas.push_back(0.1 * k);
  for (int k = -2; k <= 2; ++k) w.push_back(0.005 * k);
  const auto rf = legendre_rate(cumulant_curve(s, alphas), w);
  for (std::size_t k = 0; k < w.size(); ++k) {
    EXPECT_NEAR(rf.points[k].value - rf.points[w.size() - 1 - k].value, -w[k], 5e-3);
  }
}

// ---------------------------------------------------------------------------

TEST(GreenKubo, OuCorrelationIntegral) {
  // <x(t)x(0)> = e^{-t}, integral 1
  std::vector<std::vector<double>> segs;
  for (std::uint64_t i = 0; i < 40; ++i) segs.push_back(ou_series(1.0, 0.05, 20000, 100 + i));
  const auto ci = correlation_integral(segs, 0.05);
  EXPECT_TRUE(ci.converged);
  EXPECT_LT(std::abs(ci.integral - 1.0), 3.0 * ci.se + 0.02);
  EXPECT_LT(std::abs(ci.baseline_mean), 3.0 * ci.baseline_se);
  EXPECT_NEAR(ci.acf[0], 1.0, 0.05);
}

TEST(GreenKubo, OracleResponseIsCentralDifference) {
  const auto eq = build_chain(3, harmonic, harmonic, 1.0, 1.0, 1.0, 1.0);
  const std::vector<double> probes{-0.2, 0.2};
  const auto r = oracle_response(eq, 1, probes);
  EXPECT_NEAR(r.slope, (r.means[1] - r.means[0]) / 0.4, 1e-12);
  EXPECT_GT(r.slope, 0.0);
  EXPECT_GT(r.means[1], 0.0);  // beta_R > beta_L: left reservoir hotter
  EXPECT_THROW(oracle_response(build_chain(3, harmonic, harmonic, 2.0, 1.0, 1.0, 1.0), 1, probes), ConfigError);
  EXPECT_THROW(oracle_response(eq, 1, std::vector<double>{-3.0, 3.0}), ConfigError);
}

TEST(GreenKubo, EquilibriumBaselineFluxVanishes) {
  const auto eq = build_chain(2, harmonic, harmonic, 1.0, 1.0, 1.0, 1.0);
  EnsembleSpec spec;
  spec.n_traj = 8;
  spec.burn_in = 10.0;
  spec.integrator.dt = 0.02;
  const auto segs = equilibrium_flux_segments(eq, 1, 400.0, 5, spec);
  const auto ci = correlation_integral(segs, 0.1);
  EXPECT_LT(std::abs(ci.baseline_mean), 3.0 * ci.baseline_se);
}

// ---------------------------------------------------------------------------

TEST(Mixing, RecoversOuRate) {
  std::vector<std::vector<double>> runs;
  for (std::uint64_t i = 0; i < 10; ++i) runs.push_back(ou_series(0.5, 0.1, 40000, 200 + i));
  const auto m = mixing_rate(runs, 0.1);
  EXPECT_FALSE(m.white_noise);
  EXPECT_FALSE(m.oscillatory);
  EXPECT_NEAR(m.rate / 0.5, 1.0, 0.1);
  EXPECT_TRUE(m.pass);
}

TEST(Mixing, WhiteNoiseDecaysWithinOneStride) {
  const std::vector<std::vector<double>> runs{iid(50000, 13)};
  const auto m = mixing_rate(runs, 0.25);
  EXPECT_TRUE(m.white_noise);
  EXPECT_DOUBLE_EQ(1.0 / m.rate, 0.25);
}

TEST(Mixing, TooShortForTimeConstant) {
  const std::vector<std::vector<double>> runs{ou_series(0.01, 1.0, 600, 14)};
  EXPECT_THROW(mixing_rate(runs, 1.0), AnalysisError);
}

TEST(Mixing, HarmonicChainMomentumMatchesSpectrum) {
  const auto c = build_chain(2, harmonic, harmonic, 1.0, 1.0, 1.0, 1.0);
  const double slow = slowest_decay_rate(assemble_linear(c));
  const auto recs = simulate_ensemble(c, gibbs_sampler(c, 1.0), {Scheme::splitting, 0.02, std::nullopt}, 4000.0, 60, 15,
                                      {"p_1"}, 10);
  const auto m = mixing_rate(recs, "p_1");
  EXPECT_TRUE(m.oscillatory);
  EXPECT_NEAR(m.rate / slow, 1.0, 0.2);
}

// ---------------------------------------------------------------------------

TEST(Nondegeneracy, PaperExamples) {
  NondegeneracyOptions opt;
  opt.samples = 100;
  // degree r = n - 1
  EXPECT_GT(nondegeneracy_probe(Polynomial({1.0, 1.0, 1.0}), 3, opt).fraction, 0.95);
  EXPECT_GT(nondegeneracy_probe(quartic, 3, opt).fraction, 0.95);  // U'' = 1 + 3x^2
  // constant f, n = 2: rank one
  EXPECT_EQ(nondegeneracy_probe(harmonic, 2, opt).fraction, 0.0);
  EXPECT_EQ(nondegeneracy_probe(Polynomial({2.0}), 1, opt).fraction, 1.0);
  // degree 1 < n - 1 = 2: rows span a 2-dim space
  EXPECT_EQ(nondegeneracy_probe(Polynomial({0.5, 1.0}), 3, opt).fraction, 0.0);
}

// ---------------------------------------------------------------------------

TEST(Shells, ScaleToEnergy) {
  const auto c = build_chain(3, quartic, quartic, 0.0, 0.0, 1.0, 1.0);
  for (const auto& d : shell_directions(c, 4, 1)) {
    EXPECT_NEAR(total_energy_G(c, scale_to_energy(c, d, 123.0)), 123.0, 1e-9);
  }
  EXPECT_EQ(shell_directions(c, 4, 1).size(), 10u);
}

TEST(Dissipation, HarmonicExponentIsOne) {
  const auto c = build_chain(3, harmonic, harmonic, 0.0, 0.0, 1.0, 1.0);
  DissipationOptions opt;
  opt.dt = 0.01;
  const std::vector<double> e{10.0, 100.0, 1000.0};
  const auto rep = dissipation_scaling(c, e, opt);
  EXPECT_FALSE(rep.fault);
  EXPECT_NEAR(rep.exponent, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(rep.bound_exponent, 1.0);
  EXPECT_TRUE(rep.consistent);
  EXPECT_THROW(dissipation_scaling(c, std::vector<double>{10.0, 30.0, 99.0}, opt), ConfigError);
  EXPECT_THROW(dissipation_scaling(build_chain(3, harmonic, harmonic, 1.0, 1.0, 1.0, 1.0), e, opt), ConfigError);
}

TEST(Lyapunov, ZeroTemperatureReducesToRelaxation) {
  const auto c = build_chain(2, quartic, quartic, 0.0, 0.0, 1.0, 1.0);
  LyapunovProbeOptions opt;
  opt.theta = 0.5;
  opt.dt = 0.01;
  opt.random_directions = 2;
  opt.b_fractions.clear();
  const std::vector<double> e{50.0};
  const auto rep = lyapunov_probe(c, e, opt);
  double worst = -1e300;
  for (const auto& d : shell_directions(c, 2, opt.seed)) {
    const auto r = relax_deterministic(c, scale_to_energy(c, d, 50.0), 0.01);
    worst = std::max(worst, r.G_final - r.G_initial);
  }
  EXPECT_LT(worst, 0.0);
  EXPECT_NEAR(rep.shells[0].log_kappa, opt.theta * worst, 1e-9);
  EXPECT_EQ(rep.shells[0].log_kappa_se, 0.0);
}

TEST(Lyapunov, NoDissipationNoDecrease) {
  const auto c = build_chain(2, harmonic, harmonic, 1.0, 1.0, 0.0, 1.0);
  LyapunovProbeOptions opt;
  opt.theta = 0.25;
  opt.dt = 0.01;
  opt.paths = 100;
  opt.random_directions = 2;
  opt.b_fractions.clear();
  const std::vector<double> e{20.0, 200.0};
  const auto rep = lyapunov_probe(c, e, opt);
  EXPECT_FALSE(rep.significantly_decreasing);
  for (const auto& s : rep.shells) EXPECT_GT(s.log_kappa, -3.0 * s.log_kappa_se);
  EXPECT_TRUE(rep.theta_in_range);
}
