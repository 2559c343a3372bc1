#include <gtest/gtest.h>

#include <cmath>

#include "levyma/acf.hpp"
#include "levyma/estimate.hpp"
#include "levyma/simulate.hpp"
#include "oracles.hpp"

using namespace levyma;

namespace {

DriverSpec brownian() { return {Brownian{1.0}}; }
DriverSpec cp_gauss() { return {CompoundPoisson{1.0, GaussianJump{1.0}}}; }

SimConfig config(KernelSpec k, DriverSpec d, long n, int m, std::uint64_t seed = 1) {
  SimConfig c;
  c.kernel = std::move(k);
  c.driver = std::move(d);
  c.n = n;
  c.refinement = m;
  c.seed = seed;
  return c;
}

/// Lattice increments U_k over (k Delta, (k + 1) Delta] from fine increments
/// starting at a lattice-aligned global index.
std::vector<double> aggregate(const std::vector<double>& inc, int m) {
  std::vector<double> u(inc.size() / static_cast<std::size_t>(m), 0.0);
  for (std::size_t k = 0; k < u.size(); ++k)
    for (int r = 0; r < m; ++r) u[k] += inc[k * static_cast<std::size_t>(m) + static_cast<std::size_t>(r)];
  return u;
}

}  // namespace

TEST(Simulate, UnitIndicatorReturnsIncrements) {
  auto cfg = config(indicator(0.0, 1.0), cp_gauss(), 200, 1, 11);
  PathSimulator ps(cfg);
  const auto inc = ps.increments(cfg.seed);
  const auto s = ps.simulate();
  ASSERT_EQ(s.values.size(), 200u);
  for (std::size_t i = 0; i < s.values.size(); ++i) EXPECT_EQ(s.values[i], inc[i]);
}

TEST(Simulate, StepKernelBitEqualsDiscreteMa) {
  const std::vector<double> psi = {1.0, 0.5};
  auto cfg = config(KernelSpec{StepKernel{psi, 0, 1.0}}, cp_gauss(), 500, 1, 3);
  PathSimulator ps(cfg, SimOptions{.method = ConvMethod::Direct});
  const auto inc = ps.increments(cfg.seed);
  const auto s = ps.from_increments(inc);
  // inc[0] covers (-1, 0]; X_t = Z_t + 0.5 Z_{t-1} with Z_t = inc[t].
  const auto ref = oracle::discrete_ma(psi, inc, 1, 500, 1, 0);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_EQ(s.values[i], ref[i]) << i;
}

TEST(Simulate, StepKernelFineGridMatchesDiscreteMa) {
  const std::vector<double> psi = {1.0, -0.7, 0.25};
  for (int m : {4, 32})
    for (auto method : {ConvMethod::Direct, ConvMethod::Fft}) {
      auto cfg = config(KernelSpec{StepKernel{psi, 0, 1.0}}, brownian(), 300, m, 5);
      PathSimulator ps(cfg, SimOptions{.method = method});
      const auto inc = ps.increments(cfg.seed);
      ASSERT_EQ(ps.plan().anchor % m, 0);
      const auto u = aggregate(inc, m);
      const auto s = ps.from_increments(inc);
      // u[0] covers (-2, -1]; X_t = sum_c psi_c U_{t - c - 1}.
      const auto ref = oracle::discrete_ma(psi, u, 2, 300, 1, 0);
      for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(s.values[i], ref[i], 1e-12) << m << " " << i;
    }
}

TEST(Simulate, MeanIsAdded) {
  auto cfg = config(indicator(0.0, 1.0), brownian(), 50, 2, 1);
  const auto a = simulate_path(cfg);
  cfg.mu = 3.5;
  const auto b = simulate_path(cfg);
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(b.values[i] - a.values[i], 3.5, 1e-14);
  EXPECT_EQ(b.mu, 3.5);
  EXPECT_NE(a.provenance, b.provenance);
}

TEST(Simulate, Deterministic) {
  auto cfg = config(KernelSpec{FractionalPlus{0.3, 1.0}}, cp_gauss(), 256, 8, 9);
  EXPECT_EQ(simulate_path(cfg).values, simulate_path(cfg).values);
}

TEST(Simulate, DirectAndFftAgree) {
  const std::vector<KernelSpec> ks = {KernelSpec{FractionalPlus{0.3, 1.0}}, KernelSpec{FractionalAbs{0.2, 1.0}},
                                      KernelSpec{StepKernel{{1.0, 0.5}, 0, 1.0}},
                                      KernelSpec{IndicatorUnion{{IndicatorPiece{0.0, 0.5, 1.0}, IndicatorPiece{1.0, 2.0, 1.0}}}}};
  for (const auto& k : ks) {
    auto cfg = config(k, cp_gauss(), 1024, 8, 4);
    PathSimulator d(cfg, SimOptions{.method = ConvMethod::Direct});
    PathSimulator f(cfg, SimOptions{.method = ConvMethod::Fft});
    const auto a = d.simulate();
    const auto b = f.simulate();
    double scale = 0.0;
    for (double v : a.values) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-10 * scale);
  }
}

TEST(Simulate, FractionalVarianceMatchesQuadrature) {
  auto cfg = config(KernelSpec{FractionalPlus{0.3, 1.0}}, brownian(), 4096, 32, 2024);
  const auto s = simulate_path(cfg);
  const double g0 = autocov_quadrature(cfg.kernel, 1.0, 1.0, 0, 1e-12).gamma[0];
  const double var = oracle::sample_variance(s.values);
  EXPECT_NEAR(var / g0, 1.0, 0.05);
}

TEST(Simulate, WindowSelection) {
  auto cfg = config(KernelSpec{DifferencedFractionalPlus{0.2, 1.0}}, brownian(), 64, 4);
  PathSimulator ps(cfg);
  EXPECT_LE(ps.plan().tail_mass, cfg.tail_tol * (1 + 1e-9));
  EXPECT_FALSE(ps.plan().capped);
  cfg.kernel = KernelSpec{FractionalPlus{0.2, 1.0}};
  cfg.n = 8;
  PathSimulator capped(cfg);
  EXPECT_TRUE(capped.plan().capped);
  EXPECT_DOUBLE_EQ(capped.plan().t_pos, 32.0);
}

TEST(Simulate, RejectsExplicitShortWindow) {
  auto cfg = config(KernelSpec{FractionalPlus{0.2, 1.0}}, brownian(), 64, 4);
  cfg.truncation_t = 5.0;
  EXPECT_THROW(PathSimulator{cfg}, ConfigError);
  cfg.tail_tol = 0.5;
  EXPECT_NO_THROW(PathSimulator{cfg});
}

TEST(Simulate, RejectsInvalidConfig) {
  auto cfg = config(indicator(0.0, 1.0), brownian(), 10, 0);
  EXPECT_THROW(simulate_path(cfg), ConfigError);
  cfg.refinement = 1;
  cfg.delta = 0.0;
  EXPECT_THROW(simulate_path(cfg), ConfigError);
  cfg.delta = 1.0;
  cfg.n = 0;
  EXPECT_THROW(simulate_path(cfg), ConfigError);
}

TEST(Simulate, FractionalPairRoutesAgree) {
  for (auto method : {ConvMethod::Direct, ConvMethod::Fft}) {
    auto cfg = config(KernelSpec{FractionalPlus{0.3, 1.0}}, cp_gauss(), 512, 8, 77);
    const auto p = simulate_fractional_pair(cfg, 0, method);
    ASSERT_EQ(p.x.values.size(), 512u);
    ASSERT_EQ(p.z_kernel.values.size(), 512u);
    ASSERT_EQ(p.z_differenced.values.size(), 512u);
    double worst = 0.0;
    for (std::size_t i = 0; i < 512; ++i) worst = std::max(worst, std::abs(p.z_kernel.values[i] - p.z_differenced.values[i]));
    EXPECT_LT(worst, 1e-10);
  }
}

TEST(Simulate, FractionalLagOneAutocorrelation) {
  auto cfg = config(KernelSpec{FractionalPlus{0.2, 1.0}}, brownian(), 8192, 32, 31);
  PathSimulator ps(cfg);
  double mean = 0.0;
  for (std::uint32_t r = 0; r < 16; ++r) mean += (*acov_star(ps.simulate(cfg.seed, r).values, 1).rho)[1] / 16.0;
  EXPECT_NEAR(mean, std::pow(2.0, 0.4) - 1.0, 0.015);
}

TEST(Simulate, DifferencedLagOneAutocorrelation) {
  auto cfg = config(KernelSpec{FractionalPlus{0.4, 1.0}}, brownian(), 8192, 32, 32);
  const auto p = simulate_fractional_pair(cfg);
  const auto t = acov_hat(p.z_kernel.values, 1);
  EXPECT_NEAR((*t.rho)[1], phi(0.4), 0.02);
}

TEST(Simulate, StationarityHalves) {
  auto cfg = config(KernelSpec{StepKernel{{1.0, 0.6, 0.3}, 0, 1.0}}, cp_gauss(), 20000, 4, 8);
  const auto s = simulate_path(cfg);
  const std::vector<double> a(s.values.begin(), s.values.begin() + 10000);
  const std::vector<double> b(s.values.begin() + 10000, s.values.end());
  const double g0 = 1.0 + 0.36 + 0.09;
  const double lrv = (1.0 + 0.6 + 0.3) * (1.0 + 0.6 + 0.3);
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / 1e4;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / 1e4;
  EXPECT_LT(std::abs(ma - mb), 5.0 * std::sqrt(2.0 * lrv / 1e4));
  EXPECT_NEAR(oracle::sample_variance(a) / oracle::sample_variance(b), 1.0, 0.1);
  EXPECT_NEAR(oracle::sample_variance(a) / g0, 1.0, 0.1);
}

TEST(Simulate, SeedIsolation) {
  auto cfg = config(KernelSpec{DifferencedFractionalPlus{0.3, 1.0}}, brownian(), 4096, 8, 1);
  const auto a = simulate_path(cfg);
  cfg.seed = 2;
  const auto b = simulate_path(cfg);
  EXPECT_LT(std::abs(oracle::correlation(a.values, b.values)), 0.05);
  PathSimulator ps(cfg);
  const auto s0 = ps.simulate(5, 0);
  const auto s1 = ps.simulate(5, 1);
  EXPECT_LT(std::abs(oracle::correlation(s0.values, s1.values)), 0.05);
}

TEST(Simulate, RefinementConvergence) {
  // One Brownian path at the finest grid, aggregated to coarser grids, so the
  // estimates differ only by discretisation error.
  const KernelSpec k{DifferencedFractionalPlus{0.45, 1.0}};
  const long n = 2000;
  const std::vector<int> ms = {4, 8, 16, 32, 64};
  std::vector<double> gamma0;
  std::vector<double> fine;
  for (auto it = ms.rbegin(); it != ms.rend(); ++it) {
    auto cfg = config(k, brownian(), n, *it);
    cfg.truncation_t = 64.0;
    cfg.tail_tol = 1e-2;
    PathSimulator ps(cfg, SimOptions{.method = ConvMethod::Direct});
    ASSERT_EQ(ps.plan().anchor, static_cast<std::int64_t>(*it) * (1 - 64));
    std::vector<double> inc;
    if (fine.empty()) {
      inc = ps.increments(99);
    } else {
      inc.assign(ps.plan().increments, 0.0);
      for (std::size_t j = 0; j < inc.size(); ++j) {
        inc[j] = fine[2 * j];
        if (2 * j + 1 < fine.size()) inc[j] += fine[2 * j + 1];
      }
    }
    fine = inc;
    const auto s = ps.from_increments(inc);
    gamma0.insert(gamma0.begin(), acov_star(s.values, 0).gamma[0]);
  }
  // differences between consecutive refinements, m = 4..32
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i + 1 < gamma0.size(); ++i) {
    lx.push_back(std::log(static_cast<double>(ms[i])));
    ly.push_back(std::log(std::abs(gamma0[i] - gamma0[i + 1])));
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  EXPECT_LE(sxy / sxx, -0.8);
}

TEST(Simulate, ConfigJsonRoundTripAndDigest) {
  auto cfg = config(KernelSpec{FractionalAbs{0.2, 1.0}}, cp_gauss(), 100, 16, 5);
  cfg.mu = 1.25;
  const nlohmann::json j = cfg;
  EXPECT_EQ(j.get<SimConfig>(), cfg);
  EXPECT_EQ(config_digest(cfg).size(), 16u);
  EXPECT_EQ(config_digest(cfg), config_digest(j.get<SimConfig>()));
}
