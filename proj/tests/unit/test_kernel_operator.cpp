#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "specdetect/errors.hpp"
#include "specdetect/kernel_operator.hpp"
#include "specdetect/optimal_lss.hpp"

using namespace specdetect;

namespace {

const AtomicMeasure kIdentity = AtomicMeasure::point(1.0);

const StieltjesCurve& curve() {
  static const StieltjesCurve c = stieltjes_grid(kIdentity, 0.5);
  return c;
}

const KernelMatrix& kernel() {
  static const KernelMatrix K = assemble_diagreg(curve());
  return K;
}

std::vector<double> likelihood_ratio_lss(const StieltjesCurve& c, double t) {
  std::vector<double> out(c.size());
  const double z = oracle::z_of_t(t, c.gamma);
  for (std::size_t m = 0; m < c.size(); ++m) out[m] = -std::log(z - c.grid[m]);
  return out;
}

std::vector<double> on_grid(const LssFunction& phi, const std::vector<double>& grid) {
  std::vector<double> out(grid.size());
  for (std::size_t m = 0; m < grid.size(); ++m) out[m] = phi(grid[m]);
  return out;
}

}  // namespace

TEST(Kernel, ZeroOutsideSupportAndSymmetric) {
  const auto& c = curve();
  EXPECT_EQ(kernel_eval(c, 0.01, 1.0), 0.0);
  EXPECT_EQ(kernel_eval(c, 1.0, 3.5), 0.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(c.support.lower_edge() + 1e-3, c.support.upper_edge() - 1e-3);
  for (int i = 0; i < 20; ++i) {
    const double x = u(rng), y = u(rng);
    EXPECT_EQ(kernel_eval(c, x, y), kernel_eval(c, y, x));
    EXPECT_GT(kernel_eval(c, x, y), 0.0);
  }
  EXPECT_THROW(kernel_eval(c, 1.0, 1.0), DomainError);
}

TEST(Kernel, MatchesClosedFormTransform) {
  const double x = 1.0, y = 2.0;
  const cplx v1 = oracle::mp_companion(0.5, x), v2 = oracle::mp_companion(0.5, y);
  const double expected =
      std::log1p(4.0 * v1.imag() * v2.imag() / std::norm(v1 - v2)) / (2.0 * std::numbers::pi * std::numbers::pi);
  EXPECT_NEAR(kernel_eval(curve(), x, y), expected, 1e-10);
}

TEST(KernelMatrix, SymmetricNonnegativeAndRegularizedPsd) {
  const auto& K = kernel();
  EXPECT_TRUE(K.raw.isApprox(K.raw.transpose(), 0.0));
  EXPECT_TRUE((K.folded - K.folded.transpose()).cwiseAbs().maxCoeff() == 0.0);
  EXPECT_GE(K.raw.minCoeff(), 0.0);
  EXPECT_GE(K.smallest_regularized_eigenvalue(), -1e-8 * K.folded.trace());
  EXPECT_NEAR(K.ridge, 1e-4 * K.folded.trace() / static_cast<double>(K.size()), 1e-18);
  EXPECT_DOUBLE_EQ(K.diagonal_multiplier, 1.5);
}

TEST(KernelMatrix, QuadraticFormNonnegative) {
  const auto& K = kernel();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int i = 0; i < 10; ++i) {
    std::vector<double> f(K.size());
    for (auto& v : f) v = n(rng);
    EXPECT_GE(K.quadratic_form(f), 0.0);
  }
}

TEST(DiagregSolve, ZeroRightHandSide) {
  const DiagregSolver solver(kernel());
  const auto sol = solver.solve(std::vector<double>(kernel().size(), 0.0));
  for (double g : sol.g) EXPECT_EQ(g, 0.0);
}

TEST(DiagregSolve, LinearInDelta) {
  const DiagregSolver solver(kernel());
  const auto d1 = weak_derivative_cdf(AtomicMeasure::point(1.3), curve());
  const auto d2 = weak_derivative_cdf(AtomicMeasure::point(1.6), curve());
  std::vector<double> mix(d1.cdf.size());
  for (std::size_t m = 0; m < mix.size(); ++m) mix[m] = 2.0 * d1.cdf[m] - 0.5 * d2.cdf[m];
  const auto g1 = solver.solve(d1.cdf), g2 = solver.solve(d2.cdf), gm = solver.solve(mix);
  double scale = 0.0;
  for (double g : gm.g) scale = std::max(scale, std::abs(g));
  for (std::size_t m = 0; m < mix.size(); ++m) EXPECT_NEAR(gm.g[m], 2.0 * g1.g[m] - 0.5 * g2.g[m], 1e-9 * scale);
}

TEST(DiagregSolve, LikelihoodRatioShape) {
  AlgoConfig cfg;
  cfg.epsilon = 1e-6;
  for (double t : {1.2, 1.6}) {
    const SpikedModel model{kIdentity, kIdentity, AtomicMeasure::point(t), 0.5, 1, 500};
    const auto r = optimal_lss(model, cfg);
    const auto c = stieltjes_grid(kIdentity, 0.5, cfg.grid_options());
    EXPECT_LE(centered_mad(on_grid(r.phi, c.grid), likelihood_ratio_lss(c, t)), 1e-2) << t;
    EXPECT_NEAR(r.report.efficacy, oracle::lr_efficacy(t, 0.5), 1e-2) << t;
  }
}

TEST(Collocation, ZeroDeltaGivesZeroCoefficients) {
  const auto cs = solve_collocation(kIdentity, 0.5, AtomicMeasure::point(1.4), AtomicMeasure::point(1.4));
  for (double g : cs.solution.g) EXPECT_EQ(g, 0.0);
}

TEST(Collocation, AgreesWithDiagregAndOracle) {
  AlgoConfig cfg;
  cfg.epsilon = 1e-6;
  const SpikedModel model{kIdentity, kIdentity, AtomicMeasure::point(1.6), 0.5, 1, 500};
  const auto diag = optimal_lss(model, cfg);
  cfg.solver = SolverKind::Collocation;
  const auto coll = optimal_lss(model, cfg);
  const auto c = stieltjes_grid(kIdentity, 0.5, AlgoConfig{}.grid_options());
  EXPECT_LE(centered_mad(on_grid(coll.phi, c.grid), on_grid(diag.phi, c.grid)), 2e-2);
  EXPECT_LE(centered_mad(on_grid(coll.phi, c.grid), likelihood_ratio_lss(c, 1.6)), 1e-2);
  EXPECT_NEAR(coll.report.efficacy, oracle::lr_efficacy(1.6, 0.5), 2e-2);
}

TEST(LssMoments, ConstantFunctionHasNoSignal) {
  const auto& c = curve();
  const auto delta = weak_derivative_cdf(AtomicMeasure::point(1.6), c);
  const LssFunction flat({0.0, 5.0}, {2.0, 2.0}, {Segment::Support, Segment::Support});
  const auto r = lss_moments(c, kernel(), flat, delta, 1);
  EXPECT_EQ(r.mu, 0.0);
  EXPECT_NEAR(r.sigma, 0.0, 1e-12);
  EXPECT_EQ(r.efficacy, 0.0);
}

TEST(LssMoments, ScaleInvariantEfficacyAndPowerFormula) {
  const auto& c = curve();
  const auto delta = weak_derivative_cdf(AtomicMeasure::point(1.6), c);
  const auto phi = LssFunction::analytic([](double x) { return -std::log(oracle::z_of_t(1.6, 0.5) - x); }, c.grid);
  const auto a = lss_moments(c, kernel(), phi, delta, 1);
  const auto b = lss_moments(c, kernel(), phi.scaled(7.5), delta, 1);
  EXPECT_NEAR(a.efficacy, b.efficacy, 1e-12 * std::abs(a.efficacy));
  EXPECT_NEAR(a.power, oracle::normal_cdf(oracle::kZ05 + a.efficacy), 1e-12);
  EXPECT_GE(a.sigma, 0.0);
  EXPECT_NEAR(a.efficacy, oracle::lr_efficacy(1.6, 0.5), 2e-2);
}

TEST(LssMoments, SolvedDerivativeMatchesPairingFormula) {
  const SpikedModel model{kIdentity, kIdentity, AtomicMeasure::point(1.5), 0.5, 1, 500};
  const OptimalLssSolver solver(kIdentity, 0.5);
  const auto r = solver.solve(model);
  const auto evaluated = solver.evaluate(r.phi, model);
  EXPECT_NEAR(evaluated.efficacy, r.report.efficacy, 1e-2 * r.report.efficacy);
  EXPECT_NEAR(r.report.power, oracle::normal_cdf(oracle::kZ05 + r.report.efficacy), 1e-12);
}

TEST(Efficacy, MonotoneAsRidgeShrinks) {
  const SpikedModel model{kIdentity, kIdentity, AtomicMeasure::point(1.6), 0.5, 1, 500};
  double previous = 0.0;
  for (double ridge : {1e-2, 1e-3, 1e-4, 1e-5}) {
    AlgoConfig cfg;
    cfg.ridge_factor = ridge;
    const double theta = optimal_lss(model, cfg).report.efficacy;
    EXPECT_GE(theta, previous - 1e-12) << ridge;
    previous = theta;
  }
}

TEST(Efficacy, DerivativeIndependentOfSpikeCount) {
  const OptimalLssSolver solver(kIdentity, 0.5);
  SpikedModel model{kIdentity, kIdentity, AtomicMeasure::point(1.5), 0.5, 1, 500};
  const auto base = solver.solve(model);
  for (int h : {2, 5}) {
    model.h = h;
    const auto r = solver.solve(model);
    ASSERT_EQ(r.derivative.size(), base.derivative.size());
    for (std::size_t m = 0; m < r.derivative.size(); ++m) EXPECT_EQ(r.derivative[m], base.derivative[m]);
    EXPECT_NEAR(r.report.efficacy, h * base.report.efficacy, 1e-12 * h * base.report.efficacy);
  }
}

TEST(Power, LowerAlphaConvention) {
  EXPECT_NEAR(asymptotic_power(0.0, 0.05), 0.05, 1e-12);
  EXPECT_NEAR(asymptotic_power(2.0, 0.05), oracle::normal_cdf(oracle::kZ05 + 2.0), 1e-12);
  EXPECT_NEAR(asymptotic_power(-2.0, 0.05), asymptotic_power(2.0, 0.05), 1e-15);
}
