#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "oracles.hpp"
#include "specdetect/errors.hpp"
#include "specdetect/simulation.hpp"

using namespace specdetect;

namespace {

// MP(gamma) cdf by trapezoid on a fine grid of the closed-form density.
double mp_cdf(double gamma, double x) {
  const double a = oracle::mp_lower(gamma), b = oracle::mp_upper(gamma);
  if (x <= a) return 0.0;
  const double hi = std::min(x, b);
  const int steps = 20000;
  const double h = (hi - a) / steps;
  double acc = 0.0;
  for (int i = 0; i < steps; ++i) acc += 0.5 * h * (oracle::mp_density(gamma, a + i * h) + oracle::mp_density(gamma, a + (i + 1) * h));
  return acc;
}

SimConfig small_config() {
  SimConfig c;
  c.bulk = ar1_eigenvalues(0.5, 59);
  c.n = 120;
  c.n_reps = 400;
  c.spikes = {1.5, 2.5, 4.0, 6.0};
  c.seed = 42;
  c.threads = 1;
  return c;
}

}  // namespace

TEST(Ar1, SpectrumProperties) {
  for (double rho : {0.3, 0.7}) {
    const auto ev = ar1_eigenvalues(rho, 50);
    ASSERT_EQ(ev.size(), 50u);
    EXPECT_NEAR(std::accumulate(ev.begin(), ev.end(), 0.0), 50.0, 1e-10);
    EXPECT_TRUE(std::is_sorted(ev.rbegin(), ev.rend()));
    for (double v : ev) {
      EXPECT_GT(v, (1.0 - rho) / (1.0 + rho) - 1e-12);
      EXPECT_LT(v, (1.0 + rho) / (1.0 - rho) + 1e-12);
    }
  }
  for (double v : ar1_eigenvalues(0.0, 5)) EXPECT_EQ(v, 1.0);
  EXPECT_THROW(ar1_eigenvalues(0.5, 1), DomainError);
  EXPECT_THROW(ar1_eigenvalues(1.0, 5), DomainError);
  EXPECT_THROW(ar1_eigenvalues(-0.2, 5), DomainError);
}

TEST(SampleEigenvalues, ZerosWhenDimensionExceedsSampleSize) {
  const std::vector<double> pop(30, 1.0);
  const auto ev = sample_eigenvalues(pop, 20, 5);
  ASSERT_EQ(ev.size(), 30u);
  EXPECT_TRUE(std::is_sorted(ev.rbegin(), ev.rend()));
  for (std::size_t i = 20; i < 30; ++i) EXPECT_LE(std::abs(ev[i]), 1e-10);
  EXPECT_GT(ev[19], 1e-3);
}

TEST(SampleEigenvalues, MatchesMarchenkoPasturLaw) {
  const int p = 200, n = 400;
  const std::vector<double> pop(p, 1.0);
  auto ev = sample_eigenvalues(pop, n, 9);
  std::sort(ev.begin(), ev.end());
  double ks = 0.0;
  for (int i = 0; i < p; ++i) {
    const double F = mp_cdf(0.5, ev[static_cast<std::size_t>(i)]);
    ks = std::max({ks, std::abs(F - static_cast<double>(i) / p), std::abs(F - static_cast<double>(i + 1) / p)});
  }
  EXPECT_LE(ks, 0.05);
}

TEST(SampleEigenvalues, MeanTracksPopulationTrace) {
  const auto pop = ar1_eigenvalues(0.5, 40);
  double total = 0.0;
  const int reps = 50;
  for (int r = 0; r < reps; ++r) {
    auto rng = replicate_engine(3, 0, static_cast<std::uint64_t>(r));
    const auto ev = sample_eigenvalues(pop, 80, rng);
    total += std::accumulate(ev.begin(), ev.end(), 0.0) / 40.0;
  }
  // E tr S / p = 1; sd of one replicate is about sqrt(2 tr Sigma^2 / n) / p.
  EXPECT_NEAR(total / reps, 1.0, 0.02);
}

TEST(SampleEigenvalues, DeterministicAndValidated) {
  const std::vector<double> pop{1.0, 2.0, 3.0};
  EXPECT_EQ(sample_eigenvalues(pop, 10, 77), sample_eigenvalues(pop, 10, 77));
  EXPECT_NE(sample_eigenvalues(pop, 10, 77), sample_eigenvalues(pop, 10, 78));
  auto a = replicate_engine(1, 0, 5), b = replicate_engine(1, 1, 5), c = replicate_engine(1, 0, 5);
  EXPECT_NE(a(), b());
  EXPECT_EQ(replicate_engine(1, 0, 5)(), c());
  EXPECT_THROW(sample_eigenvalues(pop, 0, 1), DomainError);
  EXPECT_THROW(sample_eigenvalues(std::vector<double>{}, 10, 1), DomainError);
  EXPECT_THROW(sample_eigenvalues(std::vector<double>{-1.0}, 10, 1), DomainError);
}

TEST(ApplyLss, SumsOverEigenvalues) {
  const LssFunction flat({0.0, 1.0}, {3.0, 3.0}, {Segment::Support, Segment::Support});
  EXPECT_DOUBLE_EQ(apply_lss(flat, std::vector<double>{0.2, 0.5, 7.0}), 9.0);
  EXPECT_EQ(apply_lss(flat, std::vector<double>{}), 0.0);
  const auto sq = LssFunction::analytic([](double x) { return x * x; }, {0.0, 1.0});
  EXPECT_DOUBLE_EQ(apply_lss(sq, std::vector<double>{1.0, 2.0}), 5.0);
}

TEST(CriticalValue, OrderStatistic) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  std::reverse(v.begin(), v.end());
  EXPECT_EQ(empirical_critical_value(v, 0.05), 95.0);
  EXPECT_EQ(empirical_critical_value(v, 0.001), 100.0);
  EXPECT_EQ(empirical_critical_value({4.0}, 0.05), 4.0);
  EXPECT_THROW(empirical_critical_value({}, 0.05), DomainError);
}

TEST(ParallelReplicates, IndependentOfThreadCount) {
  auto body = [](int r) {
    auto rng = replicate_engine(11, 2, static_cast<std::uint64_t>(r));
    return std::normal_distribution<double>()(rng);
  };
  EXPECT_EQ(parallel_replicates(57, 1, body), parallel_replicates(57, 4, body));
  EXPECT_THROW(parallel_replicates(10, 3,
                                   [](int r) -> double {
                                     if (r == 7) throw std::runtime_error("boom");
                                     return 0.0;
                                   }),
               std::runtime_error);
}

TEST(SimConfig, ValidationNamesFields) {
  auto expect_field = [](SimConfig c, const std::string& field) {
    try {
      c.validate();
      FAIL() << field;
    } catch (const DomainError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  auto c = small_config();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.p(), 60);
  EXPECT_DOUBLE_EQ(c.gamma(), 0.5);
  c.n_reps = 50;
  expect_field(c, "n_reps");
  c = small_config();
  c.spikes.clear();
  expect_field(c, "spikes");
  c = small_config();
  c.alpha = 1.5;
  expect_field(c, "alpha");
  c = small_config();
  c.bulk.clear();
  expect_field(c, "population");
  c = small_config();
  c.null_spike = 0.0;
  expect_field(c, "null_spike");
}

TEST(SimConfig, PopulationAndModel) {
  const auto c = small_config();
  const auto pop = c.population(2.5);
  EXPECT_EQ(pop.size(), 60u);
  EXPECT_EQ(std::count(pop.begin(), pop.end(), 2.5), 1);
  const auto m = c.model(2.5);
  EXPECT_EQ(m.sample_size(), 120);
  EXPECT_DOUBLE_EQ(m.gamma, 0.5);
  EXPECT_DOUBLE_EQ(m.G0.atoms()[0], 1.0);
  EXPECT_DOUBLE_EQ(m.G1.atoms()[0], 2.5);
}

TEST(PowerExperiment, ReproducibleAndCalibrated) {
  auto c = small_config();
  const auto a = power_experiment(c);
  c.threads = 2;
  const auto b = power_experiment(c);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    EXPECT_EQ(a.points[k].power_lss, b.points[k].power_lss);
    EXPECT_EQ(a.points[k].power_top, b.points[k].power_top);
    EXPECT_EQ(a.points[k].critical_lss, b.points[k].critical_lss);
  }
  EXPECT_EQ(a.critical_top, b.critical_top);
  EXPECT_EQ(a.p, 60);
  EXPECT_EQ(a.n, 120);

  // Held-out level carries the calibration half's noise too, hence the sqrt(2).
  const double se = std::sqrt(2.0 * c.alpha * (1.0 - c.alpha) / c.n_reps);
  EXPECT_LE(std::abs(a.level_top - c.alpha), 3.0 * se);
  for (const auto& pt : a.points) {
    EXPECT_LE(std::abs(pt.level_lss - c.alpha), 3.0 * se) << pt.spike;
    EXPECT_NEAR(pt.se_top, std::sqrt(pt.power_top * (1.0 - pt.power_top) / c.n_reps), 1e-12);
  }
  for (std::size_t k = 1; k < a.points.size(); ++k) {
    const double tol = 2.0 * std::max(a.points[k].se_top, a.points[k - 1].se_top);
    EXPECT_GE(a.points[k].power_top, a.points[k - 1].power_top - tol);
  }
  // psi(6) lies well beyond the bulk edge.
  EXPECT_GT(a.points.back().power_top, 0.9);
}
