#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "specdetect/classical_tests.hpp"
#include "specdetect/errors.hpp"
#include "specdetect/optimal_lss.hpp"
#include "specdetect/simulation.hpp"

using namespace specdetect;

namespace {

const AtomicMeasure kIdentity = AtomicMeasure::point(1.0);

const StieltjesCurve& identity_curve() {
  static const StieltjesCurve c = stieltjes_grid(kIdentity, 0.5);
  return c;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> on_grid(const LssFunction& f, const StieltjesCurve& c) {
  std::vector<double> out(c.size());
  for (std::size_t m = 0; m < c.size(); ++m) out[m] = f(c.grid[m]);
  return out;
}

}  // namespace

TEST(Catalog, IdsInOrder) {
  const std::vector<std::string_view> expected{"lrt-identity", "mauchly",     "john-identity", "john-sphericity",
                                               "nagao",        "ledoit-wolf", "fisher-2010",   "omh-identity",
                                               "omh-sphericity", "regularized-lrt"};
  const auto cat = test_catalog();
  ASSERT_EQ(cat.size(), expected.size());
  for (std::size_t i = 0; i < cat.size(); ++i) {
    EXPECT_EQ(cat[i].test_id, expected[i]);
    EXPECT_EQ(&catalog_entry(expected[i]), &cat[i]);
  }
  EXPECT_THROW(catalog_entry("bartlett"), DomainError);
  EXPECT_EQ(to_string(catalog_entry("mauchly").null_kind), "sphericity");
  EXPECT_EQ(to_string(catalog_entry("nagao").null_kind), "identity");
}

TEST(Catalog, IdentityNullFormulas) {
  const double g = 0.5;
  const auto mo = EsdMoments::exact(kIdentity, g);
  EXPECT_NEAR(mo[1], 1.0, 1e-15);
  EXPECT_NEAR(mo[2], 1.0 + g, 1e-15);
  const CatalogParameters params;
  const double z = omh_singularity(params.omh_spike, g);
  EXPECT_NEAR(z, 1.5 * (1.0 + 0.5 / 0.5), 1e-15);
  for (double x : {0.2, 1.0, 2.3}) {
    EXPECT_NEAR(equivalent_formula(catalog_entry("lrt-identity"), mo, g)(x), x - std::log(x) - 1.0, 1e-15);
    EXPECT_NEAR(equivalent_formula(catalog_entry("nagao"), mo, g)(x), (x - 1.0) * (x - 1.0), 1e-15);
    EXPECT_NEAR(equivalent_formula(catalog_entry("ledoit-wolf"), mo, g)(x), x * x - 3.0 * x, 1e-14);
    EXPECT_NEAR(equivalent_formula(catalog_entry("omh-identity"), mo, g)(x), -std::log(z - x), 1e-15);
    EXPECT_NEAR(equivalent_formula(catalog_entry("omh-sphericity"), mo, g)(x), -std::log(z - x) - x, 1e-15);
    EXPECT_NEAR(equivalent_formula(catalog_entry("regularized-lrt"), mo, g)(x), x - std::log(x + 1.0), 1e-15);
  }
}

TEST(Catalog, EquivalencesUnderIdentityNull) {
  // With m1 = 1 the sphericity forms collapse onto their identity counterparts.
  for (double g : {0.1, 0.5, 2.0}) {
    const auto mo = EsdMoments::exact(kIdentity, g);
    const auto lw = equivalent_formula(catalog_entry("ledoit-wolf"), mo, g);
    const auto john = equivalent_formula(catalog_entry("john-sphericity"), mo, g);
    const auto lrt = equivalent_formula(catalog_entry("lrt-identity"), mo, g);
    const auto mauchly = equivalent_formula(catalog_entry("mauchly"), mo, g);
    for (double x = 0.05; x < 6.0; x += 0.37) {
      EXPECT_NEAR(lw(x), john(x), 1e-12 * std::max(1.0, std::abs(lw(x))));
      EXPECT_NEAR(lrt(x), mauchly(x), 1e-12 * std::max(1.0, std::abs(lrt(x))));
    }
  }
}

TEST(Catalog, EquivalentLssOnCurve) {
  const auto& c = identity_curve();
  for (const auto& e : test_catalog()) {
    const auto phi = equivalent_lss(e, c);
    EXPECT_TRUE(phi.is_analytic());
    EXPECT_EQ(phi.label(), e.test_id);
    const auto f = equivalent_formula(e, EsdMoments::exact(kIdentity, 0.5), 0.5);
    for (double x : {c.support.lower_edge(), 1.0, c.support.upper_edge()}) EXPECT_EQ(phi(x), f(x)) << e.test_id;
  }
}

TEST(Catalog, OmhSingularityMustClearSupport) {
  const auto& c = identity_curve();
  EXPECT_THROW(omh_singularity(1.0, 0.5), DomainError);
  EXPECT_THROW(equivalent_lss(catalog_entry("omh-identity"), c, {0.9, 1.0}), DomainError);
  // At the transition z(t) is exactly the upper edge.
  EXPECT_THROW(equivalent_lss(catalog_entry("omh-identity"), c, {1.0 + std::sqrt(0.5), 1.0}), DomainError);
  EXPECT_NO_THROW(equivalent_lss(catalog_entry("omh-sphericity"), c, {1.2, 1.0}));
  EXPECT_THROW(equivalent_lss(catalog_entry("regularized-lrt"), c, {1.5, -1.0}), DomainError);
}

TEST(Statistic, TrivialSpectra) {
  const std::vector<double> ones(10, 1.0);
  EXPECT_NEAR(evaluate_statistic(catalog_entry("lrt-identity"), ones, 20), 0.0, 1e-14);
  EXPECT_NEAR(evaluate_statistic(catalog_entry("mauchly"), ones, 20), 0.0, 1e-14);
  EXPECT_NEAR(evaluate_statistic(catalog_entry("john-sphericity"), ones, 20), 0.0, 1e-14);
  EXPECT_NEAR(evaluate_statistic(catalog_entry("nagao"), ones, 20), 0.0, 1e-14);
  EXPECT_NEAR(evaluate_statistic(catalog_entry("john-identity"), ones, 20), 10.0, 1e-14);
  EXPECT_NEAR(evaluate_statistic(catalog_entry("ledoit-wolf"), ones, 20), -5.0, 1e-13);
  EXPECT_NEAR(evaluate_statistic(catalog_entry("fisher-2010"), ones, 20), 1.0, 1e-14);
  EXPECT_NEAR(evaluate_statistic(catalog_entry("regularized-lrt"), ones, 20), 10.0 * (1.0 - std::log(2.0)), 1e-13);
  // Mauchly is invariant under scaling, the identity LRT is not.
  const std::vector<double> twos(10, 2.0);
  EXPECT_NEAR(evaluate_statistic(catalog_entry("mauchly"), twos, 20), 0.0, 1e-13);
  EXPECT_GT(evaluate_statistic(catalog_entry("lrt-identity"), twos, 20), 0.0);
}

TEST(Statistic, Errors) {
  const std::vector<double> with_zero{0.0, 1.0, 2.0};
  EXPECT_THROW(evaluate_statistic(catalog_entry("lrt-identity"), with_zero, 10), DomainError);
  EXPECT_THROW(evaluate_statistic(catalog_entry("mauchly"), with_zero, 10), DomainError);
  EXPECT_THROW(evaluate_statistic(catalog_entry("nagao"), std::vector<double>{}, 10), DomainError);
  EXPECT_THROW(evaluate_statistic(catalog_entry("nagao"), with_zero, 0), DomainError);
  const std::vector<double> big{1.0, 10.0};
  EXPECT_THROW(evaluate_statistic(catalog_entry("omh-identity"), big, 4), DomainError);
}

TEST(Statistic, OmhIsTheLssSum) {
  const std::vector<double> eig{0.5, 1.0, 1.7};
  const double z = omh_singularity(1.5, 3.0 / 6.0);
  EXPECT_NEAR(evaluate_statistic(catalog_entry("omh-identity"), eig, 6),
              -std::log(z - 0.5) - std::log(z - 1.0) - std::log(z - 1.7), 1e-14);
}

TEST(Linearize, MauchlyJohnAndIdentity) {
  const auto& c = identity_curve();
  const auto x = LssFunction::analytic([](double v) { return v; }, c.grid);
  const auto logx = LssFunction::analytic([](double v) { return std::log(v); }, c.grid);
  const auto x2 = LssFunction::analytic([](double v) { return v * v; }, c.grid);

  // Mauchly per coordinate: log r - s.
  const BivariateFunction mauchly{[](double r, double s) { return std::log(r) - s; },
                                  [](double r, double) { return std::array<double, 2>{1.0 / r, -1.0}; }};
  const auto jm = linearize(mauchly, x, logx, c);
  EXPECT_LE(centered_mad(on_grid(jm, c), on_grid(equivalent_lss(catalog_entry("mauchly"), c), c)), 1e-3);

  // John per coordinate: s / r^2 - 1.
  const BivariateFunction john{[](double r, double s) { return s / (r * r) - 1.0; },
                               [](double r, double s) { return std::array<double, 2>{-2.0 * s / (r * r * r), 1.0 / (r * r)}; }};
  const auto jj = linearize(john, x, x2, c);
  EXPECT_LE(centered_mad(on_grid(jj, c), on_grid(equivalent_lss(catalog_entry("john-sphericity"), c), c)), 1e-3);
  EXPECT_TRUE(jj.is_analytic());

  const BivariateFunction first{[](double r, double) { return r; },
                                [](double, double) { return std::array<double, 2>{1.0, 0.0}; }};
  const auto ji = linearize(first, x, x2, c);
  for (double v : {0.3, 1.0, 2.5}) EXPECT_DOUBLE_EQ(ji(v), v);
}

TEST(Linearize, ConstantLinearizationThrows) {
  const auto& c = identity_curve();
  const auto x = LssFunction::analytic([](double v) { return v; }, c.grid);
  const BivariateFunction cancel{[](double r, double s) { return r - s; },
                                 [](double, double) { return std::array<double, 2>{1.0, -1.0}; }};
  EXPECT_THROW(linearize(cancel, x, x, c), DomainError);
  EXPECT_THROW(linearize(BivariateFunction{}, x, x, c), DomainError);
}

TEST(PolynomialLss, EvaluatesCoefficients) {
  const auto& c = identity_curve();
  const std::vector<double> coeffs{1.0, -2.0, 0.0, 0.5};
  const auto phi = polynomial_lss(coeffs, c);
  for (double v : {0.3, 1.0, 2.5}) EXPECT_NEAR(phi(v), 1.0 - 2.0 * v + 0.5 * v * v * v, 1e-14);
  EXPECT_THROW(polynomial_lss(std::vector<double>{}, c), DomainError);
  EXPECT_THROW(polynomial_lss(std::vector<double>(6, 1.0), c), DomainError);
}

TEST(Catalog, NoTestBeatsTheOptimalLss) {
  const OptimalLssSolver solver(kIdentity, 0.5);
  for (double t : {1.3, 1.5, 1.65}) {
    const SpikedModel model{kIdentity, kIdentity, AtomicMeasure::point(t), 0.5, 1, 500};
    const double best = solver.solve(model).report.power;
    for (const auto& e : test_catalog()) {
      const auto r = solver.evaluate(equivalent_lss(e, solver.curve()), model);
      EXPECT_LE(r.power, best + 2e-2) << e.test_id << " t=" << t;
    }
    // The likelihood-ratio entry at the true spike is itself optimal.
    const auto omh = solver.evaluate(equivalent_lss(catalog_entry("omh-identity"), solver.curve(), {t, 1.0}), model);
    EXPECT_NEAR(omh.power, best, 2e-2) << t;
  }
}

TEST(Catalog, OriginalFormsTrackEquivalentLssUnderSimulation) {
  const int p = 100, n = 200;
  const auto pop = ar1_eigenvalues(0.5, p);
  const auto H = AtomicMeasure::uniform(pop);
  const double gamma = static_cast<double>(p) / n;
  const auto curve = stieltjes_grid(H, gamma);
  for (std::string_view id : {"ledoit-wolf", "john-sphericity", "mauchly", "lrt-identity"}) {
    const auto& e = catalog_entry(id);
    const auto phi = equivalent_lss(e, curve);
    std::vector<double> original, lss;
    for (int rep = 0; rep < 200; ++rep) {
      auto rng = replicate_engine(17, 0, static_cast<std::uint64_t>(rep));
      const auto eig = sample_eigenvalues(pop, n, rng);
      original.push_back(evaluate_statistic(e, eig, n));
      lss.push_back(apply_lss(phi, eig));
    }
    EXPECT_GE(std::abs(correlation(original, lss)), 0.95) << id;
  }
}
