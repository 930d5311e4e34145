#include "specdetect/optimal_lss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "specdetect/errors.hpp"

namespace specdetect {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kBumpKnots = 65;

double epanechnikov(double u) { return std::max(0.0, 1.0 - u * u); }

Segment classify_knot(const SupportSet& support, double x) {
  if (support.contains(x)) return Segment::Support;
  if (x > support.lower_edge() && x < support.upper_edge()) return Segment::Bridge;
  return Segment::Outside;
}

EfficacyReport full_power_report(EfficacyReport r) {
  r.regime = Regime::SupercriticalFullPower;
  r.efficacy = kInf;
  r.power = 1.0;
  return r;
}

}  // namespace

std::string_view to_string(SolverKind k) { return k == SolverKind::Diagreg ? "diagreg" : "collocation"; }

SolverKind solver_from_string(std::string_view s) {
  if (s == "diagreg") return SolverKind::Diagreg;
  if (s == "collocation") return SolverKind::Collocation;
  throw DomainError("unknown solver '" + std::string(s) + "' (expected diagreg or collocation)");
}

double AlgoConfig::epsilon1() const { return std::max(1e-8, c0 * epsilon); }

GridOptions AlgoConfig::grid_options() const {
  GridOptions g;
  g.points_per_interval = points_per_interval;
  g.epsilon = epsilon;
  g.c0 = c0;
  return g;
}

KernelOptions AlgoConfig::kernel_options() const { return {c1, ridge_factor}; }

CollocationOptions AlgoConfig::collocation_options() const {
  CollocationOptions c;
  c.coarse_points_per_interval = collocation_points_per_interval;
  c.refinement = collocation_refinement;
  c.epsilon1 = epsilon1();
  c.diagonal_multiplier = c1;
  return c;
}

void SpikedModel::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("gamma must be positive");
  if (h < 1) throw DomainError("h must be a positive integer");
  if (n && *n < 1) throw DomainError("sample size n must be positive");
  if (H.is_zero_point_mass()) throw DomainError("population spectrum H = delta_0 is degenerate");
}

int SpikedModel::population_count() const {
  for (int d = 1; d <= 1000000; ++d) {
    bool ok = true;
    for (double w : H.weights()) {
      const double k = w * d;
      if (std::abs(k - std::round(k)) > 1e-8 * d || std::round(k) < 1.0) {
        ok = false;
        break;
      }
    }
    if (ok) return d;
  }
  return static_cast<int>(H.size());
}

int SpikedModel::sample_size() const {
  if (n) return *n;
  return std::max(1, static_cast<int>(std::lround((population_count() + h) / gamma)));
}

SpikeThresholds spike_thresholds(const StieltjesCurve& curve, const AlgoConfig& config) {
  const double v_top = curve.support.edge_v.back().upper;
  if (!(v_top < 0.0)) throw NumericalError("upper support edge has no finite companion transform");
  SpikeThresholds t;
  t.a_pt = -1.0 / v_top;
  t.s_plus = config.s_plus_factor * (1.0 + std::sqrt(curve.gamma)) * t.a_pt;
  t.s_minus = config.s_minus_factor * t.a_pt;
  return t;
}

LssFunction integrate_derivative(const StieltjesCurve& curve, std::span<const double> g) {
  if (g.size() != curve.size()) throw DomainError("derivative is not on the curve grid");
  for (double v : g)
    if (!std::isfinite(v)) throw DomainError("derivative must be finite");
  std::vector<double> knots, values;
  std::vector<Segment> segments;
  auto push = [&](double x, double v, Segment s) {
    knots.push_back(x);
    values.push_back(v);
    segments.push_back(s);
  };
  const auto& support = curve.support;
  if (support.enclosing.lower < support.lower_edge()) push(support.enclosing.lower, 0.0, Segment::Outside);

  double running = 0.0;
  std::size_t m = 0;
  for (std::size_t j = 0; j < support.intervals.size(); ++j) {
    const auto iv = support.intervals[j];
    if (j > 0) push(0.5 * (support.intervals[j - 1].upper + iv.lower), running, Segment::Bridge);
    push(iv.lower, running, Segment::Support);
    double prev_x = iv.lower, prev_g = kInf;
    while (m < curve.size() && curve.interval_index[m] == static_cast<int>(j)) {
      const double x = curve.grid[m];
      running += (prev_g == kInf) ? g[m] * (x - prev_x) : 0.5 * (prev_g + g[m]) * (x - prev_x);
      push(x, running, Segment::Support);
      prev_x = x;
      prev_g = g[m];
      ++m;
    }
    if (prev_g != kInf) running += prev_g * (iv.upper - prev_x);
    push(iv.upper, running, Segment::Support);
  }
  if (support.enclosing.upper > support.upper_edge()) push(support.enclosing.upper, running, Segment::Outside);
  // Leading outside knot takes the value at the lower edge.
  if (segments.front() == Segment::Outside) values.front() = values[1];
  return LssFunction(std::move(knots), std::move(values), std::move(segments)).normalized();
}

LssFunction lss_above_pt(const SpikedModel& model, const SpikeClassification& classification,
                         const StieltjesCurve& curve, const AlgoConfig& config) {
  struct Bump {
    double center, width;
    int side;  // +1 beyond the top edge, -1 below the bottom edge, 0 interior gap
  };
  const auto& support = curve.support;
  const double n = static_cast<double>(model.sample_size());
  std::vector<Bump> bumps;
  for (const auto& r : classification.spikes) {
    if (!r.supercritical) continue;
    const double w = config.n_sd * r.asy_sd / std::sqrt(n);
    const int side = r.psi > support.upper_edge() ? 1 : (r.psi < support.lower_edge() ? -1 : 0);
    bumps.push_back({r.psi, w, side});
  }
  if (bumps.empty()) throw DomainError("lss_above_pt needs at least one separated spike");

  auto value = [&](double x) {
    double v = 0.0;
    for (const auto& b : bumps) {
      if ((b.side > 0 && x >= b.center) || (b.side < 0 && x <= b.center)) return 1.0;
      v = std::max(v, epanechnikov((x - b.center) / b.width));
    }
    return v;
  };

  std::vector<double> knots{support.enclosing.lower, support.enclosing.upper};
  for (const auto& iv : support.intervals) {
    knots.push_back(iv.lower);
    knots.push_back(iv.upper);
  }
  for (const auto& b : bumps)
    for (int k = 0; k < kBumpKnots; ++k) knots.push_back(b.center - b.width + 2.0 * b.width * k / (kBumpKnots - 1));
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  if (knots.front() < 0.0) knots.erase(knots.begin(), std::lower_bound(knots.begin(), knots.end(), 0.0));

  std::vector<double> values(knots.size());
  std::vector<Segment> segments(knots.size());
  for (std::size_t i = 0; i < knots.size(); ++i) {
    values[i] = value(knots[i]);
    const bool in_window = std::any_of(bumps.begin(), bumps.end(), [&](const Bump& b) {
      return std::abs(knots[i] - b.center) < b.width || (b.side > 0 && knots[i] >= b.center) ||
             (b.side < 0 && knots[i] <= b.center);
    });
    segments[i] = in_window ? Segment::Bump : classify_knot(support, knots[i]);
  }
  return LssFunction(std::move(knots), std::move(values), std::move(segments));
}

std::vector<double> scale_direction(const StieltjesCurve& curve) {
  std::vector<double> d(curve.size());
  for (std::size_t m = 0; m < curve.size(); ++m) d[m] = curve.grid[m] * curve.density(m);
  return d;
}

struct OptimalLssSolver::Impl {
  AtomicMeasure H;
  double gamma;
  AlgoConfig config;
  StieltjesCurve curve;
  DiagregSolver solver;
  SpikeThresholds thresholds;

  Impl(AtomicMeasure h, double g, AlgoConfig c)
      : H(std::move(h)),
        gamma(g),
        config(c),
        curve(stieltjes_grid(H, gamma, config.grid_options())),
        solver(assemble_diagreg(curve, config.kernel_options())),
        thresholds(spike_thresholds(curve, config)) {}

  void check(const SpikedModel& model) const {
    model.validate();
    if (!(model.H == H) || model.gamma != gamma)
      throw DomainError("model (H, gamma) differs from the solver's");
    if (classify_spikes(curve, model.G0).any_supercritical())
      throw DomainError("G0 must not contain spikes above the phase transition");
  }

  OptimalLss below(const SpikedModel& model, const AtomicMeasure& G1, bool scale_invariant) const {
    OptimalLss out{LssFunction({0.0}, {0.0}, {Segment::Outside}), {}, {}, {}, {}, false, 0.0};
    if (config.solver == SolverKind::Collocation && !scale_invariant) {
      auto cs = solve_collocation(H, gamma, model.G0, G1, config.collocation_options());
      out.phi = integrate_derivative(cs.coarse, cs.solution.g);
      out.report = derivative_moments(cs.solution, gamma, model.h, config.alpha);
      out.grid = cs.solution.grid;
      out.derivative = std::move(cs.solution.g);
      return out;
    }
    const auto delta = delta_diff(model.G0, G1, curve);
    DerivativeSolution sol = scale_invariant ? solve_projected(delta) : solver.solve(delta.cdf);
    out.phi = integrate_derivative(curve, sol.g);
    out.report = derivative_moments(sol, gamma, model.h, config.alpha);
    out.grid = curve.grid;
    out.derivative = std::move(sol.g);
    return out;
  }

  // (P S P + r I) y = -P b with P the orthogonal projection off W^{1/2} D; y re-projected.
  DerivativeSolution solve_projected(const SignedMeasureCdf& delta) const {
    const auto& K = solver.kernel();
    const auto n = static_cast<Eigen::Index>(K.size());
    const auto D = scale_direction(curve);
    Eigen::VectorXd d(n), b(n), s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      s[i] = std::sqrt(K.weights[static_cast<std::size_t>(i)]);
      d[i] = s[i] * D[static_cast<std::size_t>(i)];
      b[i] = s[i] * delta.cdf[static_cast<std::size_t>(i)];
    }
    const double dd = d.squaredNorm();
    if (!(dd > 0.0)) throw NumericalError("scale direction vanishes on the grid");
    auto project = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x - d * (d.dot(x) / dd); };
    const Eigen::VectorXd Sd = K.folded * d;
    const double dSd = d.dot(Sd);
    // P S P = S - d Sd^T/dd - Sd d^T/dd + d d^T dSd/dd^2
    Eigen::MatrixXd A = K.folded;
    A.noalias() -= (d * Sd.transpose() + Sd * d.transpose()) / dd;
    A.noalias() += d * d.transpose() * (dSd / (dd * dd));
    A = (0.5 * (A + A.transpose())).eval();
    A.diagonal().array() += K.ridge;
    const Eigen::VectorXd rhs = -project(b);
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    Eigen::VectorXd y;
    if (llt.info() == Eigen::Success) {
      y = llt.solve(rhs);
    } else {
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
      y = lu.solve(rhs);
    }
    y = project(y);
    if (!y.allFinite()) throw NumericalError("projected kernel solve produced non-finite values");
    DerivativeSolution sol;
    sol.grid = K.grid;
    sol.g.resize(K.size());
    for (Eigen::Index i = 0; i < n; ++i) sol.g[static_cast<std::size_t>(i)] = y[i] / s[i];
    sol.residual_norm = (A * y - rhs).norm();
    sol.pairing = -y.dot(b);
    sol.energy = y.dot(K.folded * y) + K.ridge * y.squaredNorm();
    sol.delta_norm = sol.energy > 0.0 ? sol.pairing / std::sqrt(sol.energy) : 0.0;
    return sol;
  }

  OptimalLss solve(const SpikedModel& model, bool scale_invariant) const {
    check(model);
    auto classification = classify_spikes(curve, model.G1);
    if (!classification.any_supercritical()) {
      auto out = below(model, model.G1, scale_invariant);
      out.classification = std::move(classification);
      return out;
    }
    const auto true_delta = delta_diff(model.G0, model.G1, curve);
    if (model.h == 1 && model.G1.max_atom() < thresholds.s_plus) {
      auto out = below(model, AtomicMeasure::point(thresholds.s_minus), scale_invariant);
      out.substituted = true;
      out.substitute_spike = thresholds.s_minus;
      out.report = full_power_report(lss_moments(curve, solver.kernel(), out.phi, true_delta, model.h, config.alpha));
      out.classification = std::move(classification);
      return out;
    }
    OptimalLss out{lss_above_pt(model, classification, curve, config), {}, {}, {}, {}, false, 0.0};
    out.report = full_power_report(lss_moments(curve, solver.kernel(), out.phi, true_delta, model.h, config.alpha));
    out.classification = std::move(classification);
    return out;
  }
};

OptimalLssSolver::OptimalLssSolver(AtomicMeasure H, double gamma, AlgoConfig config)
    : impl_(std::make_unique<Impl>(std::move(H), gamma, config)) {}
OptimalLssSolver::~OptimalLssSolver() = default;
OptimalLssSolver::OptimalLssSolver(OptimalLssSolver&&) noexcept = default;
OptimalLssSolver& OptimalLssSolver::operator=(OptimalLssSolver&&) noexcept = default;

const StieltjesCurve& OptimalLssSolver::curve() const { return impl_->curve; }
const KernelMatrix& OptimalLssSolver::kernel() const { return impl_->solver.kernel(); }
const AlgoConfig& OptimalLssSolver::config() const { return impl_->config; }
SpikeThresholds OptimalLssSolver::thresholds() const { return impl_->thresholds; }

OptimalLss OptimalLssSolver::solve(const SpikedModel& model) const { return impl_->solve(model, false); }

OptimalLss OptimalLssSolver::solve_scale_invariant(const SpikedModel& model) const {
  return impl_->solve(model, true);
}

EfficacyReport OptimalLssSolver::evaluate(const LssFunction& phi, const SpikedModel& model) const {
  impl_->check(model);
  const auto delta = delta_diff(model.G0, model.G1, impl_->curve);
  auto r = lss_moments(impl_->curve, impl_->solver.kernel(), phi, delta, model.h, impl_->config.alpha);
  return r;
}

OptimalLss optimal_lss(const SpikedModel& model, const AlgoConfig& config) {
  model.validate();
  return OptimalLssSolver(model.H, model.gamma, config).solve(model);
}

OptimalLss optimal_ls3(const SpikedModel& model, const AlgoConfig& config) {
  model.validate();
  return OptimalLssSolver(model.H, model.gamma, config).solve_scale_invariant(model);
}

}  // namespace specdetect
