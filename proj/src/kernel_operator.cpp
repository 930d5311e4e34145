#include "specdetect/kernel_operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "specdetect/errors.hpp"

namespace specdetect {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd sqrt_weights(const std::vector<double>& w) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) s[static_cast<Eigen::Index>(i)] = std::sqrt(w[i]);
  return s;
}

// Neighbor used by the diagonal rule: previous point, or the next one for the first row.
std::size_t diagonal_partner(std::size_t i) { return i == 0 ? 1 : i - 1; }

void fill_efficacy(DerivativeSolution& sol, const Eigen::MatrixXd& folded, double ridge, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& b) {
  sol.pairing = -y.dot(b);
  sol.energy = y.dot(folded * y) + ridge * y.squaredNorm();
  if (sol.energy <= 0.0) {
    sol.delta_norm = sol.pairing == 0.0 ? 0.0 : kInf;
  } else {
    sol.delta_norm = sol.pairing / std::sqrt(sol.energy);
  }
}

double ratio_efficacy(double mu, double sigma) {
  if (sigma == 0.0) return mu == 0.0 ? 0.0 : kInf;
  return mu / sigma;
}

// Piecewise linear hat basis on the nodes of one support interval, flat from the interval
// edges to the outermost nodes.
double hat(std::span<const double> nodes, std::size_t i, double y) {
  const double xi = nodes[i];
  if (y == xi) return 1.0;
  if (y < xi) {
    if (i == 0) return 1.0;
    const double xl = nodes[i - 1];
    return y <= xl ? 0.0 : (y - xl) / (xi - xl);
  }
  if (i + 1 == nodes.size()) return 1.0;
  const double xr = nodes[i + 1];
  return y >= xr ? 0.0 : (xr - y) / (xr - xi);
}

}  // namespace

double kernel_value(cplx v1, cplx v2) {
  const double num = 4.0 * v1.imag() * v2.imag();
  const double den = std::norm(v1 - v2);
  if (num <= 0.0) return 0.0;
  if (den == 0.0) return kInf;
  return std::log1p(num / den) / (2.0 * std::numbers::pi * std::numbers::pi);
}

double kernel_eval(const StieltjesCurve& curve, double x, double y) {
  if (!curve.support.contains(x) || !curve.support.contains(y)) return 0.0;
  if (x == y) throw DomainError("kernel is singular on the diagonal");
  const auto& H = curve.population;
  const cplx vx = solve_silverstein(H, curve.gamma, cplx(x, 0.0));
  const cplx vy = solve_silverstein(H, curve.gamma, cplx(y, 0.0));
  return kernel_value(vx, vy);
}

double KernelMatrix::quadratic_form(std::span<const double> f) const {
  if (f.size() != size()) throw DomainError("quadratic_form: function is not on the kernel grid");
  Eigen::VectorXd p(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) p[static_cast<Eigen::Index>(i)] = f[i] * std::sqrt(weights[i]);
  return p.dot(folded * p) + ridge * p.squaredNorm();
}

double KernelMatrix::smallest_regularized_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(folded, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() + ridge;
}

KernelMatrix assemble_diagreg(const StieltjesCurve& curve, const KernelOptions& options) {
  const std::size_t n = curve.size();
  if (n < 2) throw DomainError("kernel assembly needs at least two grid points");
  KernelMatrix K;
  K.grid = curve.grid;
  K.weights = curve.weights;
  K.diagonal_multiplier = options.diagonal_multiplier;
  K.raw.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double k = kernel_value(curve.v[i], curve.v[j]);
      K.raw(ii, jj) = k;
      K.raw(jj, ii) = k;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    K.raw(ii, ii) = options.diagonal_multiplier * K.raw(ii, static_cast<Eigen::Index>(diagonal_partner(i)));
  }
  const Eigen::VectorXd s = sqrt_weights(K.weights);
  K.folded = s.asDiagonal() * K.raw * s.asDiagonal();
  // Exact symmetry after the diagonal scaling.
  K.folded = (0.5 * (K.folded + K.folded.transpose())).eval();
  K.ridge = options.ridge_factor * K.folded.trace() / static_cast<double>(n);
  return K;
}

DiagregSolver::DiagregSolver(KernelMatrix K) : K_(std::move(K)) {
  Eigen::MatrixXd A = K_.folded;
  A.diagonal().array() += K_.ridge;
  llt_.compute(A);
  if (llt_.info() != Eigen::Success) {
    use_lu_ = true;
    lu_.compute(A);
    if (!(lu_.rcond() > 1e-15))
      throw NumericalError("regularized kernel system is numerically singular (rcond " +
                           std::to_string(lu_.rcond()) + ")");
  }
}

DerivativeSolution DiagregSolver::solve(std::span<const double> delta) const {
  const std::size_t n = K_.size();
  if (delta.size() != n) throw DomainError("right-hand side is not on the kernel grid");
  const Eigen::VectorXd s = sqrt_weights(K_.weights);
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) b[static_cast<Eigen::Index>(i)] = s[static_cast<Eigen::Index>(i)] * delta[i];
  const Eigen::VectorXd y = use_lu_ ? Eigen::VectorXd(lu_.solve(-b)) : Eigen::VectorXd(llt_.solve(-b));
  if (!y.allFinite()) throw NumericalError("kernel solve produced non-finite values");
  DerivativeSolution out;
  out.grid = K_.grid;
  out.g.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.g[i] = y[static_cast<Eigen::Index>(i)] / s[static_cast<Eigen::Index>(i)];
  out.residual_norm = (K_.folded * y + K_.ridge * y + b).norm();
  fill_efficacy(out, K_.folded, K_.ridge, y, b);
  return out;
}

DerivativeSolution solve_diagreg(const KernelMatrix& K, std::span<const double> delta) {
  return DiagregSolver(K).solve(delta);
}

CollocationSolution solve_collocation(const AtomicMeasure& H, double gamma, const AtomicMeasure& G0,
                                      const AtomicMeasure& G1, const CollocationOptions& options) {
  if (options.refinement < 1 || options.refinement % 2 == 0)
    throw DomainError("collocation refinement factor must be a positive odd integer");
  // epsilon1 = max(1e-8, c0 * epsilon); pick epsilon so that the grid solver stops at epsilon1.
  GridOptions coarse_opts;
  coarse_opts.points_per_interval = options.coarse_points_per_interval;
  coarse_opts.epsilon = options.epsilon1 / coarse_opts.c0;
  GridOptions dense_opts = coarse_opts;
  dense_opts.points_per_interval = options.coarse_points_per_interval * options.refinement;

  CollocationSolution out{stieltjes_grid(H, gamma, coarse_opts), stieltjes_grid(H, gamma, dense_opts), {}};
  const auto& coarse = out.coarse;
  const auto& dense = out.dense;
  const std::size_t I = coarse.size();
  const std::size_t A = dense.size();

  // Nodes of each support interval, for the hat basis.
  std::vector<std::vector<double>> nodes(coarse.support.intervals.size());
  std::vector<std::size_t> first_node(coarse.support.intervals.size(), 0);
  for (std::size_t t = 0; t < I; ++t) {
    auto& nj = nodes[static_cast<std::size_t>(coarse.interval_index[t])];
    if (nj.empty()) first_node[static_cast<std::size_t>(coarse.interval_index[t])] = t;
    nj.push_back(coarse.grid[t]);
  }
  // Quadrature nodes closer than this to a collocation node are treated as coincident.
  const double coincide = 1e-9 * coarse.support.enclosing.width();

  // Kernel between every quadrature node and every collocation node; coincident pairs
  // get c1 times the largest finite value in that column.
  Eigen::MatrixXd kq(static_cast<Eigen::Index>(A), static_cast<Eigen::Index>(I));
  for (std::size_t t = 0; t < I; ++t) {
    const cplx vt = coarse.v[t];
    double largest = 0.0;
    std::vector<std::size_t> singular;
    for (std::size_t a = 0; a < A; ++a) {
      const double k = std::abs(dense.grid[a] - coarse.grid[t]) <= coincide ? kInf : kernel_value(dense.v[a], vt);
      if (std::isinf(k)) {
        singular.push_back(a);
      } else {
        largest = std::max(largest, k);
      }
      kq(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(t)) = k;
    }
    for (auto a : singular)
      kq(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(t)) = options.diagonal_multiplier * largest;
  }

  // Collocation matrix M(t, i) = sum_a k(y_a, x_t) g_i(y_a) w_a.
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(I));
  for (std::size_t a = 0; a < A; ++a) {
    const auto j = static_cast<std::size_t>(dense.interval_index[a]);
    const auto& nj = nodes[j];
    if (nj.empty()) continue;
    const double y = dense.grid[a];
    // Only the two hats around y are nonzero.
    const auto it = std::upper_bound(nj.begin(), nj.end(), y);
    const std::size_t hi = static_cast<std::size_t>(it - nj.begin());
    const std::size_t first_global = first_node[j];
    for (std::size_t li : {hi == 0 ? std::size_t{0} : hi - 1, std::min(hi, nj.size() - 1)}) {
      const double basis = hat(nj, li, y);
      if (basis == 0.0) continue;
      const std::size_t i = first_global + li;
      for (std::size_t t = 0; t < I; ++t)
        M(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) +=
            kq(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(t)) * basis * dense.weights[a];
      if (hi == 0 || hi >= nj.size()) break;  // flat end: a single hat
    }
  }

  const auto delta_coarse = delta_diff(G0, G1, coarse);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(I));
  for (std::size_t t = 0; t < I; ++t) rhs[static_cast<Eigen::Index>(t)] = -delta_coarse.cdf[t];
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  const double rcond = lu.rcond();
  if (!(rcond > options.min_rcond))
    throw NumericalError("collocation matrix is rank deficient (condition number ~ " + std::to_string(1.0 / rcond) + ")");
  const Eigen::VectorXd coef = lu.solve(rhs);

  auto& sol = out.solution;
  sol.grid = coarse.grid;
  sol.g.assign(coef.data(), coef.data() + coef.size());
  sol.residual_norm = (M * coef - rhs).norm();

  // Efficacy of the realized g, evaluated on the quadrature grid.
  const auto delta_dense = delta_diff(G0, G1, dense);
  const KernelMatrix Kd = assemble_diagreg(dense);
  const Eigen::VectorXd s = sqrt_weights(dense.weights);
  Eigen::VectorXd y(static_cast<Eigen::Index>(A)), b(static_cast<Eigen::Index>(A));
  for (std::size_t a = 0; a < A; ++a) {
    const auto j = static_cast<std::size_t>(dense.interval_index[a]);
    const auto& nj = nodes[j];
    double gval = 0.0;
    const std::size_t first_global = first_node[j];
    for (std::size_t li = 0; li < nj.size(); ++li) {
      const double basis = hat(nj, li, dense.grid[a]);
      if (basis != 0.0) gval += basis * coef[static_cast<Eigen::Index>(first_global + li)];
    }
    y[static_cast<Eigen::Index>(a)] = s[static_cast<Eigen::Index>(a)] * gval;
    b[static_cast<Eigen::Index>(a)] = s[static_cast<Eigen::Index>(a)] * delta_dense.cdf[a];
  }
  fill_efficacy(sol, Kd.folded, Kd.ridge, y, b);
  return out;
}

std::string_view to_string(Regime r) {
  return r == Regime::SubcriticalSolvable ? "subcritical-solvable" : "supercritical-full-power";
}

double asymptotic_power(double efficacy, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (std::isinf(efficacy)) return 1.0;
  const boost::math::normal_distribution<double> normal;
  const double z_alpha = boost::math::quantile(normal, alpha);
  return boost::math::cdf(normal, z_alpha + std::abs(efficacy));
}

EfficacyReport derivative_moments(const DerivativeSolution& solution, double gamma, int h, double alpha) {
  if (h < 1) throw DomainError("local parameter h must be a positive integer");
  EfficacyReport r;
  r.alpha = alpha;
  r.mu = static_cast<double>(h) / gamma * solution.pairing;
  r.sigma = std::sqrt(std::max(0.0, solution.energy));
  r.efficacy = ratio_efficacy(r.mu, r.sigma);
  r.power = asymptotic_power(r.efficacy, alpha);
  return r;
}

std::vector<double> grid_derivative(const StieltjesCurve& curve, const LssFunction& phi) {
  const std::size_t n = curve.size();
  std::vector<double> f(n), out(n);
  for (std::size_t m = 0; m < n; ++m) f[m] = phi(curve.grid[m]);
  for (std::size_t m = 0; m < n; ++m) {
    const bool has_prev = m > 0 && curve.interval_index[m - 1] == curve.interval_index[m];
    const bool has_next = m + 1 < n && curve.interval_index[m + 1] == curve.interval_index[m];
    if (has_prev && has_next) {
      out[m] = (f[m + 1] - f[m - 1]) / (curve.grid[m + 1] - curve.grid[m - 1]);
    } else if (has_next) {
      out[m] = (f[m + 1] - f[m]) / (curve.grid[m + 1] - curve.grid[m]);
    } else if (has_prev) {
      out[m] = (f[m] - f[m - 1]) / (curve.grid[m] - curve.grid[m - 1]);
    } else {
      out[m] = 0.0;
    }
  }
  return out;
}

EfficacyReport lss_moments(const StieltjesCurve& curve, const KernelMatrix& K, const LssFunction& phi,
                           const SignedMeasureCdf& delta, int h, double alpha) {
  if (h < 1) throw DomainError("local parameter h must be a positive integer");
  if (delta.grid != curve.grid || K.grid != curve.grid) throw DomainError("lss_moments: grid mismatch");
  const auto dphi = grid_derivative(curve, phi);
  const double scale = -static_cast<double>(h) / curve.gamma;
  double integral = 0.0;
  for (std::size_t m = 0; m < curve.size(); ++m) integral += dphi[m] * delta.cdf[m] * curve.weights[m];
  for (const auto& piece : delta.outside) integral += piece.value * (phi(piece.upper) - phi(piece.lower));

  EfficacyReport r;
  r.alpha = alpha;
  r.mu = scale * integral;
  r.sigma = std::sqrt(std::max(0.0, K.quadratic_form(dphi)));
  r.efficacy = ratio_efficacy(r.mu, r.sigma);
  r.power = asymptotic_power(r.efficacy, alpha);
  r.regime = Regime::SubcriticalSolvable;
  return r;
}

}  // namespace specdetect
