#include "specdetect/mp_spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include "specdetect/errors.hpp"

namespace specdetect {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_valid(const AtomicMeasure& H, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("aspect ratio gamma must be positive");
  if (H.max_atom() == 0.0) throw DomainError("population spectrum H = delta_0 is degenerate");
}

struct MapValue {
  cplx value;       // z(v) - z
  cplx derivative;  // z'(v)
};

MapValue evaluate(const AtomicMeasure& H, double gamma, cplx z, cplx v) {
  cplx sum1 = 0.0, sum2 = 0.0;
  const auto t = H.atoms();
  const auto w = H.weights();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const cplx q = 1.0 / (1.0 + t[i] * v);
    const cplx a = w[i] * t[i] * q;
    sum1 += a;
    sum2 += a * t[i] * q;
  }
  const cplx inv = 1.0 / v;
  return {-inv + gamma * sum1 - z, inv * inv - gamma * sum2};
}

// Damped Newton on z(v) = z. Returns nullopt when the iteration stalls or leaves the
// admissible half plane.
std::optional<cplx> newton(const AtomicMeasure& H, double gamma, cplx z, cplx v, bool upper,
                           int max_iter) {
  const double scale = std::max(1.0, std::abs(z));
  const bool strict = z.imag() > 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const auto f = evaluate(H, gamma, z, v);
    if (!std::isfinite(f.value.real()) || !std::isfinite(f.value.imag())) return std::nullopt;
    if (std::abs(f.value) <= 1e-15 * scale * std::max(1.0, std::abs(1.0 / v))) return v;
    if (f.derivative == 0.0) return std::nullopt;
    const cplx step = f.value / f.derivative;
    double lambda = 1.0;
    cplx next = v - step;
    const double fnorm = std::abs(f.value);
    for (int k = 0; k < 40; ++k) {
      next = v - lambda * step;
      const bool admissible = !(strict || upper) || next.imag() > 0.0 || (!strict && next.imag() >= 0.0);
      if (admissible && next != 0.0) {
        const auto fn = evaluate(H, gamma, z, next);
        if (std::abs(fn.value) < fnorm || lambda < 1e-6) break;
      }
      lambda *= 0.5;
    }
    if (strict && next.imag() <= 0.0) return std::nullopt;
    if (upper && next.imag() < 0.0) next = {next.real(), 0.0};
    if (std::abs(next - v) <= 4e-16 * std::abs(v)) return next;
    v = next;
  }
  const auto f = evaluate(H, gamma, z, v);
  if (std::abs(f.value) <= 1e-12 * scale) return v;
  return std::nullopt;
}

// Homotopy in the imaginary part: start far from the real axis where v ~ -1/z, then
// shrink Im z geometrically with Newton warm starts.
std::optional<cplx> cold_solve(const AtomicMeasure& H, double gamma, cplx z, int max_iter) {
  const double spread = H.max_atom() * (1.0 + std::sqrt(gamma)) * (1.0 + std::sqrt(gamma));
  double eta = std::max({z.imag(), spread, std::abs(z.real())}) * 4.0;
  cplx zeta(z.real(), eta);
  cplx v = -1.0 / zeta;
  {
    // fixed point iteration is a contraction far from the axis
    for (int k = 0; k < 200; ++k) {
      cplx s = 0.0;
      for (std::size_t i = 0; i < H.size(); ++i)
        s += H.weights()[i] * H.atoms()[i] / (1.0 + H.atoms()[i] * v);
      const cplx next = 1.0 / (-zeta + gamma * s);
      if (std::abs(next - v) < 1e-15 * std::abs(v)) {
        v = next;
        break;
      }
      v = next;
    }
  }
  auto sol = newton(H, gamma, zeta, v, true, max_iter);
  if (!sol) return std::nullopt;
  v = *sol;
  const double target = std::max(z.imag(), 0.0);
  double factor = 0.5;
  while (eta > target) {
    double next_eta = std::max(target, eta * factor);
    if (next_eta < 1e-300) next_eta = target;
    const cplx znext(z.real(), next_eta);
    auto s = (next_eta > 0.0) ? newton(H, gamma, znext, v, true, max_iter) : std::optional<cplx>{};
    if (next_eta == 0.0) {
      s = newton(H, gamma, znext, v, true, max_iter);
    }
    if (!s) {
      factor = std::sqrt(factor);
      if (factor > 0.999) return std::nullopt;
      continue;
    }
    v = *s;
    eta = next_eta;
    factor = std::max(factor * factor, 1e-3);
    if (eta < 1e-13 * std::max(1.0, std::abs(z.real())) && target == 0.0) {
      auto polished = newton(H, gamma, cplx(z.real(), 0.0), v, true, max_iter);
      if (polished) return polished;
      return std::nullopt;
    }
  }
  return v;
}

double xprime_real(const AtomicMeasure& H, double gamma, double v) {
  double s = 0.0;
  const auto t = H.atoms();
  const auto w = H.weights();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double q = t[i] / (1.0 + t[i] * v);
    s += w[i] * q * q;
  }
  return 1.0 / (v * v) - gamma * s;
}

double x_real(const AtomicMeasure& H, double gamma, double v) {
  double s = 0.0;
  const auto t = H.atoms();
  const auto w = H.weights();
  for (std::size_t i = 0; i < t.size(); ++i) s += w[i] * t[i] / (1.0 + t[i] * v);
  return -1.0 / v + gamma * s;
}

// Root of x'(v) in [a, b] given opposite signs at the ends.
double bisect_xprime(const AtomicMeasure& H, double gamma, double a, double b) {
  double fa = xprime_real(H, gamma, a);
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    if (m == a || m == b) break;
    const double fm = xprime_real(H, gamma, m);
    if ((fm > 0.0) == (fa > 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
    if (std::abs(b - a) <= 1e-15 * std::max(std::abs(a), 1e-300)) break;
  }
  return 0.5 * (a + b);
}

struct Run {
  // Interval of v on which x'(v) > 0; infinite/zero ends flagged.
  double va, vb;
  bool va_open_infinite = false;  // va = -inf or segment starts at 0+
  bool vb_open_infinite = false;  // vb = +inf or segment ends at 0-
};

}  // namespace

bool SupportSet::contains(double x, double tolerance) const {
  for (const auto& iv : intervals)
    if (x >= iv.lower - tolerance && x <= iv.upper + tolerance) return true;
  return false;
}

double SupportSet::distance(double x) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& iv : intervals) {
    if (iv.contains(x)) return 0.0;
    d = std::min({d, std::abs(x - iv.lower), std::abs(x - iv.upper)});
  }
  return d;
}

double StieltjesCurve::density(std::size_t m) const {
  return v[m].imag() / (std::numbers::pi * gamma);
}

double StieltjesCurve::zero_mass() const {
  // F = gamma^{-1} (Fbar - (1 - gamma) delta_0); Fbar puts mass (1 - gamma) + gamma * H({0}) ... at 0.
  double h0 = 0.0;
  if (population.min_atom() == 0.0) h0 = population.weights()[0];
  const double continuous = (1.0 - h0) * std::min(1.0, 1.0 / (gamma * (1.0 - h0)));
  return std::max(0.0, 1.0 - continuous);
}

cplx silverstein_residual(const AtomicMeasure& H, double gamma, cplx z, cplx v) {
  return evaluate(H, gamma, z, v).value;
}

cplx inverse_map(const AtomicMeasure& H, double gamma, cplx v) {
  return evaluate(H, gamma, 0.0, v).value;
}

cplx solve_silverstein(const AtomicMeasure& H, double gamma, cplx z, const SilversteinOptions& options) {
  require_valid(H, gamma);
  if (z.imag() < 0.0) throw DomainError("solve_silverstein requires Im z >= 0");
  auto sol = cold_solve(H, gamma, z, options.max_newton_iterations);
  if (!sol) throw NumericalError("Silverstein solve did not converge at z = " + std::to_string(z.real()) +
                                 " + " + std::to_string(z.imag()) + "i");
  cplx v = *sol;
  if (v.imag() < 0.0) v = {v.real(), 0.0};
  return v;
}

cplx solve_silverstein_from(const AtomicMeasure& H, double gamma, cplx z, cplx guess,
                            const SilversteinOptions& options) {
  require_valid(H, gamma);
  auto sol = newton(H, gamma, z, guess, options.upper_branch, options.max_newton_iterations);
  if (sol && (z.imag() == 0.0 || sol->imag() > 0.0)) return *sol;
  return solve_silverstein(H, gamma, z, options);
}

cplx derivative_map(const AtomicMeasure& H, double gamma, cplx v) {
  if (v == 0.0) throw DomainError("derivative_map requires v != 0");
  const auto t = H.atoms();
  for (double ti : t)
    if (1.0 + ti * v == 0.0) throw DomainError("derivative_map evaluated at a pole 1 + t v = 0");
  const cplx denom = evaluate(H, gamma, 0.0, v).derivative;
  if (std::abs(denom) < 1e-14 || !std::isfinite(std::abs(denom)))
    throw NumericalError("derivative map blows up (support edge)");
  return 1.0 / denom;
}

SupportSet support_intervals(const AtomicMeasure& H, double gamma) {
  require_valid(H, gamma);
  std::vector<double> poles;
  for (double t : H.atoms())
    if (t > 0.0) poles.push_back(-1.0 / t);  // ascending because atoms ascend
  const double tmin = H.atoms()[H.min_atom() > 0.0 ? 0 : 1];
  const double tmax = H.max_atom();

  std::vector<Run> runs;
  const int samples = std::clamp(static_cast<int>(400000 / (H.size() + 1)), 512, 8192);

  // Scan a sample sequence (monotone in v) for maximal runs with x' > 0.
  auto scan = [&](const std::vector<double>& vs, bool left_infinite, bool right_infinite) {
    std::vector<double> fx(vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) fx[i] = xprime_real(H, gamma, vs[i]);
    std::size_t i = 0;
    while (i < vs.size()) {
      if (fx[i] <= 0.0) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j + 1 < vs.size() && fx[j + 1] > 0.0) ++j;
      Run r{};
      if (i == 0 && left_infinite) {
        r.va = vs.front();
        r.va_open_infinite = true;
      } else {
        r.va = (i == 0) ? vs.front() : bisect_xprime(H, gamma, vs[i - 1], vs[i]);
      }
      if (j + 1 == vs.size() && right_infinite) {
        r.vb = vs.back();
        r.vb_open_infinite = true;
      } else {
        r.vb = (j + 1 == vs.size()) ? vs.back() : bisect_xprime(H, gamma, vs[j], vs[j + 1]);
      }
      runs.push_back(r);
      i = j + 1;
    }
  };

  const int logs = samples;
  // (-inf, first pole)
  {
    std::vector<double> vs;
    const double p0 = poles.front();
    for (int k = logs - 1; k >= 0; --k) {
      const double s = -30.0 + 60.0 * (k + 0.5) / logs;  // offsets from 1e-13 to 1e13 in units of |p0|
      vs.push_back(p0 - std::abs(p0) * std::exp(s));
    }
    scan(vs, true, false);
  }
  // between consecutive poles
  for (std::size_t k = 0; k + 1 < poles.size(); ++k) {
    std::vector<double> vs;
    const double a = poles[k], b = poles[k + 1];
    for (int i = 0; i < samples; ++i) {
      const double tau = (i + 0.5) / samples;
      vs.push_back(a + (b - a) * 0.5 * (1.0 - std::cos(std::numbers::pi * tau)));
    }
    scan(vs, false, false);
  }
  // (last pole, 0)
  {
    std::vector<double> vs;
    const double a = poles.back();
    for (int i = 0; i < samples; ++i) {
      const double tau = (i + 0.5) / samples;
      vs.push_back(a + (0.0 - a) * 0.5 * (1.0 - std::cos(std::numbers::pi * tau)));
    }
    for (int k = 1; k <= 40; ++k) vs.push_back(a * std::pow(10.0, -3.0 - 0.25 * k));
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    scan(vs, false, true);
  }
  // (0, +inf)
  {
    std::vector<double> vs;
    for (int k = 0; k < logs; ++k) {
      const double s = -30.0 + 60.0 * (k + 0.5) / logs;
      vs.push_back(std::exp(s) / tmin);
    }
    scan(vs, true, true);
  }
  (void)tmax;

  // Map runs to open x-intervals outside the support.
  struct Gap {
    double lo, hi;
    double v_lo, v_hi;
  };
  std::vector<Gap> gaps;
  for (const auto& r : runs) {
    double xlo, xhi;
    if (r.va_open_infinite) {
      // v -> -inf gives x -> 0; v -> 0+ gives x -> -inf
      xlo = (r.va < 0.0) ? 0.0 : -std::numeric_limits<double>::infinity();
    } else {
      xlo = x_real(H, gamma, r.va);
    }
    if (r.vb_open_infinite) {
      xhi = (r.vb < 0.0) ? std::numeric_limits<double>::infinity() : 0.0;
    } else {
      xhi = x_real(H, gamma, r.vb);
    }
    if (xhi <= 0.0) continue;
    gaps.push_back({std::max(xlo, 0.0), xhi, r.va_open_infinite ? kNaN : r.va,
                    r.vb_open_infinite ? kNaN : r.vb});
  }
  std::sort(gaps.begin(), gaps.end(), [](const Gap& a, const Gap& b) { return a.lo < b.lo; });
  // merge overlaps
  std::vector<Gap> merged;
  for (const auto& g : gaps) {
    if (!merged.empty() && g.lo <= merged.back().hi) {
      if (g.hi > merged.back().hi) {
        merged.back().hi = g.hi;
        merged.back().v_hi = g.v_hi;
      }
    } else {
      merged.push_back(g);
    }
  }
  if (merged.empty() || std::isfinite(merged.back().hi))
    throw NumericalError("support detection failed to locate the upper edge");

  SupportSet out;
  double cursor = 0.0;
  double cursor_v = kNaN;
  for (const auto& g : merged) {
    if (g.lo > cursor) {
      out.intervals.push_back({cursor, g.lo});
      out.edge_v.push_back({cursor_v, g.v_lo});
    }
    cursor = g.hi;
    cursor_v = g.v_hi;
  }
  if (out.intervals.empty()) throw NumericalError("support detection found no support intervals");
  const double l = out.intervals.front().lower;
  const double u = out.intervals.back().upper;
  const double margin = 0.05 * (u - l);
  out.enclosing = {std::max(0.0, l - margin), u + margin};
  if (out.enclosing.lower == l && l > 0.0) out.enclosing.lower = 0.5 * l;
  return out;
}

double GridOptions::epsilon1() const { return std::max(1e-8, c0 * epsilon); }

StieltjesCurve stieltjes_grid(const AtomicMeasure& H, double gamma, const GridOptions& options) {
  if (options.points_per_interval < 16) throw DomainError("points_per_interval must be at least 16");
  if (!(options.epsilon > 0.0)) throw DomainError("epsilon must be positive");
  StieltjesCurve curve{H, gamma, support_intervals(H, gamma), {}, {}, {}, {}, {}, 0};
  const double eps1 = options.epsilon1();
  const double eta0 = 1e-2 * curve.support.enclosing.width();
  const int M = options.points_per_interval;

  for (std::size_t j = 0; j < curve.support.intervals.size(); ++j) {
    const auto iv = curve.support.intervals[j];
    const double h = iv.width() / M;
    std::optional<cplx> seed;
    for (int m = 0; m < M; ++m) {
      const double x = iv.lower + (m + 0.5) * h;
      std::optional<cplx> at_eta0;
      if (seed) {
        auto s = newton(H, gamma, cplx(x, eta0), *seed, true, 100);
        if (s && s->imag() > 0.0) at_eta0 = s;
      }
      if (!at_eta0) at_eta0 = cold_solve(H, gamma, cplx(x, eta0), 100);
      if (!at_eta0) {
        ++curve.dropped_points;
        continue;
      }
      seed = at_eta0;
      cplx prev = *at_eta0;
      double eta = eta0;
      bool converged = false;
      for (int k = 0; k < 80; ++k) {
        eta *= 0.5;
        auto s = newton(H, gamma, cplx(x, eta), prev, true, 100);
        if (!s) break;
        const double diff = std::abs(*s - prev);
        prev = *s;
        if (diff < eps1) {
          converged = true;
          break;
        }
      }
      if (!converged) {
        ++curve.dropped_points;
        continue;
      }
      // Polish on the real axis; keep the eta-limit if polishing leaves the branch.
      cplx v = prev;
      if (auto p = newton(H, gamma, cplx(x, 0.0), prev, true, 100); p && p->imag() > 0.0 &&
                                                                     std::abs(*p - prev) < 10.0 * eps1 + 1e-6) {
        v = *p;
      }
      if (std::abs(silverstein_residual(H, gamma, cplx(x, 0.0), v)) > 1e-8 || !(v.imag() > 0.0)) {
        ++curve.dropped_points;
        continue;
      }
      cplx vp;
      try {
        vp = derivative_map(H, gamma, v);
      } catch (const std::exception&) {
        ++curve.dropped_points;
        continue;
      }
      curve.grid.push_back(x);
      curve.weights.push_back(h);
      curve.interval_index.push_back(static_cast<int>(j));
      curve.v.push_back(v);
      curve.v_prime.push_back(vp);
    }
  }
  if (curve.grid.empty()) throw NumericalError("no grid point converged");
  return curve;
}

double esd_integral(const StieltjesCurve& curve, const std::function<double(double)>& f) {
  double s = 0.0;
  for (std::size_t m = 0; m < curve.size(); ++m) s += f(curve.grid[m]) * curve.density(m) * curve.weights[m];
  const double z = curve.zero_mass();
  if (z > 0.0) s += z * f(0.0);
  return s;
}

double esd_continuous_mass(const StieltjesCurve& curve) {
  double s = 0.0;
  for (std::size_t m = 0; m < curve.size(); ++m) s += curve.density(m) * curve.weights[m];
  return s;
}

double esd_moment(const StieltjesCurve& curve, int k) {
  if (k < 1 || k > 4) throw DomainError("esd_moment supports k in {1,2,3,4}");
  if (curve.size() == 0) throw DomainError("esd_moment needs a converged curve");
  double s = 0.0;
  for (std::size_t m = 0; m < curve.size(); ++m)
    s += std::pow(curve.grid[m], k) * curve.density(m) * curve.weights[m];
  return s;
}

double esd_moment_exact(const AtomicMeasure& H, double gamma, int k) {
  if (k < 0) throw DomainError("moment order must be nonnegative");
  if (k == 0) return 1.0;
  // m_k = sum over (i_1..i_k) with sum_j j i_j = k of
  //   gamma^{s-1} k! / (i_1! ... i_k! (k+1-s)!) prod_j h_j^{i_j},  s = sum_j i_j.
  std::vector<double> h(k + 1);
  for (int j = 1; j <= k; ++j) h[j] = H.moment(j);
  auto fact = [](int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  double total = 0.0;
  std::vector<int> counts(k + 1, 0);
  std::function<void(int, int)> rec = [&](int part, int remaining) {
    if (part > k) {
      if (remaining != 0) return;
      int s = 0;
      double denom = 1.0;
      double prod = 1.0;
      for (int j = 1; j <= k; ++j) {
        s += counts[j];
        denom *= fact(counts[j]);
        prod *= std::pow(h[j], counts[j]);
      }
      denom *= fact(k + 1 - s);
      total += std::pow(gamma, s - 1) * fact(k) / denom * prod;
      return;
    }
    for (int c = 0; c * part <= remaining; ++c) {
      counts[part] = c;
      rec(part + 1, remaining - c * part);
    }
    counts[part] = 0;
  };
  rec(1, k);
  return total;
}

}  // namespace specdetect
