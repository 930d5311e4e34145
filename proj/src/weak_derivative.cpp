#include "specdetect/weak_derivative.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "specdetect/errors.hpp"

namespace specdetect {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Difference of two probability measures as signed atoms (t, weight).
using SignedAtoms = std::vector<std::pair<double, double>>;

SignedAtoms difference(const AtomicMeasure& plus, const AtomicMeasure& minus) {
  SignedAtoms out;
  for (std::size_t i = 0; i < plus.size(); ++i) out.emplace_back(plus.atoms()[i], plus.weights()[i]);
  for (std::size_t i = 0; i < minus.size(); ++i) out.emplace_back(minus.atoms()[i], -minus.weights()[i]);
  return out;
}

// arg(1 + t v) in [0, pi] for v in the closed upper half plane.
double upper_arg(double t, cplx v) {
  const cplx q = 1.0 + t * v;
  const double im = q.imag() > 0.0 ? q.imag() : 0.0;
  return std::atan2(im, q.real());
}

double cdf_from_v(double gamma, const SignedAtoms& nu, cplx v) {
  double s = 0.0;
  for (const auto& [t, w] : nu) s += w * upper_arg(t, v);
  return -gamma * s / std::numbers::pi;
}

cplx st_from_v(double gamma, const SignedAtoms& nu, cplx v, cplx vp, bool* near_pole) {
  cplx s = 0.0;
  for (const auto& [t, w] : nu) {
    const cplx q = 1.0 + t * v;
    if (std::abs(q) < 1e-12) *near_pole = true;
    s += w * t / q;
  }
  return -gamma * vp * s;
}

// Companion transform on the real axis, continuous from above.
cplx real_axis_v(const StieltjesCurve& curve, double x) {
  return solve_silverstein(curve.population, curve.gamma, cplx(x, 0.0));
}

double cdf_at(const StieltjesCurve& curve, const SignedAtoms& nu, double x) {
  if (x <= 0.0) return 0.0;
  return cdf_from_v(curve.gamma, nu, real_axis_v(curve, x));
}

std::vector<PointMass> spike_masses(const StieltjesCurve& curve, const AtomicMeasure& G, double sign) {
  std::vector<PointMass> out;
  for (const auto& r : classify_spikes(curve, G).spikes)
    if (r.supercritical) out.push_back({r.psi, sign * curve.gamma * r.weight});
  return out;
}

// Breakpoints outside the support: support edges and atom locations. Each bounded
// stretch between consecutive breakpoints that lies outside the support gets its value
// from one real-axis evaluation at its midpoint.
std::vector<FlatPiece> outside_pieces(const StieltjesCurve& curve, const SignedAtoms& nu,
                                      const std::vector<PointMass>& atoms) {
  std::vector<double> cuts;
  for (const auto& iv : curve.support.intervals) {
    cuts.push_back(iv.lower);
    cuts.push_back(iv.upper);
  }
  for (const auto& a : atoms) cuts.push_back(a.location);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<FlatPiece> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    if (curve.support.contains(mid)) continue;
    const double value = cdf_at(curve, nu, mid);
    if (value != 0.0) out.push_back({cuts[i], cuts[i + 1], value});
  }
  return out;
}

SignedMeasureCdf build(const StieltjesCurve& curve, const SignedAtoms& nu, std::vector<PointMass> atoms) {
  SignedMeasureCdf out;
  out.grid = curve.grid;
  out.density.resize(curve.size());
  out.cdf.resize(curve.size());
  for (std::size_t m = 0; m < curve.size(); ++m) {
    bool near_pole = false;
    const cplx s = st_from_v(curve.gamma, nu, curve.v[m], curve.v_prime[m], &near_pole);
    if (near_pole) ++out.near_pole_points;
    out.density[m] = s.imag() / std::numbers::pi;
    out.cdf[m] = cdf_from_v(curve.gamma, nu, curve.v[m]);
  }
  std::sort(atoms.begin(), atoms.end(), [](auto& a, auto& b) { return a.location < b.location; });
  out.point_masses = std::move(atoms);
  out.outside = outside_pieces(curve, nu, out.point_masses);
  return out;
}

}  // namespace

double spike_forward_map(const AtomicMeasure& H, double gamma, double s) {
  if (!(s > 0.0)) throw DomainError("spike location must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < H.size(); ++i) {
    const double t = H.atoms()[i];
    if (s == t) throw DomainError("spike location coincides with a population atom");
    sum += H.weights()[i] * t / (s - t);
  }
  return s * (1.0 + gamma * sum);
}

double spike_forward_derivative(const AtomicMeasure& H, double gamma, double s) {
  if (!(s > 0.0)) throw DomainError("spike location must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < H.size(); ++i) {
    const double t = H.atoms()[i];
    if (s == t) throw DomainError("spike location coincides with a population atom");
    sum += H.weights()[i] * t * t / ((s - t) * (s - t));
  }
  return 1.0 - gamma * sum;
}

bool SpikeClassification::any_supercritical() const {
  return std::any_of(spikes.begin(), spikes.end(), [](const SpikeRecord& r) { return r.supercritical; });
}

SpikeClassification classify_spikes(const StieltjesCurve& curve, const AtomicMeasure& G, double tolerance) {
  SpikeClassification out;
  for (std::size_t j = 0; j < G.size(); ++j) {
    SpikeRecord r;
    r.location = G.atoms()[j];
    r.weight = G.weights()[j];
    r.asy_sd = kNaN;
    if (r.location <= 0.0 || curve.population.has_atom(r.location)) {
      r.psi = kNaN;
      r.psi_prime = kNaN;
      out.spikes.push_back(r);
      continue;
    }
    r.psi = spike_forward_map(curve.population, curve.gamma, r.location);
    r.psi_prime = spike_forward_derivative(curve.population, curve.gamma, r.location);
    r.supercritical = r.psi_prime > 0.0 && curve.support.distance(r.psi) > tolerance;
    if (r.supercritical) r.asy_sd = std::sqrt(2.0 * r.location * r.location * r.psi_prime);
    out.spikes.push_back(r);
  }
  return out;
}

SpikeClassification classify_spikes(const StieltjesCurve& curve, const AtomicMeasure& G) {
  return classify_spikes(curve, G, 0.0);
}

std::vector<cplx> weak_derivative_st(const AtomicMeasure& G, const StieltjesCurve& curve) {
  const auto nu = difference(G, curve.population);
  std::vector<cplx> out(curve.size());
  bool near_pole = false;
  for (std::size_t m = 0; m < curve.size(); ++m)
    out[m] = st_from_v(curve.gamma, nu, curve.v[m], curve.v_prime[m], &near_pole);
  return out;
}

double weak_derivative_cdf_at(const StieltjesCurve& curve, const AtomicMeasure& G, double x) {
  return cdf_at(curve, difference(G, curve.population), x);
}

SignedMeasureCdf weak_derivative_cdf(const AtomicMeasure& G, const StieltjesCurve& curve) {
  return build(curve, difference(G, curve.population), spike_masses(curve, G, 1.0));
}

SignedMeasureCdf delta_diff(const AtomicMeasure& G0, const AtomicMeasure& G1, const StieltjesCurve& curve) {
  auto atoms = spike_masses(curve, G1, 1.0);
  for (const auto& a : spike_masses(curve, G0, -1.0)) atoms.push_back(a);
  return build(curve, difference(G1, G0), std::move(atoms));
}

SignedMeasureCdf delta_diff(const SignedMeasureCdf& d0, const SignedMeasureCdf& d1) {
  if (d0.grid != d1.grid) throw DomainError("delta_diff needs both weak derivatives on the same grid");
  SignedMeasureCdf out;
  out.grid = d1.grid;
  out.density.resize(out.grid.size());
  out.cdf.resize(out.grid.size());
  for (std::size_t m = 0; m < out.grid.size(); ++m) {
    out.density[m] = d1.density[m] - d0.density[m];
    out.cdf[m] = d1.cdf[m] - d0.cdf[m];
  }
  out.point_masses = d1.point_masses;
  for (const auto& a : d0.point_masses) out.point_masses.push_back({a.location, -a.weight});
  std::sort(out.point_masses.begin(), out.point_masses.end(),
            [](auto& a, auto& b) { return a.location < b.location; });
  out.near_pole_points = d0.near_pole_points + d1.near_pole_points;

  std::vector<double> cuts;
  for (const auto* d : {&d0, &d1})
    for (const auto& p : d->outside) {
      cuts.push_back(p.lower);
      cuts.push_back(p.upper);
    }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    const double value = d1.outside_value(mid) - d0.outside_value(mid);
    if (value != 0.0) out.outside.push_back({cuts[i], cuts[i + 1], value});
  }
  return out;
}

double SignedMeasureCdf::outside_value(double x) const {
  for (const auto& p : outside)
    if (x > p.lower && x < p.upper) return p.value;
  return 0.0;
}

double SignedMeasureCdf::total_variation(const std::vector<double>& cell_widths) const {
  if (cell_widths.size() != density.size()) throw DomainError("cell widths do not match the grid");
  double tv = 0.0;
  for (std::size_t m = 0; m < density.size(); ++m) tv += std::abs(density[m]) * cell_widths[m];
  for (const auto& a : point_masses) tv += std::abs(a.weight);
  return tv;
}

std::vector<double> trapezoid_cdf(const StieltjesCurve& curve, const SignedMeasureCdf& measure) {
  if (measure.grid != curve.grid) throw DomainError("trapezoid_cdf needs the measure on the curve grid");
  std::vector<double> out(curve.size());
  int current = -1;
  double acc = 0.0;
  for (std::size_t m = 0; m < curve.size(); ++m) {
    const double w = curve.weights[m];
    if (curve.interval_index[m] != current) {
      current = curve.interval_index[m];
      const double lower = curve.support.intervals[current].lower;
      acc = measure.outside_value(lower - 1e-12 * std::max(1.0, lower));
    }
    out[m] = acc + 0.5 * measure.density[m] * w;
    acc += measure.density[m] * w;
  }
  return out;
}

}  // namespace specdetect
