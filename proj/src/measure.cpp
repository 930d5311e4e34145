#include "specdetect/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "specdetect/errors.hpp"

namespace specdetect {

namespace {

struct Canonical {
  std::vector<double> atoms;
  std::vector<double> weights;
};

Canonical canonicalize(std::vector<double> atoms, std::vector<double> weights) {
  if (atoms.empty()) throw DomainError("atomic measure needs at least one atom");
  if (atoms.size() != weights.size())
    throw DomainError("atoms and weights have different lengths (" + std::to_string(atoms.size()) +
                      " vs " + std::to_string(weights.size()) + ")");
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (!std::isfinite(atoms[i]) || atoms[i] < 0.0)
      throw DomainError("atom " + std::to_string(i) + " must be finite and nonnegative");
    if (!std::isfinite(weights[i]) || weights[i] <= 0.0)
      throw DomainError("weight " + std::to_string(i) + " must be finite and positive");
  }
  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return atoms[a] < atoms[b]; });
  Canonical out;
  for (auto i : order) {
    if (!out.atoms.empty() && out.atoms.back() == atoms[i]) {
      out.weights.back() += weights[i];
    } else {
      out.atoms.push_back(atoms[i]);
      out.weights.push_back(weights[i]);
    }
  }
  return out;
}

}  // namespace

AtomicMeasure::AtomicMeasure(std::vector<double> atoms, std::vector<double> weights) {
  auto c = canonicalize(std::move(atoms), std::move(weights));
  const double total = std::accumulate(c.weights.begin(), c.weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12)
    throw DomainError("weights must sum to 1 (got " + std::to_string(total) + ")");
  for (auto& w : c.weights) w /= total;
  atoms_ = std::move(c.atoms);
  weights_ = std::move(c.weights);
}

AtomicMeasure AtomicMeasure::uniform(std::vector<double> atoms) {
  std::vector<double> w(atoms.size(), 1.0);
  return normalized(std::move(atoms), std::move(w));
}

AtomicMeasure AtomicMeasure::point(double location) { return AtomicMeasure({location}, {1.0}); }

AtomicMeasure AtomicMeasure::normalized(std::vector<double> atoms, std::vector<double> weights) {
  auto c = canonicalize(std::move(atoms), std::move(weights));
  const double total = std::accumulate(c.weights.begin(), c.weights.end(), 0.0);
  AtomicMeasure m;
  m.atoms_ = std::move(c.atoms);
  m.weights_ = std::move(c.weights);
  for (auto& w : m.weights_) w /= total;
  return m;
}

double AtomicMeasure::moment(int k) const {
  double s = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) s += weights_[i] * std::pow(atoms_[i], k);
  return s;
}

bool AtomicMeasure::is_zero_point_mass() const { return atoms_.size() == 1 && atoms_[0] == 0.0; }

bool AtomicMeasure::has_atom(double location) const {
  return std::binary_search(atoms_.begin(), atoms_.end(), location);
}

AtomicMeasure AtomicMeasure::mixture(const AtomicMeasure& other, double eps) const {
  if (!(eps >= 0.0 && eps <= 1.0)) throw DomainError("mixture weight must lie in [0, 1]");
  std::vector<double> atoms;
  std::vector<double> weights;
  for (std::size_t i = 0; i < size(); ++i) {
    if (eps < 1.0) {
      atoms.push_back(atoms_[i]);
      weights.push_back((1.0 - eps) * weights_[i]);
    }
  }
  for (std::size_t i = 0; i < other.size(); ++i) {
    if (eps > 0.0) {
      atoms.push_back(other.atoms_[i]);
      weights.push_back(eps * other.weights_[i]);
    }
  }
  return normalized(std::move(atoms), std::move(weights));
}

AtomicMeasure AtomicMeasure::scaled(double c) const {
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("scale factor must be positive");
  auto atoms = atoms_;
  for (auto& a : atoms) a *= c;
  return normalized(std::move(atoms), weights_);
}

}  // namespace specdetect
