#include "specdetect/simulation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

#include "specdetect/errors.hpp"

namespace specdetect {

std::vector<double> ar1_eigenvalues(double rho, int p) {
  if (p < 2) throw DomainError("ar1 dimension p must be at least 2");
  if (rho == 0.0) return std::vector<double>(static_cast<std::size_t>(p), 1.0);
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("ar1 rho must lie in (0, 1)");
  Eigen::MatrixXd S(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) S(i, j) = std::pow(rho, std::abs(i - j));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("ar1 eigen decomposition failed");
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + p);
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

std::mt19937_64 replicate_engine(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t rep) {
  auto split = [](std::uint64_t v) {
    return std::array<std::uint32_t, 2>{static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(v >> 32)};
  };
  const auto a = split(master_seed), b = split(stream), c = split(rep);
  std::seed_seq seq{a[0], a[1], b[0], b[1], c[0], c[1]};
  return std::mt19937_64(seq);
}

std::vector<double> sample_eigenvalues(std::span<const double> population, int n, std::mt19937_64& rng) {
  if (n < 1) throw DomainError("sample size n must be positive");
  const auto p = static_cast<Eigen::Index>(population.size());
  if (p == 0) throw DomainError("empty population spectrum");
  Eigen::VectorXd root(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double t = population[static_cast<std::size_t>(j)];
    if (!(t >= 0.0)) throw DomainError("population eigenvalues must be nonnegative");
    root[j] = std::sqrt(t);
  }
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) X(i, j) = normal(rng) * root[j];
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(p, p);
  S.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose(), 1.0 / n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("sample eigen decomposition failed");
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + p);
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

std::vector<double> sample_eigenvalues(std::span<const double> population, int n, std::uint64_t seed) {
  auto rng = replicate_engine(seed, 0, 0);
  return sample_eigenvalues(population, n, rng);
}

double apply_lss(const LssFunction& phi, std::span<const double> eigenvalues) {
  double s = 0.0;
  for (double x : eigenvalues) s += phi(x);
  return s;
}

void SimConfig::validate() const {
  if (bulk.empty()) throw DomainError("population: bulk eigenvalue list is empty");
  for (double t : bulk)
    if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("population: bulk eigenvalues must be positive");
  if (!(null_spike > 0.0)) throw DomainError("null_spike must be positive");
  if (spikes.empty()) throw DomainError("spikes: at least one alternative spike is required");
  for (double s : spikes)
    if (!(s > 0.0)) throw DomainError("spikes must be positive");
  if (n < 1) throw DomainError("n must be positive");
  if (n_reps < 100) throw DomainError("n_reps must be at least 100");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (threads < 0) throw DomainError("threads must be nonnegative");
}

SpikedModel SimConfig::model(double spike) const {
  SpikedModel m{AtomicMeasure::uniform(bulk), AtomicMeasure::point(null_spike), AtomicMeasure::point(spike),
                gamma(), 1, n};
  return m;
}

std::vector<double> SimConfig::population(double spike) const {
  std::vector<double> pop(bulk);
  pop.push_back(spike);
  return pop;
}

double empirical_critical_value(std::vector<double> values, double alpha) {
  if (values.empty()) throw DomainError("no values to calibrate on");
  const auto m = values.size();
  auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(m) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, m);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k - 1), values.end());
  return values[k - 1];
}

std::vector<double> parallel_replicates(int count, int threads, const std::function<double(int)>& body) {
  std::vector<double> out(static_cast<std::size_t>(count));
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = body(i);
    return out;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        out[static_cast<std::size_t>(i)] = body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

namespace {

constexpr std::uint64_t kNullStream = 0;

double rejection_rate(std::span<const double> stats, double critical) {
  const auto hits = std::count_if(stats.begin(), stats.end(), [&](double s) { return s > critical; });
  return static_cast<double>(hits) / static_cast<double>(stats.size());
}

double binomial_se(double p, int reps) { return std::sqrt(p * (1.0 - p) / reps); }

// Sample eigenvalues for `count` replicates of one stream, stored by replicate.
std::vector<std::vector<double>> draw(const SimConfig& c, const std::vector<double>& pop, std::uint64_t stream,
                                      int count) {
  std::vector<std::vector<double>> eig(static_cast<std::size_t>(count));
  parallel_replicates(count, c.threads, [&](int r) {
    auto rng = replicate_engine(c.seed, stream, static_cast<std::uint64_t>(r));
    eig[static_cast<std::size_t>(r)] = sample_eigenvalues(pop, c.n, rng);
    return 0.0;
  });
  return eig;
}

std::vector<double> statistics(const LssFunction& phi, const std::vector<std::vector<double>>& eig,
                               std::size_t begin, std::size_t end) {
  std::vector<double> out;
  out.reserve(end - begin);
  for (std::size_t r = begin; r < end; ++r) out.push_back(apply_lss(phi, eig[r]));
  return out;
}

std::vector<double> top(const std::vector<std::vector<double>>& eig, std::size_t begin, std::size_t end) {
  std::vector<double> out;
  for (std::size_t r = begin; r < end; ++r) out.push_back(eig[r].front());
  return out;
}

std::pair<double, double> mean_sd(std::span<const double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

PowerCurve power_experiment(const SimConfig& config) {
  config.validate();
  const int reps = config.n_reps;
  const auto half = static_cast<std::size_t>(reps);
  const auto null_eig = draw(config, config.population(config.null_spike), kNullStream, 2 * reps);

  OptimalLssSolver solver(AtomicMeasure::uniform(config.bulk), config.gamma(), config.algo);

  PowerCurve out;
  out.n = config.n;
  out.p = config.p();
  out.n_reps = reps;
  out.alpha = config.alpha;
  out.seed = config.seed;
  out.a_pt = solver.thresholds().a_pt;
  out.critical_top = empirical_critical_value(top(null_eig, 0, half), config.alpha);
  out.level_top = rejection_rate(top(null_eig, half, 2 * half), out.critical_top);

  for (std::size_t k = 0; k < config.spikes.size(); ++k) {
    const double spike = config.spikes[k];
    const auto lss = solver.solve(config.model(spike));
    PowerPoint pt;
    pt.spike = spike;
    pt.regime = lss.report.regime;
    pt.predicted_power = lss.report.power;
    pt.critical_lss = empirical_critical_value(statistics(lss.phi, null_eig, 0, half), config.alpha);
    pt.level_lss = rejection_rate(statistics(lss.phi, null_eig, half, 2 * half), pt.critical_lss);

    const auto alt_eig = draw(config, config.population(spike), kNullStream + 1 + k, reps);
    pt.power_lss = rejection_rate(statistics(lss.phi, alt_eig, 0, half), pt.critical_lss);
    pt.power_top = rejection_rate(top(alt_eig, 0, half), out.critical_top);
    pt.se_lss = binomial_se(pt.power_lss, reps);
    pt.se_top = binomial_se(pt.power_top, reps);
    out.points.push_back(pt);
  }
  return out;
}

ShiftSummary mean_shift_experiment(const SimConfig& base, double spike) {
  SimConfig config = base;
  config.spikes = {spike};
  config.validate();
  const int reps = config.n_reps;
  const auto all = static_cast<std::size_t>(reps);
  OptimalLssSolver solver(AtomicMeasure::uniform(config.bulk), config.gamma(), config.algo);
  const auto lss = solver.solve(config.model(spike));
  const auto null_eig = draw(config, config.population(config.null_spike), kNullStream, reps);
  const auto alt_eig = draw(config, config.population(spike), 1, reps);

  ShiftSummary s;
  s.predicted_efficacy = lss.report.efficacy;
  s.null_statistics = statistics(lss.phi, null_eig, 0, all);
  s.alt_statistics = statistics(lss.phi, alt_eig, 0, all);
  s.null_top = top(null_eig, 0, all);
  s.alt_top = top(alt_eig, 0, all);
  std::tie(s.null_mean, s.null_sd) = mean_sd(s.null_statistics);
  if (!(s.null_sd > 0.0)) throw NumericalError("LSS statistic has zero spread under the null");
  std::vector<double> z(s.alt_statistics.size());
  for (std::size_t r = 0; r < z.size(); ++r) z[r] = (s.alt_statistics[r] - s.null_mean) / s.null_sd;
  std::tie(s.alt_mean, s.alt_sd) = mean_sd(z);
  return s;
}

}  // namespace specdetect
