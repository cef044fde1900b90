#include "countfix/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <utility>

namespace countfix {

namespace {

constexpr double kSamplerQuantile = 1.0 - 1e-12;
constexpr std::uint64_t kChunk = 1u << 14;

unsigned resolve_threads(unsigned threads) {
  if (threads != 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs body(shot, acc) for every shot in [0, shots) and sums the per-worker
// accumulators. The result is independent of scheduling as long as merge is
// commutative and associative.
template <class Acc, class Body, class Merge>
Acc run_shots(std::uint64_t shots, unsigned threads, Body body, Merge merge) {
  const std::uint64_t chunks = (shots + kChunk - 1) / kChunk;
  const unsigned workers =
      static_cast<unsigned>(std::min<std::uint64_t>(resolve_threads(threads), chunks));

  std::vector<Acc> partial(std::max(workers, 1u));
  std::atomic<std::uint64_t> next{0};
  auto work = [&](Acc& acc) {
    for (std::uint64_t c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) {
      const std::uint64_t end = std::min(shots, (c + 1) * kChunk);
      for (std::uint64_t shot = c * kChunk; shot < end; ++shot) body(shot, acc);
    }
  };

  if (workers <= 1) {
    work(partial[0]);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back([&, w] { work(partial[w]); });
  }

  Acc result = std::move(partial[0]);
  for (std::size_t w = 1; w < partial.size(); ++w) merge(result, std::move(partial[w]));
  return result;
}

void bump(std::vector<std::uint64_t>& counts, std::size_t m) {
  if (m >= counts.size()) counts.resize(m + 1, 0);
  ++counts[m];
}

void add_into(std::vector<std::uint64_t>& into, const std::vector<std::uint64_t>& from) {
  if (from.size() > into.size()) into.resize(from.size(), 0);
  for (std::size_t i = 0; i < from.size(); ++i) into[i] += from[i];
}

std::size_t draw_from_cdf(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) return cdf.size() - 1;
  return static_cast<std::size_t>(it - cdf.begin());
}

}  // namespace

SplitMix64 shot_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t shot) {
  std::uint64_t key = SplitMix64::mix(seed + SplitMix64::kGamma);
  key = SplitMix64::mix(key ^ (stream + 2 * SplitMix64::kGamma));
  key = SplitMix64::mix(key ^ (shot + 3 * SplitMix64::kGamma));
  return SplitMix64(key);
}

PoissonSampler::PoissonSampler(double lambda) {
  if (!std::isfinite(lambda) || lambda < 0.0 || lambda > kMaxSampledLambda)
    throw std::domain_error("Poisson sampling supports 0 <= lambda <= 1000");
  const long long hard_stop =
      static_cast<long long>(lambda + 50.0 * std::sqrt(lambda) + 50.0);
  double cumulative = 0.0;
  for (long long d = 0;; ++d) {
    cumulative += poisson_pmf(lambda, d);
    cdf_.push_back(cumulative);
    if (cumulative >= kSamplerQuantile || d >= hard_stop) break;
  }
}

std::size_t PoissonSampler::operator()(SplitMix64& rng) const {
  return draw_from_cdf(cdf_, rng.uniform());
}

PriorSampler::PriorSampler(const NumberPrior& prior) {
  if (prior.probs.empty()) throw std::domain_error("prior is empty");
  cdf_.resize(prior.probs.size());
  std::partial_sum(prior.probs.begin(), prior.probs.end(), cdf_.begin());
  // Rounding can leave the last entries a hair below 1; park the excess on the
  // last n with positive mass.
  std::size_t last = prior.probs.size() - 1;
  while (last > 0 && prior.probs[last] == 0.0) --last;
  for (std::size_t n = last; n < cdf_.size(); ++n) cdf_[n] = 1.0;
}

std::size_t PriorSampler::operator()(SplitMix64& rng) const {
  return draw_from_cdf(cdf_, rng.uniform());
}

ShotSampler::ShotSampler(const DetectorParams& params)
    : params_((params.validate(), params)), dark_(params.lambda) {}

std::size_t ShotSampler::operator()(std::size_t n, SplitMix64& rng) const {
  const double survive = 1.0 - params_.p_loss;
  std::size_t m = 0;
  for (std::size_t photon = 0; photon < n; ++photon)
    if (rng.uniform() < survive) ++m;
  return m + dark_(rng);
}

std::size_t sample_shot(const DetectorParams& params, std::size_t n, SplitMix64& rng) {
  return ShotSampler(params)(n, rng);
}

void ShotConfig::validate() const {
  params.validate();
  if (shots < 1) throw std::domain_error("shots must be >= 1");
}

std::vector<double> EmpiricalColumn::frequencies() const {
  std::vector<double> freq(counts.size());
  for (std::size_t m = 0; m < counts.size(); ++m)
    freq[m] = static_cast<double>(counts[m]) / static_cast<double>(total);
  return freq;
}

std::vector<EmpiricalColumn> empirical_matrix(const ShotConfig& config, std::size_t n_max,
                                              unsigned threads) {
  config.validate();
  const ShotSampler sampler(config.params);

  std::vector<EmpiricalColumn> columns;
  columns.reserve(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n) {
    auto counts = run_shots<std::vector<std::uint64_t>>(
        config.shots, threads,
        [&](std::uint64_t shot, std::vector<std::uint64_t>& acc) {
          SplitMix64 rng = shot_stream(config.seed, n, shot);
          bump(acc, sampler(n, rng));
        },
        [](std::vector<std::uint64_t>& into, std::vector<std::uint64_t>&& from) {
          add_into(into, from);
        });
    columns.push_back({n, std::move(counts), config.shots});
  }
  return columns;
}

std::uint64_t JointHistogram::outcome_count(std::size_t m) const {
  if (m >= counts.size()) return 0;
  return std::accumulate(counts[m].begin(), counts[m].end(), std::uint64_t{0});
}

std::vector<double> JointHistogram::conditional(std::size_t m) const {
  const std::uint64_t seen = outcome_count(m);
  if (seen == 0) return {};
  std::vector<double> freq(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n)
    freq[n] = static_cast<double>(counts[m][n]) / static_cast<double>(seen);
  return freq;
}

JointHistogram simulate_joint(const ShotConfig& config, const NumberPrior& prior,
                              unsigned threads) {
  config.validate();
  const ShotSampler sampler(config.params);
  const PriorSampler draw_n(prior);
  const std::size_t width = prior.probs.size();

  using Table = std::vector<std::vector<std::uint64_t>>;
  Table counts = run_shots<Table>(
      config.shots, threads,
      [&](std::uint64_t shot, Table& acc) {
        SplitMix64 rng = shot_stream(config.seed, kJointStream, shot);
        const std::size_t n = draw_n(rng);
        const std::size_t m = sampler(n, rng);
        if (m >= acc.size()) acc.resize(m + 1, std::vector<std::uint64_t>(width, 0));
        ++acc[m][n];
      },
      [width](Table& into, Table&& from) {
        if (from.size() > into.size()) into.resize(from.size(), std::vector<std::uint64_t>(width, 0));
        for (std::size_t m = 0; m < from.size(); ++m) add_into(into[m], from[m]);
      });

  return JointHistogram{prior.n_max(), std::move(counts), config.shots};
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  const std::size_t len = std::max(p.size(), q.size());
  double l1 = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double a = i < p.size() ? p[i] : 0.0;
    const double b = i < q.size() ? q[i] : 0.0;
    l1 += std::abs(a - b);
  }
  return 0.5 * l1;
}

}  // namespace countfix
