#pragma once
// Seeded shot-by-shot simulation of the loss + dark-count detector. Used as an
// independent check on the analytic matrices and posteriors.
//
// Randomness comes from SplitMix64 (Steele, Lea & Flood, "Fast splittable
// pseudorandom number generators", OOPSLA 2014). Every shot owns a substream
// whose key is derived from (seed, stream, shot index), so results do not
// depend on how shots are distributed across threads.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "countfix/detector_model.hpp"
#include "countfix/priors.hpp"

namespace countfix {

class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(state_ += kGamma); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Substream for one shot. `stream` separates independent uses of one seed.
SplitMix64 shot_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t shot);

// Stream id used by the joint (prior-driven) simulation.
inline constexpr std::uint64_t kJointStream = ~std::uint64_t{0};

// Largest supported dark-count mean for sampling.
inline constexpr double kMaxSampledLambda = 1e3;

// Inverse-CDF sampler over a table truncated at the 1 - 1e-12 quantile.
class PoissonSampler {
 public:
  explicit PoissonSampler(double lambda);
  std::size_t operator()(SplitMix64& rng) const;
  std::size_t table_size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

// Inverse-CDF sampler for a photon-number prior.
class PriorSampler {
 public:
  explicit PriorSampler(const NumberPrior& prior);
  std::size_t operator()(SplitMix64& rng) const;

 private:
  std::vector<double> cdf_;
};

// Binomial survival by per-photon Bernoulli draws, then a Poisson dark count.
class ShotSampler {
 public:
  explicit ShotSampler(const DetectorParams& params);
  std::size_t operator()(std::size_t n, SplitMix64& rng) const;
  const DetectorParams& params() const { return params_; }

 private:
  DetectorParams params_;
  PoissonSampler dark_;
};

std::size_t sample_shot(const DetectorParams& params, std::size_t n, SplitMix64& rng);

struct ShotConfig {
  DetectorParams params;
  std::uint64_t seed = 0;
  std::uint64_t shots = 1;

  void validate() const;
};

struct EmpiricalColumn {
  std::size_t n = 0;
  std::vector<std::uint64_t> counts;  // counts[m]
  std::uint64_t total = 0;

  std::vector<double> frequencies() const;
};

// threads == 0 picks std::thread::hardware_concurrency().
std::vector<EmpiricalColumn> empirical_matrix(const ShotConfig& config, std::size_t n_max,
                                              unsigned threads = 0);

// Joint histogram of (n, m) with n drawn from the prior on each shot.
struct JointHistogram {
  std::size_t n_max = 0;
  std::vector<std::vector<std::uint64_t>> counts;  // counts[m][n]
  std::uint64_t total = 0;

  std::size_t m_max() const { return counts.empty() ? 0 : counts.size() - 1; }
  std::uint64_t outcome_count(std::size_t m) const;
  // Empirical P(n | m); empty if m was never observed.
  std::vector<double> conditional(std::size_t m) const;
};

JointHistogram simulate_joint(const ShotConfig& config, const NumberPrior& prior,
                              unsigned threads = 0);

// Half the L1 distance; the shorter input is zero-padded.
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace countfix
