#pragma once
// Conditional response matrix P(m|n) of a number-resolving detector that sits
// behind a loss channel and picks up Poissonian dark counts.

#include <cstddef>
#include <span>
#include <vector>

namespace countfix {

struct DetectorParams {
  double p_loss = 0.0;         // per-photon loss probability
  double lambda = 0.0;         // mean dark counts per shot
  double tail_epsilon = 1e-10; // max mass allowed above m_max in any column

  // Throws std::domain_error naming the offending field.
  void validate() const;
};

// log of e^{-lambda} lambda^d / d!; -inf when the probability is exactly zero.
double log_poisson_pmf(double lambda, long long d);
double poisson_pmf(double lambda, long long d);

// P(D > q) for D ~ Poisson(lambda). Computed without cancellation.
double poisson_upper_tail(double lambda, long long q);

// Smallest q >= 0 with P(D > q) <= epsilon.
std::size_t poisson_tail_quantile(double lambda, double epsilon);

// log P(k of n photons survive) with independent loss p_loss per photon.
// Uses 0^0 = 1 so p_loss in {0, 1} is exact; -inf for k outside 0..n.
double log_survivor_pmf(long long n, long long k, double p_loss);

// Exact (finite) sum over dark counts d in [max(0, m-n), m].
double conditional_prob(const DetectorParams& params, long long m, long long n);

// Immutable P(m|n) table, stored column by column (one column per incident n).
class ConditionalMatrix {
 public:
  ConditionalMatrix(DetectorParams params, std::size_t n_max, std::size_t m_max,
                    std::vector<double> column_major);

  std::size_t n_max() const { return n_max_; }
  std::size_t m_max() const { return m_max_; }
  std::size_t rows() const { return m_max_ + 1; }
  std::size_t cols() const { return n_max_ + 1; }
  const DetectorParams& params() const { return params_; }

  // P(m|n)
  double at(std::size_t m, std::size_t n) const { return data_[n * rows() + m]; }
  std::span<const double> column(std::size_t n) const {
    return {data_.data() + n * rows(), rows()};
  }
  double column_mass(std::size_t n) const;

 private:
  DetectorParams params_;
  std::size_t n_max_;
  std::size_t m_max_;
  std::vector<double> data_;
};

// m_max = n_max + q where q is the Poisson(lambda) tail quantile at tail_epsilon.
// Every column then retains at least 1 - tail_epsilon of its mass.
ConditionalMatrix build_matrix(const DetectorParams& params, std::size_t n_max);

}  // namespace countfix
