#pragma once
// Bayes inversion of a detector response against a photon-number prior, and
// the maximum-a-posteriori reinterpretation of raw detector signatures.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "countfix/detector_model.hpp"
#include "countfix/priors.hpp"

namespace countfix {

// P(n|m), stored column by column (one column per measured m).
class PosteriorMatrix {
 public:
  PosteriorMatrix(std::size_t n_max, std::size_t m_max, std::vector<double> column_major,
                  std::vector<double> outcome_marginal);

  std::size_t n_max() const { return n_max_; }
  std::size_t m_max() const { return m_max_; }
  std::size_t rows() const { return n_max_ + 1; }
  std::size_t cols() const { return m_max_ + 1; }

  // P(n|m). Undefined columns hold zeros and must not be read as a distribution.
  double at(std::size_t n, std::size_t m) const { return data_[m * rows() + n]; }
  std::span<const double> column(std::size_t m) const {
    return {data_.data() + m * rows(), rows()};
  }

  // P(m) = sum_i P(m|i) P(i)
  std::span<const double> outcome_marginal() const { return marginal_; }
  double outcome_probability(std::size_t m) const { return marginal_[m]; }

  // false when P(m) == 0, i.e. the outcome is impossible under this prior.
  bool defined(std::size_t m) const { return marginal_[m] > 0.0; }

 private:
  std::size_t n_max_;
  std::size_t m_max_;
  std::vector<double> data_;
  std::vector<double> marginal_;
};

// Zero-pads a short prior. A longer prior is accepted only if the extra
// entries are zero; otherwise throws std::domain_error.
PosteriorMatrix posterior(const ConditionalMatrix& matrix, const NumberPrior& prior);

// Relative gap below which two posterior entries count as tied.
inline constexpr double kTieRelativeTolerance = 1e-12;

struct OptimisationReport {
  std::size_t n_max = 0;
  std::size_t m_max = 0;

  // Per outcome m in 0..m_max; map[m] is empty for undefined outcomes.
  std::vector<std::optional<std::size_t>> map;
  std::vector<double> outcome_marginal;
  std::vector<double> fidelity_raw;  // P(n=m | m), 0 for m > n_max
  std::vector<double> fidelity_opt;  // max_n P(n|m)
  // true when another n lies within kTieRelativeTolerance of the column maximum.
  std::vector<bool> tied;
  std::vector<std::size_t> undefined_outcomes;

  // Weighted by P(m) over defined outcomes.
  double avg_fidelity_raw = 0.0;
  double avg_fidelity_opt = 0.0;

  bool defined(std::size_t m) const { return map[m].has_value(); }
};

// Smallest n whose P(n|m) is within kTieRelativeTolerance of the column maximum.
std::size_t map_estimate(std::span<const double> column);

OptimisationReport optimisation_map(const PosteriorMatrix& post);

}  // namespace countfix
