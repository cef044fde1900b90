#include "countfix/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace countfix {

PosteriorMatrix::PosteriorMatrix(std::size_t n_max, std::size_t m_max,
                                 std::vector<double> column_major,
                                 std::vector<double> outcome_marginal)
    : n_max_(n_max),
      m_max_(m_max),
      data_(std::move(column_major)),
      marginal_(std::move(outcome_marginal)) {
  if (data_.size() != rows() * cols() || marginal_.size() != cols())
    throw std::invalid_argument("PosteriorMatrix: data size does not match dimensions");
}

PosteriorMatrix posterior(const ConditionalMatrix& matrix, const NumberPrior& prior) {
  const std::size_t n_count = matrix.cols();
  const std::size_t m_count = matrix.rows();

  std::vector<double> weights(n_count, 0.0);
  for (std::size_t n = 0; n < prior.probs.size(); ++n) {
    if (n < n_count) {
      weights[n] = prior.probs[n];
    } else if (prior.probs[n] != 0.0) {
      throw std::domain_error("prior has mass at n=" + std::to_string(n) +
                              " beyond the detector matrix n_max=" +
                              std::to_string(matrix.n_max()));
    }
  }

  std::vector<double> marginal(m_count, 0.0);
  std::vector<double> data(n_count * m_count, 0.0);
  for (std::size_t m = 0; m < m_count; ++m) {
    double total = 0.0;
    for (std::size_t n = 0; n < n_count; ++n) total += matrix.at(m, n) * weights[n];
    marginal[m] = total;
    if (total <= 0.0) continue;
    for (std::size_t n = 0; n < n_count; ++n)
      data[m * n_count + n] = matrix.at(m, n) * weights[n] / total;
  }
  return PosteriorMatrix(matrix.n_max(), matrix.m_max(), std::move(data), std::move(marginal));
}

std::size_t map_estimate(std::span<const double> column) {
  if (column.empty()) throw std::invalid_argument("map_estimate: empty column");
  const double best = *std::max_element(column.begin(), column.end());
  const double floor = best - kTieRelativeTolerance * best;
  for (std::size_t n = 0; n < column.size(); ++n)
    if (column[n] >= floor) return n;
  return 0;  // unreachable: the maximum itself satisfies the floor
}

OptimisationReport optimisation_map(const PosteriorMatrix& post) {
  const std::size_t m_count = post.cols();
  OptimisationReport report;
  report.n_max = post.n_max();
  report.m_max = post.m_max();
  report.map.assign(m_count, std::nullopt);
  report.outcome_marginal.assign(post.outcome_marginal().begin(), post.outcome_marginal().end());
  report.fidelity_raw.assign(m_count, std::numeric_limits<double>::quiet_NaN());
  report.fidelity_opt.assign(m_count, std::numeric_limits<double>::quiet_NaN());
  report.tied.assign(m_count, false);

  for (std::size_t m = 0; m < m_count; ++m) {
    if (!post.defined(m)) {
      report.undefined_outcomes.push_back(m);
      continue;
    }
    const auto col = post.column(m);
    const std::size_t best_n = map_estimate(col);
    const double best = *std::max_element(col.begin(), col.end());
    const double floor = best - kTieRelativeTolerance * best;

    report.map[m] = best_n;
    report.fidelity_opt[m] = best;
    report.fidelity_raw[m] = m <= post.n_max() ? col[m] : 0.0;
    report.tied[m] =
        std::count_if(col.begin(), col.end(), [&](double p) { return p >= floor; }) > 1;

    const double p_m = post.outcome_probability(m);
    report.avg_fidelity_raw += p_m * report.fidelity_raw[m];
    report.avg_fidelity_opt += p_m * report.fidelity_opt[m];
  }
  return report;
}

}  // namespace countfix
