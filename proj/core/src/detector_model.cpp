#include "countfix/detector_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include <boost/math/special_functions/gamma.hpp>

namespace countfix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(base^exponent) with 0^0 = 1.
double log_pow(double base, long long exponent) {
  if (exponent == 0) return 0.0;
  if (base == 0.0) return kNegInf;
  return static_cast<double>(exponent) * std::log(base);
}

double log_factorial(long long k) { return std::lgamma(static_cast<double>(k) + 1.0); }

void check_lambda(double lambda) {
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw std::domain_error("lambda must be finite and >= 0, got " + std::to_string(lambda));
}

}  // namespace

void DetectorParams::validate() const {
  if (!std::isfinite(p_loss) || p_loss < 0.0 || p_loss > 1.0)
    throw std::domain_error("p_loss must lie in [0, 1], got " + std::to_string(p_loss));
  check_lambda(lambda);
  if (!std::isfinite(tail_epsilon) || tail_epsilon <= 0.0 || tail_epsilon >= 1.0)
    throw std::domain_error("tail_epsilon must lie in (0, 1), got " +
                            std::to_string(tail_epsilon));
}

double log_poisson_pmf(double lambda, long long d) {
  check_lambda(lambda);
  if (d < 0) throw std::domain_error("dark-count number must be >= 0");
  if (lambda == 0.0) return d == 0 ? 0.0 : kNegInf;
  return -lambda + static_cast<double>(d) * std::log(lambda) - log_factorial(d);
}

double poisson_pmf(double lambda, long long d) { return std::exp(log_poisson_pmf(lambda, d)); }

double poisson_upper_tail(double lambda, long long q) {
  check_lambda(lambda);
  if (q < 0) return 1.0;
  if (lambda == 0.0) return 0.0;
  // P(D > q) is the regularised lower incomplete gamma P(q + 1, lambda).
  return boost::math::gamma_p(static_cast<double>(q) + 1.0, lambda);
}

std::size_t poisson_tail_quantile(double lambda, double epsilon) {
  check_lambda(lambda);
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::domain_error("tail epsilon must lie in (0, 1)");
  if (poisson_upper_tail(lambda, 0) <= epsilon) return 0;

  long long hi = 1;
  while (poisson_upper_tail(lambda, hi) > epsilon) hi *= 2;
  long long lo = hi / 2;  // tail(lo) > epsilon
  while (hi - lo > 1) {
    const long long mid = lo + (hi - lo) / 2;
    if (poisson_upper_tail(lambda, mid) <= epsilon)
      hi = mid;
    else
      lo = mid;
  }
  return static_cast<std::size_t>(hi);
}

double log_survivor_pmf(long long n, long long k, double p_loss) {
  if (n < 0) throw std::domain_error("photon number must be >= 0");
  if (k < 0 || k > n) return kNegInf;
  const double log_choose = log_factorial(n) - log_factorial(k) - log_factorial(n - k);
  return log_choose + log_pow(1.0 - p_loss, k) + log_pow(p_loss, n - k);
}

double conditional_prob(const DetectorParams& params, long long m, long long n) {
  params.validate();
  if (m < 0 || n < 0) throw std::domain_error("m and n must be >= 0");

  double sum = 0.0;
  for (long long d = std::max(0LL, m - n); d <= m; ++d) {
    const double log_term =
        log_poisson_pmf(params.lambda, d) + log_survivor_pmf(n, m - d, params.p_loss);
    if (log_term != kNegInf) sum += std::exp(log_term);
  }
  return sum;
}

ConditionalMatrix::ConditionalMatrix(DetectorParams params, std::size_t n_max,
                                     std::size_t m_max, std::vector<double> column_major)
    : params_(params), n_max_(n_max), m_max_(m_max), data_(std::move(column_major)) {
  if (data_.size() != (n_max_ + 1) * (m_max_ + 1))
    throw std::invalid_argument("ConditionalMatrix: data size does not match dimensions");
}

double ConditionalMatrix::column_mass(std::size_t n) const {
  const auto col = column(n);
  return std::accumulate(col.begin(), col.end(), 0.0);
}

ConditionalMatrix build_matrix(const DetectorParams& params, std::size_t n_max) {
  params.validate();
  const std::size_t m_max = n_max + poisson_tail_quantile(params.lambda, params.tail_epsilon);
  const std::size_t rows = m_max + 1;

  std::vector<double> data((n_max + 1) * rows);
  for (std::size_t n = 0; n <= n_max; ++n) {
    for (std::size_t m = 0; m <= m_max; ++m) {
      data[n * rows + m] =
          conditional_prob(params, static_cast<long long>(m), static_cast<long long>(n));
    }
  }
  return ConditionalMatrix(params, n_max, m_max, std::move(data));
}

}  // namespace countfix
