#include "countfix/priors.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace countfix {

namespace {

std::string format_label(const char* fmt, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a);
  return buf;
}

void normalise(std::vector<double>& probs) {
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (double& p : probs) p /= total;
}

}  // namespace

std::size_t pdc_default_n_max(double chi) {
  if (!(chi >= 0.0 && chi < 1.0)) throw std::domain_error("chi must lie in [0, 1)");
  if (chi == 0.0) return 0;
  const double ratio = chi * chi;
  std::size_t n = 0;
  double tail = ratio;  // chi^(2(n+1))
  while (tail > kPdcTailMass) {
    tail *= ratio;
    ++n;
  }
  return n;
}

NumberPrior pdc_prior(double chi, std::optional<std::size_t> n_max) {
  if (!std::isfinite(chi) || chi < 0.0 || chi >= 1.0)
    throw std::domain_error("pdc prior requires 0 <= chi < 1, got " + std::to_string(chi));
  const std::size_t support = n_max.value_or(pdc_default_n_max(chi));
  const double ratio = chi * chi;

  NumberPrior prior;
  prior.label = format_label("pdc(chi=%g)", chi);
  prior.probs.resize(support + 1);
  double term = 1.0 - ratio;
  for (std::size_t n = 0; n <= support; ++n) {
    prior.probs[n] = term;
    term *= ratio;
  }
  normalise(prior.probs);
  return prior;
}

NumberPrior uniform_prior(std::size_t lo, std::size_t hi) {
  if (hi < lo) throw std::domain_error("uniform prior requires hi >= lo");
  NumberPrior prior;
  prior.label = "uniform(" + std::to_string(lo) + ".." + std::to_string(hi) + ")";
  prior.probs.assign(hi + 1, 0.0);
  const double p = 1.0 / static_cast<double>(hi - lo + 1);
  for (std::size_t n = lo; n <= hi; ++n) prior.probs[n] = p;
  return prior;
}

NumberPrior custom_prior(std::span<const double> weights, std::string label) {
  if (weights.empty()) throw std::domain_error("custom prior needs at least one weight");
  bool any_positive = false;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0)
      throw std::domain_error("custom prior weights must be finite and >= 0");
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) throw std::domain_error("custom prior weights are all zero");

  NumberPrior prior{{weights.begin(), weights.end()}, std::move(label)};
  normalise(prior.probs);
  return prior;
}

}  // namespace countfix
