#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace countfix {

// Normalised photon-number distribution on 0..n_max.
struct NumberPrior {
  std::vector<double> probs;
  std::string label;

  std::size_t n_max() const { return probs.empty() ? 0 : probs.size() - 1; }
};

inline constexpr double kPdcTailMass = 1e-10;

// Smallest N with chi^(2(N+1)) <= kPdcTailMass.
std::size_t pdc_default_n_max(double chi);

// Single-arm marginal of a down-conversion source, P(n) = (1 - chi^2) chi^(2n),
// renormalised over 0..n_max.
NumberPrior pdc_prior(double chi, std::optional<std::size_t> n_max = std::nullopt);

// P(n) = 1/(hi - lo + 1) on lo..hi, zero below lo.
NumberPrior uniform_prior(std::size_t lo = 0, std::size_t hi = 9);

// Raw nonnegative weights normalised to sum one.
NumberPrior custom_prior(std::span<const double> weights, std::string label = "custom");

}  // namespace countfix
