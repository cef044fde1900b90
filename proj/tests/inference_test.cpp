#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "countfix/inference.hpp"
#include "countfix/montecarlo.hpp"
#include "oracle/golden_configs.hpp"
#include "oracle/reference.hpp"

namespace countfix {
namespace {

double column_sum(std::span<const double> col) { return std::accumulate(col.begin(), col.end(), 0.0); }

// Matrix with an explicit m range, bypassing the tail-quantile truncation.
ConditionalMatrix explicit_matrix(const DetectorParams& params, std::size_t n_max, std::size_t m_max) {
  std::vector<double> data;
  for (std::size_t n = 0; n <= n_max; ++n)
    for (std::size_t m = 0; m <= m_max; ++m)
      data.push_back(conditional_prob(params, static_cast<long long>(m), static_cast<long long>(n)));
  return ConditionalMatrix(params, n_max, m_max, std::move(data));
}

TEST(Posterior, IdealDetectorWithUniformPriorIsIdentity) {
  const auto post = posterior(build_matrix({}, 9), uniform_prior(0, 9));
  for (std::size_t m = 0; m <= 9; ++m) {
    ASSERT_TRUE(post.defined(m));
    for (std::size_t n = 0; n <= 9; ++n) EXPECT_EQ(post.at(n, m), n == m ? 1.0 : 0.0);
  }
}

TEST(Posterior, IdealDetectorWithPdcPriorIsDelta) {
  const auto post = posterior(build_matrix({}, 19), pdc_prior(0.7, 19));
  for (std::size_t m = 0; m <= post.m_max(); ++m) {
    ASSERT_TRUE(post.defined(m));
    for (std::size_t n = 0; n <= 19; ++n) EXPECT_EQ(post.at(n, m), n == m ? 1.0 : 0.0);
  }
}

TEST(Posterior, ShortPriorIsZeroPadded) {
  const auto post = posterior(build_matrix({}, 19), uniform_prior(0, 9));
  for (std::size_t m = 10; m <= 19; ++m) {
    EXPECT_FALSE(post.defined(m));
    EXPECT_EQ(post.outcome_probability(m), 0.0);
  }
}

TEST(Posterior, LongPriorNeedsZeroTail) {
  const auto mat = build_matrix({0.2, 0.0}, 3);
  EXPECT_NO_THROW(posterior(mat, custom_prior(std::vector<double>{1, 1, 1, 1, 0, 0})));
  EXPECT_THROW(posterior(mat, custom_prior(std::vector<double>{1, 1, 1, 1, 1})), std::domain_error);
}

TEST(Posterior, ColumnsNormalise) {
  for (double p : {0.0, 0.3, 0.5, 0.9}) {
    for (double lam : {0.0, 0.5, 5.0}) {
      for (const auto& prior : {pdc_prior(0.7, 19), uniform_prior(0, 9)}) {
        const auto post = posterior(build_matrix({p, lam}, 19), prior);
        double marginal_total = 0.0;
        for (std::size_t m = 0; m <= post.m_max(); ++m) {
          marginal_total += post.outcome_probability(m);
          if (post.defined(m)) EXPECT_NEAR(column_sum(post.column(m)), 1.0, 1e-12);
        }
        EXPECT_NEAR(marginal_total, 1.0, 1e-9);
      }
    }
  }
}

TEST(Posterior, SmallInstanceMatchesJointEnumeration) {
  for (double p : {0.0, 0.3, 0.7, 1.0}) {
    for (double lam : {0.0, 0.5, 2.0}) {
      for (std::size_t n_max = 0; n_max <= 4; ++n_max) {
        const std::size_t m_max = 6;
        const auto prior = pdc_prior(0.6, n_max);
        const auto post = posterior(explicit_matrix({p, lam}, n_max, m_max), prior);
        const auto expected = oracle::enumerate_posterior(p, lam, prior.probs, m_max);
        for (std::size_t m = 0; m <= m_max; ++m) {
          ASSERT_EQ(post.defined(m), !expected[m].empty()) << "m=" << m;
          if (!post.defined(m)) continue;
          for (std::size_t n = 0; n <= n_max; ++n)
            EXPECT_NEAR(post.at(n, m), expected[m][n], 1e-12)
                << "p=" << p << " lambda=" << lam << " n=" << n << " m=" << m;
        }
      }
    }
  }
}

TEST(Posterior, AgreesWithMonteCarloConditionalFrequencies) {
  const DetectorParams params{0.5, 0.0};
  const auto prior = pdc_prior(0.7, 19);
  const auto post = posterior(build_matrix(params, 19), prior);
  const auto joint = simulate_joint({params, 7, 1'000'000}, prior);
  std::size_t checked = 0;
  for (std::size_t m = 0; m <= joint.m_max(); ++m) {
    if (joint.outcome_count(m) < 10'000) continue;
    EXPECT_LT(total_variation(joint.conditional(m), post.column(m)), 0.02) << "m=" << m;
    ++checked;
  }
  EXPECT_GE(checked, 4u);
}

TEST(MapEstimate, TiesGoToSmallestN) {
  const std::vector<double> col{0.2, 0.4, 0.4};
  EXPECT_EQ(map_estimate(col), 1u);
  const std::vector<double> near{0.1, 0.45 * (1 + 1e-14), 0.45};
  EXPECT_EQ(map_estimate(near), 1u);
  const std::vector<double> clear{0.1, 0.44, 0.46};
  EXPECT_EQ(map_estimate(clear), 2u);
}

TEST(MapEstimate, InvariantUnderPositiveScaling) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> log_scale(-30.0, 30.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> col(1 + trial % 25);
    for (double& v : col) v = u(rng);
    const std::size_t base = map_estimate(col);
    const double c = std::exp(log_scale(rng));
    std::vector<double> scaled(col);
    for (double& v : scaled) v *= c;
    EXPECT_EQ(map_estimate(scaled), base);
  }
}

TEST(OptimisationMap, IdealDetectorGivesIdentity) {
  for (const auto& prior : {pdc_prior(0.7, 19), uniform_prior(0, 19), custom_prior(std::vector<double>(20, 1.0))}) {
    const auto report = optimisation_map(posterior(build_matrix({}, 19), prior));
    for (std::size_t m = 0; m <= report.m_max; ++m) {
      ASSERT_TRUE(report.defined(m));
      EXPECT_EQ(*report.map[m], m);
      EXPECT_EQ(report.fidelity_raw[m], 1.0);
      EXPECT_EQ(report.fidelity_opt[m], 1.0);
    }
  }
}

TEST(OptimisationMap, MatchesGoldenMaps) {
  for (const auto& cfg : oracle::golden_configs()) {
    const auto golden = oracle::load_golden_map(cfg.golden_path());
    const auto report =
        optimisation_map(posterior(build_matrix(cfg.params, oracle::kGoldenNMax), cfg.prior()));
    ASSERT_EQ(report.map.size(), golden.size()) << cfg.name;
    for (std::size_t m = 0; m < golden.size(); ++m) EXPECT_EQ(report.map[m], golden[m]) << cfg.name << " m=" << m;
  }
}

TEST(OptimisationMap, StrongDarkCountsFavourVacuumOverPlottedRange) {
  const auto report = optimisation_map(posterior(build_matrix({0.0, 10.0}, 19), pdc_prior(0.7, 19)));
  // P(n+1|m)/P(n|m) = 0.49 (m-n)/10, so vacuum wins exactly while m <= 20.
  for (std::size_t m = 0; m <= 20; ++m) EXPECT_EQ(report.map[m], 0u) << "m=" << m;
  EXPECT_EQ(report.map[21], 1u);
}

TEST(OptimisationMap, LossIncrementsAndDarkCountsDecrement) {
  const auto lossy = optimisation_map(posterior(build_matrix({0.5, 0.0}, 19), uniform_prior(0, 9)));
  for (std::size_t m = 0; m < 9; ++m)
    if (lossy.defined(m)) EXPECT_GE(*lossy.map[m], m);

  for (double lam : {2.0, 5.0, 10.0}) {
    const auto dark = optimisation_map(posterior(build_matrix({0.0, lam}, 19), uniform_prior(0, 9)));
    for (std::size_t m = 0; m <= dark.m_max; ++m)
      if (dark.defined(m)) EXPECT_LE(*dark.map[m], m);
  }
}

TEST(OptimisationMap, ExactTiesAreFlagged) {
  // Uniform prior, p_loss = 0.5: n = 2m-1 and n = 2m tie exactly.
  const auto report = optimisation_map(posterior(build_matrix({0.5, 0.0}, 19), uniform_prior(0, 9)));
  EXPECT_TRUE(report.tied[1]);
  EXPECT_EQ(*report.map[1], 1u);
  EXPECT_TRUE(report.tied[2]);
  EXPECT_EQ(*report.map[2], 3u);
  EXPECT_FALSE(report.tied[0]);
}

TEST(OptimisationMap, UndefinedOutcomesAreSkipped) {
  const auto report = optimisation_map(posterior(build_matrix({0.5, 0.0}, 19), uniform_prior(0, 9)));
  std::vector<std::size_t> expected(10);
  std::iota(expected.begin(), expected.end(), 10);
  EXPECT_EQ(report.undefined_outcomes, expected);
  for (std::size_t m : expected) {
    EXPECT_FALSE(report.map[m].has_value());
    EXPECT_TRUE(std::isnan(report.fidelity_opt[m]));
  }
  EXPECT_TRUE(std::isfinite(report.avg_fidelity_opt));
}

TEST(OptimisationMap, FidelityInvariants) {
  for (double p : {0.0, 0.2, 0.5, 0.9}) {
    for (double lam : {0.0, 0.5, 1.0, 5.0, 10.0}) {
      for (const auto& prior : {pdc_prior(0.7, 19), uniform_prior(0, 9)}) {
        const auto post = posterior(build_matrix({p, lam}, 19), prior);
        const auto report = optimisation_map(post);
        double raw = 0.0, opt = 0.0;
        for (std::size_t m = 0; m <= report.m_max; ++m) {
          if (!report.defined(m)) continue;
          const std::size_t target = *report.map[m];
          ASSERT_LE(target, report.n_max);
          EXPECT_GE(report.fidelity_opt[m], report.fidelity_raw[m]);
          EXPECT_NEAR(post.at(target, m), report.fidelity_opt[m],
                      kTieRelativeTolerance * report.fidelity_opt[m]);
          const auto col = post.column(m);
          EXPECT_EQ(report.fidelity_opt[m], *std::max_element(col.begin(), col.end()));
          if (m > report.n_max) EXPECT_EQ(report.fidelity_raw[m], 0.0);
          raw += post.outcome_probability(m) * report.fidelity_raw[m];
          opt += post.outcome_probability(m) * report.fidelity_opt[m];
        }
        EXPECT_DOUBLE_EQ(report.avg_fidelity_raw, raw);
        EXPECT_DOUBLE_EQ(report.avg_fidelity_opt, opt);
        EXPECT_GE(report.avg_fidelity_opt, report.avg_fidelity_raw);
      }
    }
  }
}

TEST(OptimisationMap, PriorScalingInvariance) {
  const std::vector<double> weights{3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0};
  const auto mat = build_matrix({0.4, 1.5}, 7);
  const auto base_post = posterior(mat, custom_prior(weights));
  const auto base = optimisation_map(base_post);

  for (double c : {0.25, 2.0, 1024.0, 0x1p-40}) {
    std::vector<double> scaled(weights);
    for (double& w : scaled) w *= c;
    const auto post = posterior(mat, custom_prior(scaled));
    const auto report = optimisation_map(post);
    for (std::size_t m = 0; m <= mat.m_max(); ++m)
      for (std::size_t n = 0; n <= mat.n_max(); ++n) EXPECT_EQ(post.at(n, m), base_post.at(n, m));
    EXPECT_EQ(report.map, base.map);
    EXPECT_EQ(report.fidelity_raw, base.fidelity_raw);
    EXPECT_EQ(report.fidelity_opt, base.fidelity_opt);
    EXPECT_EQ(report.avg_fidelity_opt, base.avg_fidelity_opt);
  }
  // Arbitrary factors are not exact in floating point; values agree to rounding.
  for (double c : {3.0, 0.1, 7.77e5}) {
    std::vector<double> scaled(weights);
    for (double& w : scaled) w *= c;
    const auto post = posterior(mat, custom_prior(scaled));
    const auto report = optimisation_map(post);
    EXPECT_EQ(report.map, base.map);
    for (std::size_t m = 0; m <= mat.m_max(); ++m)
      for (std::size_t n = 0; n <= mat.n_max(); ++n)
        EXPECT_NEAR(post.at(n, m), base_post.at(n, m), 1e-15);
  }
}

}  // namespace
}  // namespace countfix
