#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hohmm/error.hpp"
#include "hohmm/oracle.hpp"
#include "test_helpers.hpp"

namespace hohmm::oracle {
namespace {

double iid_loglik(std::span<const double> y, double sigma) {
  double s = 0.0;
  for (double v : y) s += std::log(emission_density(v, sigma));
  return s;
}

TEST(BaumWelch, SingleStateIsIid) {
  const auto p = uniform_parameters({1, 1}, {0.8});
  const std::vector<double> y{0.1, -1.3, 2.0, 0.7};
  const auto tab = bw_backward(p, y);
  EXPECT_NEAR(tab.log_likelihood(), iid_loglik(y, 0.8), 1e-12);
  for (std::size_t t = 0; t < y.size(); ++t) EXPECT_NEAR(tab.backward(t, 0), 1.0, 1e-15);
}

TEST(BaumWelch, SingleObservationIsMixture) {
  std::mt19937_64 rng(51);
  const auto p = testing::random_params({3, 1}, rng);
  const std::vector<double> y{1.4};
  double f = 0.0;
  for (std::size_t v = 0; v < 3; ++v) f += p.early[0](0, v) * emission_density(1.4, p.sigma[v]);
  EXPECT_NEAR(bw_forward(p, y).log_likelihood(), std::log(f), 1e-14);
}

TEST(BaumWelch, LastBackwardRowIsOne) {
  std::mt19937_64 rng(52);
  const auto p = testing::random_params({3, 1}, rng);
  const auto y = testing::random_data(7, rng);
  const auto tab = bw_backward(p, y);
  for (std::size_t v = 0; v < 3; ++v) EXPECT_EQ(tab.backward(6, v), 1.0);
}

TEST(BaumWelch, ForwardRowsSumToOne) {
  std::mt19937_64 rng(53);
  const auto p = testing::random_params({4, 1}, rng);
  const auto y = testing::random_data(50, rng);
  const auto tab = bw_forward(p, y);
  for (std::size_t t = 0; t < 50; ++t) {
    double s = 0.0;
    for (double x : tab.forward.row(t)) s += x;
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}

TEST(BaumWelch, TablesReconstructBruteForceRatios) {
  // forward(t) is the filtered law q(u_t | y_{<=t}); backward(t, u) is the
  // ratio of the smoothed to the filtered law; log_scale[t] is
  // log f(y_{<=t}) - log f(y_{<t}).
  std::mt19937_64 rng(54);
  const auto p = testing::random_params({2, 1}, rng);
  const auto y = testing::random_data(6, rng);
  const auto tab = bw_backward(p, y);
  const BruteForceJoint full(p, y);
  double prev = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const std::span<const double> head(y.data(), t + 1);
    const BruteForceJoint filtered(p, head);
    const auto filt = filtered.window_posterior(t, t);
    const auto smooth = full.window_posterior(t, t);
    for (std::size_t v = 0; v < 2; ++v) {
      EXPECT_NEAR(tab.forward(t, v), filt[v], 1e-12);
      EXPECT_NEAR(tab.backward(t, v), smooth[v] / filt[v], 1e-10);
    }
    EXPECT_NEAR(tab.log_scale[t], filtered.log_likelihood() - prev, 1e-12);
    prev = filtered.log_likelihood();
  }
}

TEST(BaumWelch, PosteriorsAreConsistent) {
  std::mt19937_64 rng(55);
  const auto p = testing::random_params({3, 1}, rng);
  const auto y = testing::random_data(40, rng);
  const auto post = bw_posteriors(p, y, bw_backward(p, y));
  ASSERT_EQ(post.pairwise.size(), 39u);
  for (std::size_t t = 0; t < 40; ++t) {
    double s = 0.0;
    for (double x : post.marginals.row(t)) s += x;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  for (std::size_t t = 0; t < 39; ++t) {
    double total = 0.0;
    for (std::size_t u = 0; u < 3; ++u) {
      double out = 0.0;
      double in = 0.0;
      for (std::size_t v = 0; v < 3; ++v) {
        out += post.pairwise[t](u, v);
        in += post.pairwise[t](v, u);
        total += post.pairwise[t](u, v);
      }
      EXPECT_NEAR(out, post.marginals(t, u), 1e-12);
      EXPECT_NEAR(in, post.marginals(t + 1, u), 1e-12);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(BaumWelch, SingleStatePosteriorsAreOne) {
  const auto p = uniform_parameters({1, 1}, {1.0});
  const std::vector<double> y{0.3, 0.2};
  const auto post = bw_posteriors(p, y, bw_backward(p, y));
  EXPECT_NEAR(post.marginals(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(post.pairwise[0](0, 0), 1.0, 1e-15);
}

TEST(BaumWelch, RejectsOtherOrders) {
  std::mt19937_64 rng(56);
  const std::vector<double> y{1.0, 2.0};
  EXPECT_THROW(bw_forward(testing::random_params({2, 2}, rng), y), Error);
  EXPECT_THROW(bw_forward(testing::random_params({2, 0}, rng), y), Error);
  const auto p = testing::random_params({2, 1}, rng);
  EXPECT_THROW(bw_posteriors(p, y, bw_forward(p, y)), Error);
}

TEST(BruteForce, SingleStateIsIid) {
  const auto p = uniform_parameters({1, 3}, {2.2});
  const std::vector<double> y{0.5, -0.5, 3.0};
  EXPECT_NEAR(BruteForceJoint(p, y).log_likelihood(), iid_loglik(y, 2.2), 1e-12);
}

TEST(BruteForce, OrderZeroFactorizes) {
  std::mt19937_64 rng(57);
  const auto p = testing::random_params({3, 0}, rng);
  const auto y = testing::random_data(5, rng);
  double want = 0.0;
  for (double v : y) {
    double m = 0.0;
    for (std::size_t s = 0; s < 3; ++s) m += p.pi(0, s) * emission_density(v, p.sigma[s]);
    want += std::log(m);
  }
  EXPECT_NEAR(BruteForceJoint(p, y).log_likelihood(), want, 1e-12);
}

TEST(BruteForce, AgreesWithBaumWelch) {
  std::mt19937_64 rng(58);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t k = 1 + rng() % 4;
    const std::size_t T = 1 + rng() % (k == 4 ? 7 : 9);
    const auto p = testing::random_params({k, 1}, rng);
    const auto y = testing::random_data(T, rng);
    const BruteForceJoint bf(p, y);
    const auto post = bw_posteriors(p, y, bw_backward(p, y));
    EXPECT_NEAR(bf.log_likelihood(), bw_forward(p, y).log_likelihood(), 1e-12);
    for (std::size_t t = 0; t < T; ++t) {
      const auto m = bf.window_posterior(t, t);
      for (std::size_t v = 0; v < k; ++v) EXPECT_NEAR(m[v], post.marginals(t, v), 1e-12);
      if (t + 1 < T) {
        const auto pair = bf.window_posterior(t, t + 1);
        for (std::size_t u = 0; u < k; ++u)
          for (std::size_t v = 0; v < k; ++v)
            EXPECT_NEAR(pair[u * k + v], post.pairwise[t](u, v), 1e-12);
      }
    }
  }
}

TEST(BruteForce, PathPosteriorSumsToOne) {
  std::mt19937_64 rng(59);
  const auto p = testing::random_params({3, 2}, rng);
  const BruteForceJoint bf(p, testing::random_data(6, rng));
  double s = 0.0;
  for (double x : bf.path_posterior()) s += x;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_EQ(bf.path_posterior().size(), 729u);
}

TEST(BruteForce, ConditionalZeroesImpossibleConfigurations) {
  ParameterSet p;
  p.early.push_back(ConditionalTable(1, 2, {1.0, 0.0}));
  p.pi = ConditionalTable(2, 2, {0.5, 0.5, 0.5, 0.5});
  p.sigma = {1.0, 2.0};
  const std::vector<double> y{0.1, 0.2};
  const BruteForceJoint bf(p, y);
  const auto c = bf.conditional(1, 0, 1);
  EXPECT_EQ(c[2], 0.0);
  EXPECT_EQ(c[3], 0.0);
  EXPECT_NEAR(c[0] + c[1], 1.0, 1e-15);
}

TEST(BruteForce, GuardsInstanceSize) {
  const auto p = testing::persistent_two_state();
  EXPECT_THROW(BruteForceJoint(p, std::vector<double>(21, 0.1)), Error);
  EXPECT_NO_THROW(BruteForceJoint(p, std::vector<double>(19, 0.1)));
}

}  // namespace
}  // namespace hohmm::oracle
