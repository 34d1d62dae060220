#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "hohmm/error.hpp"
#include "hohmm/oracle.hpp"
#include "hohmm/recursion.hpp"
#include "hohmm/window.hpp"
#include "test_helpers.hpp"

namespace hohmm {
namespace {

void expect_tensor_near(const Tensor& got, const Tensor& want, double tol, const std::string& what) {
  ASSERT_EQ(got.size(), want.size()) << what;
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i], want[i], tol) << what << " entry " << i;
  }
}

// Digits of a lexicographic index, latest fastest.
std::vector<std::size_t> digits(std::size_t idx, std::size_t k, std::size_t width) {
  std::vector<std::size_t> d(width);
  for (std::size_t p = width; p-- > 0;) {
    d[p] = idx % k;
    idx /= k;
  }
  return d;
}

// Prior probability of u_s given the path before it.
double prior_factor(const ParameterSet& p, const std::vector<std::size_t>& path, std::size_t s) {
  const std::size_t k = p.k();
  const std::size_t lag = std::min(s, p.h());
  std::size_t row = 0;
  for (std::size_t r = s - lag; r < s; ++r) row = row * k + path[r];
  return p.transition(s)(row, path[s]);
}

TEST(Terminal, SingleStateIsOne) {
  const auto p = uniform_parameters({1, 2}, {1.3});
  const auto s = terminal_posterior(p, 4, 0.7);
  EXPECT_EQ(s.lag, 2u);
  expect_tensor_near(s.values, Tensor{1.0}, 0.0, "k=1");
}

TEST(Terminal, OrderZeroIsMixtureBayes) {
  ParameterSet p;
  p.pi = ConditionalTable(1, 3, {0.2, 0.5, 0.3});
  p.sigma = {0.7, 1.5, 4.0};
  const double y = 1.9;
  const auto s = terminal_posterior(p, 9, y);
  double c = 0.0;
  for (std::size_t v = 0; v < 3; ++v) c += p.pi(0, v) * emission_density(y, p.sigma[v]);
  for (std::size_t v = 0; v < 3; ++v) {
    EXPECT_NEAR(s.values[v], p.pi(0, v) * emission_density(y, p.sigma[v]) / c, 1e-15);
  }
}

TEST(Terminal, FirstOrderMatchesEnumerationOverLastPair) {
  const auto p = testing::persistent_two_state(0.8, 0.9, 2.2);
  const double y = -1.4;
  const auto s = terminal_posterior(p, 3, y);
  ASSERT_EQ(s.values.size(), 4u);
  for (std::size_t a = 0; a < 2; ++a) {
    // Joint of (u_{T-1} = a, u_T = b, y_T) up to the prior of a, which cancels.
    double joint[2];
    for (std::size_t b = 0; b < 2; ++b) joint[b] = p.pi(a, b) * emission_density(y, p.sigma[b]);
    for (std::size_t b = 0; b < 2; ++b) {
      EXPECT_NEAR(s.values[a * 2 + b], joint[b] / (joint[0] + joint[1]), 1e-15);
    }
  }
}

TEST(Terminal, MatchesBruteForceConditional) {
  std::mt19937_64 rng(21);
  for (std::size_t h = 0; h <= 2; ++h) {
    const auto p = testing::random_params({3, h}, rng);
    const auto y = testing::random_data(4, rng);
    const auto bf = oracle::brute_force_joint(p, y);
    const auto s = terminal_posterior(p, 3, y[3]);
    expect_tensor_near(s.values, bf.conditional(3, 3 - s.lag, 3), 1e-12, "h=" + std::to_string(h));
  }
}

TEST(WindowedConditional, SingleStateIsOne) {
  const auto p = uniform_parameters({1, 2}, {2.0});
  const auto [slice, numerator] = windowed_full_conditional(p, 0.3, 3, 2);
  EXPECT_EQ(slice.width(), 5u);
  expect_tensor_near(slice.values, Tensor{1.0}, 0.0, "k=1");
}

TEST(WindowedConditional, FirstOrderInteriorFormula) {
  // f(y_t|u_t) p(u_t|u_{t-1}) p(u_{t+1}|u_t) / c(u_{t-1}, u_{t+1}, y_t)
  std::mt19937_64 rng(22);
  const auto p = testing::random_params({2, 1}, rng);
  const double y = 0.8;
  const auto [slice, numerator] = windowed_full_conditional(p, y, 2, 1);
  ASSERT_EQ(slice.values.size(), 8u);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t c = 0; c < 2; ++c) {
      double num[2];
      for (std::size_t b = 0; b < 2; ++b) {
        num[b] = emission_density(y, p.sigma[b]) * p.pi(a, b) * p.pi(b, c);
      }
      for (std::size_t b = 0; b < 2; ++b) {
        const std::size_t idx = (a * 2 + b) * 2 + c;
        EXPECT_NEAR(numerator.values[idx], num[b], 1e-15);
        EXPECT_NEAR(slice.values[idx], num[b] / (num[0] + num[1]), 1e-15);
      }
    }
  }
}

TEST(WindowedConditional, SecondOrderMatchesWindowEnumeration) {
  // T = 6, 0-based t = 2, look-ahead 2: the window covers times 0..4. The
  // conditional of u_2 given the other window states and y_2 alone comes
  // from the prior of the window times f(y_2 | u_2).
  std::mt19937_64 rng(23);
  const auto p = testing::random_params({2, 2}, rng);
  const double y = -2.1;
  const auto [slice, numerator] = windowed_full_conditional(p, y, 2, 2);
  ASSERT_EQ(slice.width(), 5u);
  Tensor joint(32);
  for (std::size_t idx = 0; idx < 32; ++idx) {
    const auto path = digits(idx, 2, 5);
    double w = emission_density(y, p.sigma[path[2]]);
    for (std::size_t s = 0; s < 5; ++s) w *= prior_factor(p, path, s);
    joint[idx] = w;
  }
  const auto c = window::marginalize(joint, 2, 5, 2);
  for (std::size_t idx = 0; idx < 32; ++idx) {
    const auto d = digits(idx, 2, 5);
    const std::size_t rest = ((d[0] * 2 + d[1]) * 2 + d[3]) * 2 + d[4];
    EXPECT_NEAR(slice.values[idx], joint[idx] / c[rest], 1e-13) << idx;
  }
}

TEST(Peel, SingleStateIsOne) {
  const auto p = uniform_parameters({1, 1}, {1.0});
  const std::vector<double> y{0.2, -0.4, 1.0};
  const auto slices = backward_pass(p, y);
  const auto inner = windowed_full_conditional(p, y[0], 0, 1).first;
  expect_tensor_near(peel(inner, slices[1], 1).values, Tensor{1.0}, 0.0, "k=1");
}

TEST(Peel, FirstOrderThreeOccasionsMatchesFullJoint) {
  // 1-based t = 2 of T = 3 is 0-based t = 1.
  std::mt19937_64 rng(24);
  const auto p = testing::random_params({2, 1}, rng);
  const auto y = testing::random_data(3, rng);
  const auto slices = backward_pass(p, y);
  const auto inner = windowed_full_conditional(p, y[1], 1, 1).first;
  const auto peeled = peel(inner, slices[2], 2);
  const auto bf = oracle::brute_force_joint(p, y);
  expect_tensor_near(peeled.values, bf.conditional(1, 0, 1), 1e-13, "q(u_2|u_1,y)");
}

TEST(Peel, ExchangeableModelReducesToPerOccasionBayes) {
  // Uniform transitions make the states independent a priori, so every
  // slice is f(y_t|v) / sum_w f(y_t|w) whatever the window.
  for (double s2 : {1.0, 2.5}) {
    const auto p = uniform_parameters({3, 2}, {1.0, s2, 0.6});
    const std::vector<double> y{0.3, -1.2, 2.2, 0.1, -0.7};
    const auto slices = backward_pass(p, y);
    for (const auto& s : slices) {
      const auto f = emission_vector(y[s.t], p);
      const double c = std::accumulate(f.begin(), f.end(), 0.0);
      for (std::size_t i = 0; i < s.values.size(); ++i) {
        EXPECT_NEAR(s.values[i], f[i % 3] / c, 1e-14) << "t=" << s.t;
      }
    }
  }
}

TEST(Peel, EveryIntermediateSliceMatchesBruteForce) {
  std::mt19937_64 rng(25);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t k = 1 + rng() % 3;
    const std::size_t h = rng() % 3;
    const std::size_t T = 1 + rng() % 6;
    const auto p = testing::random_params({k, h}, rng);
    const auto y = testing::random_data(T, rng);
    const auto bf = oracle::brute_force_joint(p, y);
    const auto slices = backward_pass(p, y);
    for (std::size_t t = 0; t + 1 < T; ++t) {
      const std::size_t J = std::min(T - 1 - t, h);
      auto q = windowed_full_conditional(p, y[t], t, J).first;
      expect_tensor_near(q.values, bf.conditional(t, q.first_time(), t + J), 1e-10,
                         "full conditional t=" + std::to_string(t));
      for (std::size_t j = J; j-- > 0;) {
        q = peel(q, slices[t + j + 1], k);
        ASSERT_EQ(q.j, j);
        expect_tensor_near(q.values, bf.conditional(t, q.first_time(), t + j), 1e-10,
                           "peeled t=" + std::to_string(t) + " j=" + std::to_string(j));
      }
    }
  }
}

TEST(BackwardPass, SingleObservationIsBayes) {
  std::mt19937_64 rng(26);
  const auto p = testing::random_params({3, 2}, rng);
  const std::vector<double> y{1.1};
  const auto slices = backward_pass(p, y);
  ASSERT_EQ(slices.size(), 1u);
  const auto f = emission_vector(y[0], p);
  double c = 0.0;
  for (std::size_t v = 0; v < 3; ++v) c += p.early[0](0, v) * f[v];
  for (std::size_t v = 0; v < 3; ++v) EXPECT_NEAR(slices[0].values[v], p.early[0](0, v) * f[v] / c, 1e-15);
}

TEST(BackwardPass, FirstOrderMatchesBaumWelchRatios) {
  std::mt19937_64 rng(27);
  const auto p = testing::random_params({2, 1}, rng);
  const auto y = testing::random_data(5, rng);
  const auto slices = backward_pass(p, y);
  const auto tables = oracle::bw_backward(p, y);
  const auto post = oracle::bw_posteriors(p, y, tables);
  for (std::size_t v = 0; v < 2; ++v) EXPECT_NEAR(slices[0].values[v], post.marginals(0, v), 1e-12);
  for (std::size_t t = 1; t < 5; ++t) {
    for (std::size_t a = 0; a < 2; ++a) {
      for (std::size_t b = 0; b < 2; ++b) {
        EXPECT_NEAR(slices[t].values[a * 2 + b],
                    post.pairwise[t - 1](a, b) / post.marginals(t - 1, a), 1e-12);
      }
    }
  }
}

TEST(BackwardPass, SecondOrderThreeStatesMatchesBruteForce) {
  std::mt19937_64 rng(28);
  const auto p = testing::random_params({3, 2}, rng);
  const auto y = testing::random_data(6, rng);
  const auto bf = oracle::brute_force_joint(p, y);
  const auto slices = backward_pass(p, y);
  for (const auto& s : slices) {
    EXPECT_EQ(s.j, 0u);
    expect_tensor_near(s.values, bf.conditional(s.t, s.first_time(), s.t), 1e-12,
                       "t=" + std::to_string(s.t));
  }
}

TEST(BackwardPass, SlicesAreNormalizedOverThePivot) {
  std::mt19937_64 rng(29);
  const auto p = testing::random_params({3, 2}, rng);
  const auto y = testing::random_data(40, rng);
  for (const auto& s : backward_pass(p, y)) {
    const auto c = window::marginalize(s.values, 3, s.width(), s.pivot());
    for (double x : c) EXPECT_NEAR(x, 1.0, 1e-12);
  }
}

TEST(BackwardPass, ShortSeriesCapLookAhead) {
  // T <= h: windows never run past the end of the series.
  std::mt19937_64 rng(30);
  const auto p = testing::random_params({2, 3}, rng);
  const auto y = testing::random_data(2, rng);
  const auto bf = oracle::brute_force_joint(p, y);
  const auto slices = backward_pass(p, y);
  ASSERT_EQ(slices.size(), 2u);
  expect_tensor_near(slices[1].values, bf.conditional(1, 0, 1), 1e-12, "t=1");
  expect_tensor_near(slices[0].values, bf.conditional(0, 0, 0), 1e-12, "t=0");
}

TEST(BackwardPass, RejectsBadInput) {
  const auto p = testing::persistent_two_state();
  EXPECT_THROW(backward_pass(p, std::vector<double>{}), Error);
  EXPECT_THROW(backward_pass(p, std::vector<double>{1.0, std::nan("")}), Error);
  auto bad = p;
  bad.sigma[0] = -1.0;
  EXPECT_THROW(backward_pass(bad, std::vector<double>{1.0}), Error);
}

TEST(ForwardJoints, FirstJointIsFirstMarginal) {
  std::mt19937_64 rng(31);
  const auto p = testing::random_params({3, 2}, rng);
  const auto y = testing::random_data(5, rng);
  const auto slices = backward_pass(p, y);
  const auto joints = forward_joint_pass(slices, 3, 2);
  const auto bf = oracle::brute_force_joint(p, y);
  EXPECT_EQ(joints[0].width, 1u);
  expect_tensor_near(joints[0].values, bf.window_posterior(0, 0), 1e-12, "q(u_1|y)");
}

TEST(ForwardJoints, SingleStateIsOne) {
  const auto p = uniform_parameters({1, 2}, {1.0});
  const std::vector<double> y{0.1, 0.2, 0.3, 0.4};
  for (const auto& j : forward_joint_pass(backward_pass(p, y), 1, 2)) {
    expect_tensor_near(j.values, Tensor{1.0}, 0.0, "k=1");
  }
}

TEST(ForwardJoints, FirstOrderPairsMatchBaumWelch) {
  std::mt19937_64 rng(32);
  const auto p = testing::random_params({2, 1}, rng);
  const auto y = testing::random_data(5, rng);
  const auto joints = forward_joint_pass(backward_pass(p, y), 2, 1);
  const auto post = oracle::bw_posteriors(p, y, oracle::bw_backward(p, y));
  for (std::size_t t = 1; t < 5; ++t) {
    ASSERT_EQ(joints[t].width, 2u);
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b)
        EXPECT_NEAR(joints[t].values[a * 2 + b], post.pairwise[t - 1](a, b), 1e-12);
  }
}

TEST(ForwardJoints, MatchBruteForceWindows) {
  std::mt19937_64 rng(33);
  for (std::size_t h = 0; h <= 3; ++h) {
    const auto p = testing::random_params({2, h}, rng);
    const auto y = testing::random_data(6, rng);
    const auto bf = oracle::brute_force_joint(p, y);
    for (const auto& j : forward_joint_pass(backward_pass(p, y), 2, h)) {
      EXPECT_EQ(j.width, std::min(j.t, h) + 1);
      expect_tensor_near(j.values, bf.window_posterior(j.first_time(), j.t), 1e-12,
                         "h=" + std::to_string(h) + " t=" + std::to_string(j.t));
    }
  }
}

TEST(ForwardJoints, WindowReductionStep) {
  // Past the first h occasions, q*_{t+1} is q_{t+1,0} times the marginal of
  // q*_t without its oldest state, and neighbouring joints share the
  // marginal of their overlap.
  std::mt19937_64 rng(34);
  const std::size_t k = 3;
  const std::size_t h = 2;
  const auto p = testing::random_params({k, h}, rng);
  const auto y = testing::random_data(12, rng);
  const auto slices = backward_pass(p, y);
  const auto joints = forward_joint_pass(slices, k, h);
  for (std::size_t t = h; t + 1 < y.size(); ++t) {
    const auto reduced = window::marginalize(joints[t].values, k, h + 1, 0);
    const auto& next = joints[t + 1].values;
    for (std::size_t i = 0; i < next.size(); ++i) {
      EXPECT_NEAR(next[i], slices[t + 1].values[i] * reduced[i / k], 1e-15);
    }
    expect_tensor_near(window::marginalize(next, k, h + 1, h), reduced, 1e-12,
                       "overlap t=" + std::to_string(t));
  }
}

TEST(Marginals, SingleStateColumnOfOnes) {
  const auto s = smooth(uniform_parameters({1, 1}, {1.0}), std::vector<double>{1.0, 2.0, 3.0});
  for (std::size_t t = 0; t < 3; ++t) EXPECT_DOUBLE_EQ(s.marginals(t, 0), 1.0);
}

TEST(Marginals, UniformModelGivesUniformMarginals) {
  const auto p = uniform_parameters({3, 2}, {1.5, 1.5, 1.5});
  const auto s = smooth(p, std::vector<double>{0.5, -1.0, 2.0, 0.0});
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t v = 0; v < 3; ++v) EXPECT_NEAR(s.marginals(t, v), 1.0 / 3.0, 1e-15);
}

TEST(Marginals, MatchBaumWelchAndBruteForce) {
  std::mt19937_64 rng(35);
  {
    const auto p = testing::random_params({3, 1}, rng);
    const auto y = testing::random_data(30, rng);
    const auto s = smooth(p, y);
    const auto post = oracle::bw_posteriors(p, y, oracle::bw_backward(p, y));
    expect_tensor_near(s.marginals.data(), post.marginals.data(), 1e-12, "h=1");
  }
  {
    const auto p = testing::random_params({2, 2}, rng);
    const auto y = testing::random_data(5, rng);
    const auto s = smooth(p, y);
    const auto bf = oracle::brute_force_joint(p, y);
    for (std::size_t t = 0; t < 5; ++t) {
      expect_tensor_near(Tensor(s.marginals.row(t).begin(), s.marginals.row(t).end()),
                         bf.window_posterior(t, t), 1e-12, "h=2 t=" + std::to_string(t));
      double sum = 0.0;
      for (double x : s.marginals.row(t)) sum += x;
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(LogLikelihood, SingleStateIsIidGaussian) {
  const auto p = uniform_parameters({1, 2}, {1.7});
  const std::vector<double> y{0.3, -2.0, 1.1, 4.2, -0.6};
  double want = 0.0;
  for (double v : y) want += std::log(emission_density(v, 1.7));
  EXPECT_NEAR(smooth(p, y).loglik, want, 1e-12);
}

TEST(LogLikelihood, MatchesBothOracles) {
  std::mt19937_64 rng(36);
  {
    const auto p = testing::random_params({2, 1}, rng);
    const auto y = testing::random_data(5, rng);
    EXPECT_NEAR(smooth(p, y).loglik, oracle::bw_forward(p, y).log_likelihood(), 1e-12);
  }
  {
    const auto p = testing::random_params({2, 2}, rng);
    const auto y = testing::random_data(5, rng);
    EXPECT_NEAR(smooth(p, y).loglik, oracle::brute_force_joint(p, y).log_likelihood(), 1e-12);
  }
}

TEST(LogLikelihood, ReferenceInvariance) {
  std::mt19937_64 rng(37);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t k = 2 + rng() % 2;
    const std::size_t h = rng() % 3;
    const auto p = testing::random_params({k, h}, rng);
    const auto y = testing::random_data(8, rng);
    const auto slices = backward_pass(p, y);
    std::vector<std::size_t> ref(y.size());
    for (auto& r : ref) r = rng() % k;
    ASSERT_TRUE(admissible_reference(p, y, slices, ref));
    EXPECT_NEAR(log_likelihood(p, y, slices, ref), log_likelihood(p, y, slices), 1e-9);
    EXPECT_NEAR(log_likelihood(p, y, slices, greedy_path(slices, k)), log_likelihood(p, y, slices),
                1e-9);
  }
}

TEST(LogLikelihood, InadmissibleReferenceThrowsAndDefaultFallsBack) {
  auto p = testing::persistent_two_state(0.9);
  p.early[0] = ConditionalTable(1, 2, {0.0, 1.0});
  const std::vector<double> y{0.4, 2.5, -3.0, 0.2};
  const auto slices = backward_pass(p, y);
  const std::vector<std::size_t> zeros(y.size(), 0);
  EXPECT_FALSE(admissible_reference(p, y, slices, zeros));
  EXPECT_THROW(log_likelihood(p, y, slices, zeros), Error);
  EXPECT_NEAR(log_likelihood(p, y, slices), oracle::brute_force_joint(p, y).log_likelihood(),
              1e-12);
  EXPECT_THROW(log_likelihood(p, y, slices, std::vector<std::size_t>{1, 1}), Error);
}

TEST(LocalDecode, Basics) {
  Matrix m(3, 3);
  m(0, 0) = 0.2, m(0, 1) = 0.5, m(0, 2) = 0.3;
  m(1, 0) = 0.4, m(1, 1) = 0.4, m(1, 2) = 0.2;
  m(2, 0) = 0.1, m(2, 1) = 0.1, m(2, 2) = 0.8;
  EXPECT_EQ(local_decode(m), (std::vector<std::size_t>{1, 0, 2}));
  EXPECT_EQ(local_decode(Matrix(4, 1, 1.0)), std::vector<std::size_t>(4, 0));
}

TEST(LocalDecode, MatchesBruteForceArgmax) {
  std::mt19937_64 rng(38);
  const auto p = testing::random_params({3, 2}, rng);
  const auto y = testing::random_data(6, rng);
  const auto decoded = local_decode(smooth(p, y).marginals);
  const auto bf = oracle::brute_force_joint(p, y);
  for (std::size_t t = 0; t < 6; ++t) {
    const auto m = bf.window_posterior(t, t);
    EXPECT_EQ(decoded[t], static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin()));
  }
}

TEST(Predict, SingleState) {
  const auto p = uniform_parameters({1, 1}, {2.0});
  const auto pr = predict(p, smooth(p, std::vector<double>{1.0, -1.0}));
  EXPECT_EQ(pr.state, 0u);
  EXPECT_NEAR(pr.density(0.5), emission_density(0.5, 2.0), 1e-15);
}

TEST(Predict, AbsorbingChainKeepsDecodedState) {
  const auto p = testing::persistent_two_state(1.0);
  for (const auto& y : {std::vector<double>{0.1, -0.2, 0.3},
                                      std::vector<double>{5.0, -4.0, 6.0}}) {
    const auto s = smooth(p, y);
    const auto decoded = local_decode(s.marginals);
    EXPECT_EQ(predict(p, s).state, decoded.back());
  }
}

TEST(Predict, UsesTheRowOfTheLastWindow) {
  std::mt19937_64 rng(39);
  const auto p = testing::random_params({3, 2}, rng);
  const std::vector<std::size_t> states{0, 2, 1, 2};
  const auto pr = predict(p, states.size(), states);
  EXPECT_EQ(pr.window, (std::vector<std::size_t>{1, 2}));
  for (std::size_t v = 0; v < 3; ++v) EXPECT_DOUBLE_EQ(pr.weights[v], p.pi(1 * 3 + 2, v));
  // A series shorter than h draws from the early table of the next occasion.
  const std::vector<std::size_t> one{2};
  const auto early = predict(p, 1, one);
  for (std::size_t v = 0; v < 3; ++v) EXPECT_DOUBLE_EQ(early.weights[v], p.early[1](2, v));
}

TEST(Predict, MixtureIntegratesToOne) {
  std::mt19937_64 rng(40);
  const auto p = testing::random_params({3, 1}, rng);
  const auto pr = predict(p, smooth(p, testing::random_data(20, rng)));
  const double mass = testing::simpson([&](double y) { return pr.density(y); }, -40.0, 40.0);
  EXPECT_NEAR(mass, 1.0, 1e-6);
}

TEST(Zeros, EmissionUnderflowMatchesBruteForce) {
  // f(40 | sigma = 0.5) underflows to exactly zero.
  auto p = testing::persistent_two_state(0.9, 0.5, 3.0);
  const std::vector<double> y{0.2, 40.0, -0.3, 0.1};
  ASSERT_EQ(emission_density(40.0, 0.5), 0.0);
  const auto s = smooth(p, y);
  const auto bf = oracle::brute_force_joint(p, y);
  EXPECT_NEAR(s.loglik, bf.log_likelihood(), 1e-10);
  for (std::size_t t = 0; t < y.size(); ++t) {
    expect_tensor_near(s.joints[t].values, bf.window_posterior(s.joints[t].first_time(), t), 1e-12,
                       "t=" + std::to_string(t));
  }
}

TEST(Zeros, EveryStateUnderflowingAtOneOccasion) {
  // Both densities at y = 60 are below the smallest double.
  auto p = testing::persistent_two_state(0.9, 0.5, 1.0);
  const std::vector<double> y{0.2, 60.0, -0.3, 0.1, 1.2};
  ASSERT_EQ(emission_density(60.0, 1.0), 0.0);
  const auto s = smooth(p, y);
  EXPECT_NEAR(s.loglik, oracle::bw_forward(p, y).log_likelihood(), 1e-9);
  const auto bf = oracle::brute_force_joint(p, y);
  for (std::size_t t = 0; t < y.size(); ++t) {
    expect_tensor_near(s.joints[t].values, bf.window_posterior(s.joints[t].first_time(), t), 1e-12,
                       "t=" + std::to_string(t));
  }
}

TEST(LogLikelihood, DefaultReferenceAvoidsNearUnderflowPosteriors) {
  // Along the all-first-state path some posteriors are around 1e-300, where
  // doubles keep only a few significant bits.
  const auto p = testing::persistent_two_state(0.9, 0.147, 2.6);
  std::mt19937_64 rng(43);
  auto y = simulate({2, 1}, p, 300, 5).series.y;
  y[100] = 5.6;
  y[200] = -5.5;
  const auto slices = backward_pass(p, y);
  const double bw = oracle::bw_forward(p, y).log_likelihood();
  EXPECT_NEAR(log_likelihood(p, y, slices), bw, 1e-9);
  EXPECT_NEAR(log_likelihood(p, y, slices, greedy_path(slices, 2)), bw, 1e-9);
}

TEST(Zeros, ZeroInitialProbabilityMatchesBruteForce) {
  std::mt19937_64 rng(41);
  auto p = testing::random_params({3, 2}, rng);
  p.early[0] = ConditionalTable(1, 3, {0.0, 0.4, 0.6});
  const auto y = testing::random_data(6, rng);
  const auto s = smooth(p, y);
  const auto bf = oracle::brute_force_joint(p, y);
  EXPECT_NEAR(s.loglik, bf.log_likelihood(), 1e-10);
  for (std::size_t t = 0; t < y.size(); ++t) {
    expect_tensor_near(s.joints[t].values, bf.window_posterior(s.joints[t].first_time(), t), 1e-12,
                       "t=" + std::to_string(t));
  }
}

TEST(Zeros, StrictModeRejectsImpossibleWindows) {
  auto p = testing::persistent_two_state(0.9);
  p.pi = ConditionalTable(2, 2, {1.0, 0.0, 0.5, 0.5});
  const std::vector<double> y{0.1, 0.2, 0.3};
  EXPECT_THROW(backward_pass(p, y, {true, nullptr}), ZeroMassError);
  EXPECT_NO_THROW(backward_pass(p, y));
}

TEST(Stability, LongSeriesStaysInUnitInterval) {
  std::mt19937_64 rng(42);
  const auto p = testing::random_params({3, 1}, rng);
  const auto sim = simulate({3, 1}, p, 5000, 9);
  PassMonitor monitor;
  const auto s = smooth(p, sim.series.y, {false, &monitor});
  EXPECT_GT(monitor.tensors, 5000u);
  EXPECT_EQ(monitor.non_finite, 0u);
  EXPECT_GE(monitor.min_entry, 0.0);
  EXPECT_LE(monitor.max_entry, 1.0);
  EXPECT_TRUE(std::isfinite(s.loglik));
  EXPECT_NEAR(s.loglik, oracle::bw_forward(p, sim.series.y).log_likelihood(), 1e-6);
}

}  // namespace
}  // namespace hohmm
