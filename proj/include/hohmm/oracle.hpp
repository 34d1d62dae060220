#pragma once

// Reference implementations used to check the recursion: first-order
// scaled Baum-Welch, and exhaustive enumeration of every state path for
// tiny problems of any order.

#include <cstddef>
#include <span>
#include <vector>

#include "hohmm/model.hpp"

namespace hohmm::oracle {

/// Scaled forward/backward tables for a first-order model.
///
/// forward(t, u) = f(u_t, y_{<=t}) / f(y_{<=t}) (rows sum to one) and
/// log_scale[t] = log f(y_t | y_{<t}), so log f(y) = sum of log_scale.
/// backward(t, u) = f(y_{>t} | u_t) / f(y_{>t} | y_{<=t}).
struct ForwardBackwardTables {
  Matrix forward;
  std::vector<double> log_scale;
  Matrix backward;
  bool has_backward = false;

  double log_likelihood() const;
};

ForwardBackwardTables bw_forward(const ParameterSet& params, std::span<const double> y);

/// Completes `tables` (from bw_forward on the same inputs) with the
/// backward recursion.
ForwardBackwardTables bw_backward(const ParameterSet& params, std::span<const double> y,
                                  ForwardBackwardTables tables);

ForwardBackwardTables bw_backward(const ParameterSet& params, std::span<const double> y);

struct BaumWelchPosteriors {
  Matrix marginals;                       // T x k
  std::vector<Matrix> pairwise;           // T-1 slabs, pairwise[t](u, v) = q(u_t=u, u_{t+1}=v | y)
};

BaumWelchPosteriors bw_posteriors(const ParameterSet& params, std::span<const double> y,
                                  const ForwardBackwardTables& tables);

/// Exact joint posterior over all k^T state paths.
class BruteForceJoint {
 public:
  static constexpr std::size_t kMaxPaths = 1'000'000;

  BruteForceJoint(const ParameterSet& params, std::span<const double> y);

  double log_likelihood() const { return log_fy_; }
  std::size_t length() const { return T_; }
  std::size_t k() const { return k_; }

  /// Posterior probability of each complete path, indexed lexicographically.
  const std::vector<double>& path_posterior() const { return posterior_; }

  /// q(u_first, ..., u_last | y) as a window tensor (latest fastest).
  Tensor window_posterior(std::size_t first, std::size_t last) const;

  /// q(u_t | all other variables of [first, last], y) as a window tensor over
  /// [first, last]; entries whose conditioning configuration has zero mass
  /// are 0.
  Tensor conditional(std::size_t t, std::size_t first, std::size_t last) const;

 private:
  std::size_t k_;
  std::size_t T_;
  double log_fy_;
  std::vector<double> posterior_;
};

inline BruteForceJoint brute_force_joint(const ParameterSet& params, std::span<const double> y) {
  return BruteForceJoint(params, y);
}

}  // namespace hohmm::oracle
