#pragma once

// Backward recursion for the posterior of each latent state given the h
// states before it and the whole observed series, computed in the linear
// domain without any rescaling, plus everything built on top of it: the
// forward pass for smoothed window joints, state marginals, the
// log-likelihood, local decoding and one-step prediction.
//
// Times are 0-based throughout. The window of a slice at time t with
// look-ahead j covers times t-lag .. t+j where lag = min(t, h); u_t sits at
// position lag inside it.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hohmm/model.hpp"

namespace hohmm {

/// q(u_t | u_{t-lag..t-1}, u_{t+1..t+j}, y) as a window tensor.
struct PosteriorSlice {
  std::size_t t = 0;
  std::size_t j = 0;
  std::size_t lag = 0;
  Tensor values;

  std::size_t width() const { return lag + j + 1; }
  std::size_t first_time() const { return t - lag; }
  std::size_t pivot() const { return lag; }
};

/// f(y_t | u_t) * prod_{l=0..j} p(u_{t+l} | window), the unnormalized
/// numerator of the windowed full conditional.
struct NumeratorTensor {
  std::size_t t = 0;
  std::size_t j = 0;
  std::size_t lag = 0;
  Tensor values;

  std::size_t width() const { return lag + j + 1; }
};

/// q(u_{t-width+1}, ..., u_t | y).
struct SmoothedJoint {
  std::size_t t = 0;
  std::size_t width = 1;
  Tensor values;

  std::size_t first_time() const { return t + 1 - width; }
};

/// Collects the range of every posterior tensor entry produced by a pass,
/// including the intermediate look-ahead slices of the peeling steps.
struct PassMonitor {
  double min_entry = std::numeric_limits<double>::infinity();
  double max_entry = -std::numeric_limits<double>::infinity();
  std::size_t tensors = 0;
  std::size_t entries = 0;
  std::size_t non_finite = 0;

  void observe(std::span<const double> values);
};

struct RecursionOptions {
  /// Throw ZeroMassError instead of applying the zero-mass conventions.
  bool strict_zeros = false;
  PassMonitor* monitor = nullptr;
};

/// Slice at the last occasion: f(y_T|u_T) p(u_T|window) normalized over u_T.
PosteriorSlice terminal_posterior(const ParameterSet& params, std::size_t t_last, double y_last,
                                  const RecursionOptions& options = {});

/// Windowed full conditional of u_t given its h predecessors and the next j
/// states, together with its numerator. Within a series of length T the
/// backward pass uses j = min(T-1-t, h).
std::pair<PosteriorSlice, NumeratorTensor> windowed_full_conditional(
    const ParameterSet& params, double y_t, std::size_t t, std::size_t j,
    const RecursionOptions& options = {});

/// Removes the conditioning on u_{t+j+1} from `inner` (look-ahead j+1)
/// using next = q(u_{t+j+1} | its window, y).
///
/// Zero handling: a term whose `next` entry is 0 contributes nothing to the
/// reciprocal sum; a positive `next` over a zero `inner` entry sends the
/// result to 0, as does an all-zero sum.
PosteriorSlice peel(const PosteriorSlice& inner, const PosteriorSlice& next, std::size_t k,
                    const RecursionOptions& options = {});

/// q(u_t | u_{t-lag..t-1}, y) for every t, computed back to front.
std::vector<PosteriorSlice> backward_pass(const ParameterSet& params, std::span<const double> y,
                                          const RecursionOptions& options = {});

/// Smoothed joints of each window (u_{max(t-h,0)}, ..., u_t) from the slices.
std::vector<SmoothedJoint> forward_joint_pass(std::span<const PosteriorSlice> slices,
                                              std::size_t k, std::size_t h,
                                              PassMonitor* monitor = nullptr);

/// T x k table of q(u_t | y).
Matrix state_marginals(std::span<const SmoothedJoint> joints, std::size_t k);

/// log p(y) from the identity p(y) = f(u, y) / q(u | y) evaluated along
/// `reference`. Throws if the reference has zero posterior somewhere.
double log_likelihood(const ParameterSet& params, std::span<const double> y,
                      std::span<const PosteriorSlice> slices,
                      std::span<const std::size_t> reference);

/// Same with the all-zeros (first state) reference, falling back to the
/// greedy conditional-mode path when that reference is not admissible or
/// passes through posteriors too close to underflow.
double log_likelihood(const ParameterSet& params, std::span<const double> y,
                      std::span<const PosteriorSlice> slices);

/// True when every factor of the likelihood identity is positive along
/// `reference`.
bool admissible_reference(const ParameterSet& params, std::span<const double> y,
                          std::span<const PosteriorSlice> slices,
                          std::span<const std::size_t> reference);

/// Path that picks, at each t, the most probable u_t given the states
/// already picked. Always admissible for proper slices.
std::vector<std::size_t> greedy_path(std::span<const PosteriorSlice> slices, std::size_t k);

/// argmax_v q(u_t = v | y), ties to the lowest index.
std::vector<std::size_t> local_decode(const Matrix& marginals);

/// Predictive distribution for the occasion after the end of the series.
struct Prediction {
  std::size_t state = 0;
  std::vector<double> weights;
  std::vector<double> sigma;
  std::vector<std::size_t> window;

  double density(double y) const;
};

/// Prediction from a window of the last min(T, h) states of a series of
/// length T (the window may be longer; only its tail is used).
Prediction predict(const ParameterSet& params, std::size_t series_length,
                   std::span<const std::size_t> recent_states);

/// Everything the smoothing pass produces for one series.
struct Smoothing {
  std::vector<PosteriorSlice> slices;
  std::vector<SmoothedJoint> joints;
  Matrix marginals;
  double loglik = 0.0;
};

Smoothing smooth(const ParameterSet& params, std::span<const double> y,
                 const RecursionOptions& options = {});

/// Prediction using the locally decoded tail of the series.
Prediction predict(const ParameterSet& params, const Smoothing& smoothing);

}  // namespace hohmm
