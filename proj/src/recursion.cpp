#include "hohmm/recursion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hohmm/error.hpp"
#include "hohmm/window.hpp"

namespace hohmm {

namespace {

constexpr double kRangeSlack = 1e-10;
constexpr double kReferenceFloor = 1e-250;

// Normalizes `values` over the variable at `position` in place. A
// configuration whose constant is zero is left at zero (or rejected).
void normalize_over(Tensor& values, std::size_t k, std::size_t width, std::size_t position,
                    bool strict, std::size_t t) {
  const std::size_t outer = ipow(k, position);
  const std::size_t inner = ipow(k, width - position - 1);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      double c = 0.0;
      for (std::size_t v = 0; v < k; ++v) c += values[(o * k + v) * inner + i];
      if (c > 0.0) {
        for (std::size_t v = 0; v < k; ++v) values[(o * k + v) * inner + i] /= c;
      } else if (strict) {
        throw ZeroMassError("recursion", "zero normalizing constant at t = " +
                                             std::to_string(t + 1));
      } else {
        for (std::size_t v = 0; v < k; ++v) values[(o * k + v) * inner + i] = 0.0;
      }
    }
  }
}

double log_density(double y, double sigma) {
  const double z = y / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

// exp(log f(y|v) - max_w log f(y|w)) and that maximum.
std::pair<std::vector<double>, double> relative_emissions(double y, const ParameterSet& params) {
  std::vector<double> logs(params.k());
  for (std::size_t v = 0; v < logs.size(); ++v) logs[v] = log_density(y, params.sigma[v]);
  const double top = *std::max_element(logs.begin(), logs.end());
  for (double& l : logs) l = std::exp(l - top);
  return {std::move(logs), top};
}

// Flat index of ref[first..last] as a window tensor.
std::size_t window_index(std::span<const std::size_t> ref, std::size_t first, std::size_t last,
                         std::size_t k) {
  std::size_t idx = 0;
  for (std::size_t s = first; s <= last; ++s) idx = idx * k + ref[s];
  return idx;
}

}  // namespace

void PassMonitor::observe(std::span<const double> values) {
  ++tensors;
  entries += values.size();
  for (double v : values) {
    if (!std::isfinite(v)) {
      ++non_finite;
      continue;
    }
    min_entry = std::min(min_entry, v);
    max_entry = std::max(max_entry, v);
  }
}

std::pair<PosteriorSlice, NumeratorTensor> windowed_full_conditional(
    const ParameterSet& params, double y_t, std::size_t t, std::size_t j,
    const RecursionOptions& options) {
  const std::size_t k = params.k();
  const std::size_t h = params.h();
  if (j > h) throw Error("recursion", "look-ahead exceeds the chain order");
  const std::size_t lag = std::min(t, h);

  // a_{t,0} = (1 (x) f_t) x p_t, with f_t taken relative to its largest
  // entry. The factor cancels in every normalization over u_t and keeps
  // far-out observations from underflowing.
  const auto [f, log_scale] = relative_emissions(y_t, params);
  Tensor a = params.transition(t).values();
  for (std::size_t idx = 0; idx < a.size(); ++idx) a[idx] *= f[idx % k];

  // a_{t,l} = (a_{t,l-1} (x) 1_k) x (1 (x) p_{t+l})
  for (std::size_t l = 1; l <= j; ++l) {
    const auto& p = params.transition(t + l).values();
    const std::size_t p_len = p.size();
    Tensor next(a.size() * k);
    for (std::size_t idx = 0; idx < next.size(); ++idx) {
      next[idx] = a[idx / k] * p[idx % p_len];
    }
    a = std::move(next);
  }

  NumeratorTensor numerator{t, j, lag, a};
  const double scale = std::exp(log_scale);
  for (double& x : numerator.values) x *= scale;
  PosteriorSlice slice{t, j, lag, std::move(a)};
  normalize_over(slice.values, k, slice.width(), lag, options.strict_zeros, t);
  if (options.monitor) options.monitor->observe(slice.values);
  return {std::move(slice), std::move(numerator)};
}

PosteriorSlice terminal_posterior(const ParameterSet& params, std::size_t t_last, double y_last,
                                  const RecursionOptions& options) {
  return windowed_full_conditional(params, y_last, t_last, 0, options).first;
}

PosteriorSlice peel(const PosteriorSlice& inner, const PosteriorSlice& next, std::size_t k,
                    const RecursionOptions& options) {
  if (inner.j == 0 || next.j != 0 || next.t != inner.t + inner.j ||
      next.width() > inner.width() ||
      next.first_time() - inner.first_time() != inner.width() - next.width()) {
    throw Error("recursion", "peel called with misaligned windows");
  }
  const std::size_t out_width = inner.width() - 1;
  const std::size_t next_len = next.values.size();
  PosteriorSlice out{inner.t, inner.j - 1, inner.lag, Tensor(ipow(k, out_width))};

  for (std::size_t o = 0; o < out.values.size(); ++o) {
    double sum = 0.0;
    bool impossible = false;
    for (std::size_t v = 0; v < k; ++v) {
      const std::size_t idx = o * k + v;
      const double num = next.values[idx % next_len];
      const double den = inner.values[idx];
      if (num == 0.0) {
        if (den == 0.0 && options.strict_zeros) {
          throw ZeroMassError("recursion", "0/0 ratio while peeling at t = " +
                                               std::to_string(inner.t + 1));
        }
        continue;
      }
      if (den == 0.0) {
        impossible = true;
        break;
      }
      sum += num / den;
    }
    if (impossible) {
      out.values[o] = 0.0;
    } else if (sum > 0.0) {
      out.values[o] = 1.0 / sum;
    } else {
      if (options.strict_zeros) {
        throw ZeroMassError("recursion", "empty reciprocal sum while peeling at t = " +
                                             std::to_string(inner.t + 1));
      }
      out.values[o] = 0.0;
    }
    if (out.values[o] > 1.0 + kRangeSlack) {
      throw Error("recursion", "peeled probability above one at t = " +
                                   std::to_string(inner.t + 1) +
                                   " (misaligned windows or structural zero transitions)");
    }
  }
  if (options.monitor) options.monitor->observe(out.values);
  return out;
}

std::vector<PosteriorSlice> backward_pass(const ParameterSet& params, std::span<const double> y,
                                          const RecursionOptions& options) {
  require_observations(y);
  require_valid(params, params.config());
  const std::size_t T = y.size();
  const std::size_t k = params.k();
  const std::size_t h = params.h();

  std::vector<PosteriorSlice> slices(T);
  slices[T - 1] = terminal_posterior(params, T - 1, y[T - 1], options);
  for (std::size_t t = T - 1; t-- > 0;) {
    const std::size_t J = std::min(T - 1 - t, h);
    PosteriorSlice q = windowed_full_conditional(params, y[t], t, J, options).first;
    for (std::size_t j = J; j-- > 0;) q = peel(q, slices[t + j + 1], k, options);
    slices[t] = std::move(q);
  }
  return slices;
}

std::vector<SmoothedJoint> forward_joint_pass(std::span<const PosteriorSlice> slices,
                                              std::size_t k, std::size_t h,
                                              PassMonitor* monitor) {
  std::vector<SmoothedJoint> joints;
  joints.reserve(slices.size());
  for (std::size_t t = 0; t < slices.size(); ++t) {
    const auto& q = slices[t];
    if (q.t != t || q.j != 0) throw Error("recursion", "forward pass needs q_{t,0} slices");
    if (t == 0) {
      joints.push_back({0, 1, q.values});
      if (monitor) monitor->observe(joints.back().values);
      continue;
    }
    const SmoothedJoint& prev = joints.back();
    Tensor carried = t <= h ? prev.values : window::marginalize(prev.values, k, prev.width, 0);
    SmoothedJoint cur{t, q.width(), q.values};
    for (std::size_t idx = 0; idx < cur.values.size(); ++idx) {
      cur.values[idx] *= carried[idx / k];
    }
    joints.push_back(std::move(cur));
    if (monitor) monitor->observe(joints.back().values);
  }
  return joints;
}

Matrix state_marginals(std::span<const SmoothedJoint> joints, std::size_t k) {
  Matrix out(joints.size(), k);
  for (std::size_t t = 0; t < joints.size(); ++t) {
    const auto& v = joints[t].values;
    for (std::size_t idx = 0; idx < v.size(); ++idx) out(t, idx % k) += v[idx];
  }
  return out;
}

bool admissible_reference(const ParameterSet& params, std::span<const double> y,
                          std::span<const PosteriorSlice> slices,
                          std::span<const std::size_t> reference) {
  const std::size_t k = params.k();
  if (reference.size() != y.size() || slices.size() != y.size()) return false;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (reference[t] >= k) return false;
    const std::size_t idx = window_index(reference, slices[t].first_time(), t, k);
    if (!(params.transition(t).values()[idx] > 0.0) || !(slices[t].values[idx] > 0.0)) {
      return false;
    }
  }
  return true;
}

double log_likelihood(const ParameterSet& params, std::span<const double> y,
                      std::span<const PosteriorSlice> slices,
                      std::span<const std::size_t> reference) {
  if (!admissible_reference(params, y, slices, reference)) {
    throw Error("recursion", "reference sequence hits a zero posterior or prior");
  }
  const std::size_t k = params.k();
  double total = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const std::size_t idx = window_index(reference, slices[t].first_time(), t, k);
    total += log_density(y[t], params.sigma[reference[t]]) +
             std::log(params.transition(t).values()[idx]) - std::log(slices[t].values[idx]);
  }
  return total;
}

std::vector<std::size_t> greedy_path(std::span<const PosteriorSlice> slices, std::size_t k) {
  std::vector<std::size_t> path(slices.size(), 0);
  for (std::size_t t = 0; t < slices.size(); ++t) {
    const std::size_t row = t == 0 ? 0 : window_index(path, slices[t].first_time(), t - 1, k);
    const double* q = slices[t].values.data() + row * k;
    path[t] = static_cast<std::size_t>(std::max_element(q, q + k) - q);
  }
  return path;
}

double log_likelihood(const ParameterSet& params, std::span<const double> y,
                      std::span<const PosteriorSlice> slices) {
  const std::vector<std::size_t> first_state(y.size(), 0);
  if (admissible_reference(params, y, slices, first_state)) {
    // Posteriors near the underflow threshold carry few significant bits, so
    // such a reference is only used when every factor is comfortably normal.
    bool well_scaled = true;
    for (std::size_t t = 0; t < y.size() && well_scaled; ++t) {
      const std::size_t idx = window_index(first_state, slices[t].first_time(), t, params.k());
      well_scaled = slices[t].values[idx] >= kReferenceFloor;
    }
    if (well_scaled) return log_likelihood(params, y, slices, first_state);
  }
  return log_likelihood(params, y, slices, greedy_path(slices, params.k()));
}

std::vector<std::size_t> local_decode(const Matrix& marginals) {
  std::vector<std::size_t> states(marginals.rows());
  for (std::size_t t = 0; t < marginals.rows(); ++t) {
    const auto row = marginals.row(t);
    states[t] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return states;
}

double Prediction::density(double y) const {
  double d = 0.0;
  for (std::size_t v = 0; v < weights.size(); ++v) d += weights[v] * emission_density(y, sigma[v]);
  return d;
}

Prediction predict(const ParameterSet& params, std::size_t series_length,
                   std::span<const std::size_t> recent_states) {
  const std::size_t k = params.k();
  const std::size_t lag = std::min(series_length, params.h());
  if (recent_states.size() < lag) {
    throw Error("recursion", "prediction needs the last " + std::to_string(lag) + " states");
  }
  Prediction out;
  out.window.assign(recent_states.end() - static_cast<std::ptrdiff_t>(lag), recent_states.end());
  std::size_t row = 0;
  for (auto s : out.window) {
    if (s >= k) throw Error("recursion", "state index out of range in prediction window");
    row = row * k + s;
  }
  const auto probs = params.transition(series_length).row(row);
  out.weights.assign(probs.begin(), probs.end());
  out.sigma = params.sigma;
  out.state = static_cast<std::size_t>(std::max_element(out.weights.begin(), out.weights.end()) -
                                       out.weights.begin());
  return out;
}

Smoothing smooth(const ParameterSet& params, std::span<const double> y,
                 const RecursionOptions& options) {
  Smoothing s;
  s.slices = backward_pass(params, y, options);
  s.joints = forward_joint_pass(s.slices, params.k(), params.h(), options.monitor);
  s.marginals = state_marginals(s.joints, params.k());
  s.loglik = log_likelihood(params, y, s.slices);
  return s;
}

Prediction predict(const ParameterSet& params, const Smoothing& smoothing) {
  const auto decoded = local_decode(smoothing.marginals);
  return predict(params, decoded.size(), decoded);
}

}  // namespace hohmm
