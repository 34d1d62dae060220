#include "hohmm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "hohmm/error.hpp"

namespace hohmm::oracle {

namespace {

// Emission densities divided by their largest entry, and the log of that
// entry; keeps outlying observations from underflowing every state.
std::vector<double> scaled_emissions(const ParameterSet& params, double y, double& log_top) {
  std::vector<double> f(params.k());
  for (std::size_t v = 0; v < f.size(); ++v) {
    const double z = y / params.sigma[v];
    f[v] = -0.5 * z * z - std::log(params.sigma[v]) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  log_top = *std::max_element(f.begin(), f.end());
  for (double& x : f) x = std::exp(x - log_top);
  return f;
}

void require_first_order(const ParameterSet& params, std::span<const double> y) {
  if (params.h() != 1) throw Error("oracle", "Baum-Welch oracle needs h = 1");
  require_valid(params, params.config());
  require_observations(y);
}

}  // namespace

double ForwardBackwardTables::log_likelihood() const {
  double total = 0.0;
  for (double s : log_scale) total += s;
  return total;
}

ForwardBackwardTables bw_forward(const ParameterSet& params, std::span<const double> y) {
  require_first_order(params, y);
  const std::size_t T = y.size();
  const std::size_t k = params.k();
  ForwardBackwardTables tab;
  tab.forward = Matrix(T, k);
  tab.log_scale.assign(T, 0.0);

  std::vector<double> alpha(k);
  for (std::size_t t = 0; t < T; ++t) {
    double log_top = 0.0;
    const auto f = scaled_emissions(params, y[t], log_top);
    for (std::size_t v = 0; v < k; ++v) {
      double prior = 0.0;
      if (t == 0) {
        prior = params.early[0](0, v);
      } else {
        for (std::size_t u = 0; u < k; ++u) prior += tab.forward(t - 1, u) * params.pi(u, v);
      }
      alpha[v] = prior * f[v];
    }
    double c = 0.0;
    for (double a : alpha) c += a;
    if (!(c > 0.0)) throw Error("oracle", "zero forward mass at t = " + std::to_string(t + 1));
    for (std::size_t v = 0; v < k; ++v) tab.forward(t, v) = alpha[v] / c;
    tab.log_scale[t] = std::log(c) + log_top;
  }
  return tab;
}

ForwardBackwardTables bw_backward(const ParameterSet& params, std::span<const double> y,
                                  ForwardBackwardTables tab) {
  require_first_order(params, y);
  const std::size_t T = y.size();
  const std::size_t k = params.k();
  if (tab.forward.rows() != T || tab.log_scale.size() != T) {
    throw Error("oracle", "forward tables do not match the series");
  }
  tab.backward = Matrix(T, k, 1.0);
  for (std::size_t t = T - 1; t-- > 0;) {
    double log_top = 0.0;
    const auto f = scaled_emissions(params, y[t + 1], log_top);
    const double c = std::exp(tab.log_scale[t + 1] - log_top);
    for (std::size_t u = 0; u < k; ++u) {
      double b = 0.0;
      for (std::size_t v = 0; v < k; ++v) b += params.pi(u, v) * f[v] * tab.backward(t + 1, v);
      tab.backward(t, u) = b / c;
    }
  }
  tab.has_backward = true;
  return tab;
}

ForwardBackwardTables bw_backward(const ParameterSet& params, std::span<const double> y) {
  return bw_backward(params, y, bw_forward(params, y));
}

BaumWelchPosteriors bw_posteriors(const ParameterSet& params, std::span<const double> y,
                                  const ForwardBackwardTables& tab) {
  if (!tab.has_backward) throw Error("oracle", "backward tables missing");
  const std::size_t T = y.size();
  const std::size_t k = params.k();
  BaumWelchPosteriors out;
  out.marginals = Matrix(T, k);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t u = 0; u < k; ++u) {
      out.marginals(t, u) = tab.forward(t, u) * tab.backward(t, u);
    }
  }
  for (std::size_t t = 0; t + 1 < T; ++t) {
    double log_top = 0.0;
    const auto f = scaled_emissions(params, y[t + 1], log_top);
    const double c = std::exp(tab.log_scale[t + 1] - log_top);
    Matrix slab(k, k);
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t v = 0; v < k; ++v) {
        slab(u, v) = tab.forward(t, u) * params.pi(u, v) * f[v] * tab.backward(t + 1, v) / c;
      }
    }
    out.pairwise.push_back(std::move(slab));
  }
  return out;
}

BruteForceJoint::BruteForceJoint(const ParameterSet& params, std::span<const double> y)
    : k_(params.k()), T_(y.size()), log_fy_(0.0) {
  require_valid(params, params.config());
  require_observations(y);
  double paths = 1.0;
  for (std::size_t t = 0; t < T_; ++t) paths *= static_cast<double>(k_);
  if (paths > static_cast<double>(kMaxPaths)) {
    throw Error("oracle", "brute force needs k^T <= 10^6, got " + std::to_string(paths));
  }
  const std::size_t n = ipow(k_, T_);
  const std::size_t h = params.h();

  std::vector<std::vector<double>> log_f(T_, std::vector<double>(k_));
  for (std::size_t t = 0; t < T_; ++t) {
    for (std::size_t v = 0; v < k_; ++v) {
      const double z = y[t] / params.sigma[v];
      log_f[t][v] =
          -0.5 * z * z - std::log(params.sigma[v]) - 0.5 * std::log(2.0 * std::numbers::pi);
    }
  }

  std::vector<double> log_joint(n);
  std::vector<std::size_t> path(T_);
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::size_t rest = idx;
    for (std::size_t t = T_; t-- > 0;) {
      path[t] = rest % k_;
      rest /= k_;
    }
    double lj = 0.0;
    for (std::size_t t = 0; t < T_; ++t) {
      const std::size_t first = t - std::min(t, h);
      std::size_t w = 0;
      for (std::size_t s = first; s <= t; ++s) w = w * k_ + path[s];
      lj += log_f[t][path[t]] + std::log(params.transition(t).values()[w]);
    }
    log_joint[idx] = lj;
  }

  const double top = *std::max_element(log_joint.begin(), log_joint.end());
  if (!std::isfinite(top)) throw Error("oracle", "every state path has zero probability");
  posterior_.resize(n);
  double total = 0.0;
  for (std::size_t idx = 0; idx < n; ++idx) {
    posterior_[idx] = std::exp(log_joint[idx] - top);
    total += posterior_[idx];
  }
  for (double& p : posterior_) p /= total;
  log_fy_ = top + std::log(total);
}

Tensor BruteForceJoint::window_posterior(std::size_t first, std::size_t last) const {
  if (first > last || last >= T_) throw Error("oracle", "window out of range");
  const std::size_t width = last - first + 1;
  const std::size_t trailing = ipow(k_, T_ - 1 - last);
  const std::size_t size = ipow(k_, width);
  Tensor out(size, 0.0);
  for (std::size_t idx = 0; idx < posterior_.size(); ++idx) {
    out[(idx / trailing) % size] += posterior_[idx];
  }
  return out;
}

Tensor BruteForceJoint::conditional(std::size_t t, std::size_t first, std::size_t last) const {
  if (t < first || t > last) throw Error("oracle", "conditioned variable outside window");
  const Tensor joint = window_posterior(first, last);
  const std::size_t pos = t - first;
  const std::size_t inner = ipow(k_, last - t);
  const std::size_t outer = ipow(k_, pos);
  Tensor out(joint.size(), 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      double mass = 0.0;
      for (std::size_t v = 0; v < k_; ++v) mass += joint[(o * k_ + v) * inner + i];
      if (mass <= 0.0) continue;
      for (std::size_t v = 0; v < k_; ++v) {
        out[(o * k_ + v) * inner + i] = joint[(o * k_ + v) * inner + i] / mass;
      }
    }
  }
  return out;
}

}  // namespace hohmm::oracle
