#include "hohmm/em.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <random>

#include "hohmm/error.hpp"

namespace hohmm {

namespace {

constexpr double kEmptyWeight = 1e-10;
// Volatilities are kept above this fraction of the overall RMS so a state
// cannot collapse onto a handful of zero returns.
constexpr double kSigmaFloor = 1e-6;

// Lower bound on estimated transition probabilities. Probabilities that
// collapse toward zero make joint window probabilities underflow while the
// marginals they are divided by do not, which breaks the peeling identity.
constexpr double kMinTransition = 1e-10;

constexpr double kSelfBias = 0.8;

double root_mean_square(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += v * v;
  return std::sqrt(s / static_cast<double>(y.size()));
}

// Maximizes sum_v c_v log p_v over rows with every p_v >= kMinTransition.
// Entries whose unconstrained share falls below the floor are pinned to it
// and the rest share the remaining mass in proportion to their counts.
// Rows with no mass become uniform.
ConditionalTable rows_from_counts(std::vector<double> counts, std::size_t k) {
  const std::size_t rows = counts.size() / k;
  std::vector<bool> pinned(k);
  for (std::size_t r = 0; r < rows; ++r) {
    double* c = counts.data() + r * k;
    double sum = 0.0;
    for (std::size_t v = 0; v < k; ++v) sum += c[v];
    if (!(sum > 0.0)) {
      for (std::size_t v = 0; v < k; ++v) c[v] = 1.0 / static_cast<double>(k);
      continue;
    }
    std::fill(pinned.begin(), pinned.end(), false);
    std::size_t n_pinned = 0;
    double free_sum = sum;
    double scale = 1.0 / sum;
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t v = 0; v < k; ++v) {
        if (!pinned[v] && c[v] * scale < kMinTransition) {
          pinned[v] = true;
          ++n_pinned;
          free_sum -= c[v];
          changed = true;
        }
      }
      scale = (1.0 - static_cast<double>(n_pinned) * kMinTransition) / free_sum;
    }
    for (std::size_t v = 0; v < k; ++v) c[v] = pinned[v] ? kMinTransition : c[v] * scale;
  }
  return ConditionalTable(rows, k, std::move(counts));
}

// Row r of a table over `width` conditioning states: a draw that puts extra
// mass on repeating the latest conditioning state.
ConditionalTable biased_table(std::size_t k, std::size_t width, double self_mass,
                              std::mt19937_64* rng) {
  const std::size_t rows = ipow(k, width);
  std::vector<double> values(rows * k);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> base(k, 1.0);
    if (rng) {
      for (auto& b : base) b = gamma(*rng);
    }
    double sum = 0.0;
    for (double b : base) sum += b;
    const bool has_latest = width > 0 && k > 1;
    const std::size_t latest = r % k;
    for (std::size_t v = 0; v < k; ++v) {
      double p = base[v] / sum;
      if (has_latest) {
        if (rng) {
          p = (1.0 - self_mass) * p + (v == latest ? self_mass : 0.0);
        } else {
          p = v == latest ? self_mass : (1.0 - self_mass) / static_cast<double>(k - 1);
        }
      }
      values[r * k + v] = p;
    }
  }
  return rows_from_counts(std::move(values), k);
}

std::vector<double> quantile_band_sigma(std::span<const double> y, std::size_t k) {
  std::vector<double> mag(y.size());
  std::transform(y.begin(), y.end(), mag.begin(), [](double v) { return std::abs(v); });
  std::sort(mag.begin(), mag.end());
  const double rms = root_mean_square(y);
  std::vector<double> sigma(k);
  const std::size_t T = mag.size();
  for (std::size_t v = 0; v < k; ++v) {
    const std::size_t lo = v * T / k;
    const std::size_t hi = std::max(lo + 1, (v + 1) * T / k);
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = lo; i < hi && i < T; ++i, ++n) s += mag[i] * mag[i];
    const double band = n > 0 ? std::sqrt(s / static_cast<double>(n)) : rms;
    sigma[v] = std::max(band, rms * 1e-3);
  }
  return sigma;
}

void require_nonzero(std::span<const double> y) {
  require_observations(y);
  if (!(root_mean_square(y) > 0.0)) throw Error("em", "all observations are zero");
}

}  // namespace

void EMSettings::check() const {
  if (max_iterations == 0) throw Error("em", "max_iterations must be positive");
  if (!(rel_tolerance > 0.0)) throw Error("em", "rel_tolerance must be positive");
  if (n_starts == 0) throw Error("em", "n_starts must be positive");
}

EStepResult e_step(const ParameterSet& params, std::span<const double> y,
                   const RecursionOptions& options) {
  Smoothing s = smooth(params, y, options);
  return {{std::move(s.marginals), std::move(s.joints)}, s.loglik};
}

std::vector<std::size_t> empty_states(const ExpectedCounts& counts) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < counts.w_hat.cols(); ++v) {
    double total = 0.0;
    for (std::size_t t = 0; t < counts.w_hat.rows(); ++t) total += counts.w_hat(t, v);
    if (total < kEmptyWeight) out.push_back(v);
  }
  return out;
}

ParameterSet m_step(const ExpectedCounts& counts, std::span<const double> y,
                    const ModelConfig& config, std::span<const double> fallback_sigma) {
  config.check();
  require_nonzero(y);
  const std::size_t k = config.k;
  const std::size_t h = config.h;
  const std::size_t T = y.size();
  if (counts.w_hat.rows() != T || counts.w_hat.cols() != k || counts.z_hat.size() != T) {
    throw Error("em", "expected counts do not match the series");
  }

  ParameterSet out;
  const double floor = kSigmaFloor * root_mean_square(y);
  out.sigma.resize(k);
  for (std::size_t v = 0; v < k; ++v) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      num += counts.w_hat(t, v) * y[t] * y[t];
      den += counts.w_hat(t, v);
    }
    if (den < kEmptyWeight) {
      if (fallback_sigma.size() != k) {
        throw Error("em", "state " + std::to_string(v + 1) + " has no posterior weight");
      }
      out.sigma[v] = fallback_sigma[v];
    } else {
      out.sigma[v] = std::max(std::sqrt(num / den), floor);
    }
  }

  for (std::size_t t = 0; t < h; ++t) {
    if (t < T) {
      out.early.push_back(rows_from_counts(counts.z_hat[t].values, k));
    } else {
      out.early.push_back(ConditionalTable::uniform(ipow(k, t), k));
    }
  }
  std::vector<double> pooled(ipow(k, h + 1), 0.0);
  for (std::size_t t = h; t < T; ++t) {
    const auto& z = counts.z_hat[t].values;
    for (std::size_t idx = 0; idx < pooled.size(); ++idx) pooled[idx] += z[idx];
  }
  out.pi = rows_from_counts(std::move(pooled), k);
  return out;
}

double expected_complete_loglik(const ExpectedCounts& counts, std::span<const double> y,
                                const ParameterSet& params) {
  double total = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    for (std::size_t v = 0; v < params.k(); ++v) {
      const double w = counts.w_hat(t, v);
      if (w == 0.0) continue;
      const double z = y[t] / params.sigma[v];
      total += w * (-0.5 * z * z - std::log(params.sigma[v]) -
                    0.5 * std::log(2.0 * std::numbers::pi));
    }
    const auto& zt = counts.z_hat[t].values;
    const auto& p = params.transition(t).values();
    for (std::size_t idx = 0; idx < zt.size(); ++idx) {
      if (zt[idx] > 0.0) total += zt[idx] * std::log(p[idx]);
    }
  }
  return total;
}

ParameterSet em_iteration(const ParameterSet& params, std::span<const double> y,
                          const RecursionOptions& options) {
  const auto e = e_step(params, y, options);
  return m_step(e.counts, y, params.config(), params.sigma);
}

ParameterSet initial_parameters(const ModelConfig& config, std::span<const double> y,
                                std::size_t start, std::uint64_t seed) {
  config.check();
  require_nonzero(y);
  const std::size_t k = config.k;
  ParameterSet p;
  if (start == 0) {
    p.sigma = quantile_band_sigma(y, k);
    for (std::size_t t = 0; t < config.h; ++t) p.early.push_back(biased_table(k, t, kSelfBias, nullptr));
    if (!p.early.empty()) p.early[0] = ConditionalTable::uniform(1, k);
    p.pi = biased_table(k, config.h, kSelfBias, nullptr);
    return p;
  }

  std::seed_seq seq{static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(start)};
  std::mt19937_64 rng(seq);
  // Odd starts keep the persistence bias, even starts are fully random.
  const bool biased = start % 2 == 1;
  const double self_mass = biased ? kSelfBias : 0.0;
  if (biased) {
    p.sigma = quantile_band_sigma(y, k);
    std::normal_distribution<double> jitter(0.0, 0.2);
    for (double& s : p.sigma) s *= std::exp(jitter(rng));
  } else {
    const double rms = root_mean_square(y);
    std::uniform_real_distribution<double> spread(-1.0, 1.0);
    p.sigma.resize(k);
    for (double& s : p.sigma) s = rms * std::exp(spread(rng));
    std::sort(p.sigma.begin(), p.sigma.end());
  }
  for (std::size_t t = 0; t < config.h; ++t) p.early.push_back(biased_table(k, t, self_mass, &rng));
  p.pi = biased_table(k, config.h, self_mass, &rng);
  return p;
}

FitResult fit_from(const ModelConfig& config, std::span<const double> y, ParameterSet start,
                   const EMSettings& settings) {
  settings.check();
  require_valid(start, config);
  const RecursionOptions options{settings.strict_zeros, nullptr};

  FitResult result;
  result.params = std::move(start);
  auto e = e_step(result.params, y, options);
  result.trace.push_back(e.loglik);
  for (std::size_t it = 0; it < settings.max_iterations; ++it) {
    ParameterSet next = m_step(e.counts, y, config, result.params.sigma);
    auto e_next = e_step(next, y, options);
    const double change = std::abs(e_next.loglik - e.loglik);
    result.params = std::move(next);
    e = std::move(e_next);
    result.trace.push_back(e.loglik);
    if (change <= settings.rel_tolerance * std::abs(result.trace[result.trace.size() - 2])) {
      result.converged = true;
      break;
    }
  }
  result.loglik = e.loglik;
  result.npar = param_count(config);
  result.bic = bic(result.loglik, result.npar, y.size());
  const auto empty = empty_states(e.counts);
  if (!empty.empty()) {
    result.converged = false;
    for (auto v : empty) {
      result.warnings.push_back("state " + std::to_string(v + 1) +
                                " has no posterior weight; its sigma was not updated");
    }
  }
  if (!result.converged) {
    result.warnings.push_back("EM stopped before reaching the tolerance");
  }
  return result;
}

FitResult fit(const ModelConfig& config, std::span<const double> y, const EMSettings& settings) {
  config.check();
  settings.check();
  require_nonzero(y);

  auto run = [&](std::size_t start) -> FitResult {
    FitResult r = fit_from(config, y, initial_parameters(config, y, start, settings.seed), settings);
    r.start_index = start;
    return r;
  };

  std::vector<std::optional<FitResult>> results(settings.n_starts);
  std::vector<std::string> errors(settings.n_starts);
  if (settings.parallel && settings.n_starts > 1) {
    std::vector<std::future<FitResult>> jobs;
    jobs.reserve(settings.n_starts);
    for (std::size_t s = 0; s < settings.n_starts; ++s) {
      jobs.push_back(std::async(std::launch::async, run, s));
    }
    for (std::size_t s = 0; s < settings.n_starts; ++s) {
      try {
        results[s] = jobs[s].get();
      } catch (const Error& ex) {
        errors[s] = ex.what();
      }
    }
  } else {
    for (std::size_t s = 0; s < settings.n_starts; ++s) {
      try {
        results[s] = run(s);
      } catch (const Error& ex) {
        errors[s] = ex.what();
      }
    }
  }

  std::optional<std::size_t> best;
  for (std::size_t s = 0; s < settings.n_starts; ++s) {
    if (!results[s] || !std::isfinite(results[s]->loglik)) continue;
    if (!best || results[s]->loglik > results[*best]->loglik) best = s;
  }
  if (!best) {
    std::string msg = "all " + std::to_string(settings.n_starts) + " starts failed";
    for (const auto& e : errors) {
      if (!e.empty()) {
        msg += "; " + e;
        break;
      }
    }
    throw Error("em", msg);
  }
  return std::move(*results[*best]);
}

double bic(double loglik, std::size_t npar, std::size_t T) {
  if (T < 1) throw Error("em", "BIC needs T >= 1");
  return -2.0 * loglik + static_cast<double>(npar) * std::log(static_cast<double>(T));
}

GridReport grid_search(std::span<const double> y, std::span<const std::size_t> h_values,
                       std::span<const std::size_t> k_values, const EMSettings& settings) {
  if (h_values.empty() || k_values.empty()) throw Error("em", "grid must not be empty");
  GridReport report;
  for (auto h : h_values) {
    for (auto k : k_values) {
      GridCell cell{h, k, std::nullopt, {}};
      try {
        cell.result = fit({k, h, EmissionFamily::kGaussianSV}, y, settings);
      } catch (const Error& ex) {
        cell.error = ex.what();
      }
      report.cells.push_back(std::move(cell));
    }
  }
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    const auto& c = report.cells[i];
    if (!c.result) continue;
    if (!report.selected) {
      report.selected = i;
      continue;
    }
    const auto& best = report.cells[*report.selected];
    const bool better = c.result->bic < best.result->bic ||
                        (c.result->bic == best.result->bic &&
                         (c.h < best.h || (c.h == best.h && c.k < best.k)));
    if (better) report.selected = i;
  }
  return report;
}

}  // namespace hohmm
