#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hohmm/model.hpp"
#include "hohmm/recursion.hpp"

namespace hohmm {

struct EMSettings {
  std::size_t max_iterations = 1000;
  /// Stop once |l_new - l_old| <= rel_tolerance * |l_old|.
  double rel_tolerance = 1e-8;
  std::size_t n_starts = 10;
  std::uint64_t seed = 0;
  bool strict_zeros = false;
  /// Run the starts on separate threads. Results do not depend on this.
  bool parallel = true;

  void check() const;
};

/// Posterior expectations of the complete-data indicators.
/// w_hat(t, v) = q(u_t = v | y); z_hat[t] = q(u_{max(t-h,0)}, ..., u_t | y).
struct ExpectedCounts {
  Matrix w_hat;
  std::vector<SmoothedJoint> z_hat;
};

struct EStepResult {
  ExpectedCounts counts;
  double loglik = 0.0;
};

EStepResult e_step(const ParameterSet& params, std::span<const double> y,
                   const RecursionOptions& options = {});

/// Maximizer of the expected complete-data log-likelihood with every
/// transition probability held at or above 1e-10 and every sigma at or above
/// 1e-6 times the RMS of y. States with total weight below 1e-10 keep
/// fallback_sigma[v]; without a fallback that is an error. Conditioning rows
/// with no mass become uniform.
ParameterSet m_step(const ExpectedCounts& counts, std::span<const double> y,
                    const ModelConfig& config, std::span<const double> fallback_sigma = {});

/// Indices of states whose total posterior weight is below 1e-10.
std::vector<std::size_t> empty_states(const ExpectedCounts& counts);

/// Expected complete-data log-likelihood of params under counts.
double expected_complete_loglik(const ExpectedCounts& counts, std::span<const double> y,
                                const ParameterSet& params);

/// One E-step followed by one M-step.
ParameterSet em_iteration(const ParameterSet& params, std::span<const double> y,
                          const RecursionOptions& options = {});

struct FitResult {
  ParameterSet params;
  double loglik = 0.0;
  std::size_t npar = 0;
  double bic = 0.0;
  std::vector<double> trace;
  bool converged = false;
  std::size_t start_index = 0;
  std::vector<std::string> warnings;
};

/// Starting values for EM start number `start` (0 is deterministic).
ParameterSet initial_parameters(const ModelConfig& config, std::span<const double> y,
                                std::size_t start, std::uint64_t seed);

/// EM from the given starting values.
FitResult fit_from(const ModelConfig& config, std::span<const double> y, ParameterSet start,
                   const EMSettings& settings);

/// Best of settings.n_starts EM runs by final log-likelihood.
FitResult fit(const ModelConfig& config, std::span<const double> y, const EMSettings& settings);

/// -2 loglik + npar ln T.
double bic(double loglik, std::size_t npar, std::size_t T);

struct GridCell {
  std::size_t h = 0;
  std::size_t k = 1;
  std::optional<FitResult> result;
  std::string error;
};

struct GridReport {
  std::vector<GridCell> cells;
  std::optional<std::size_t> selected;
};

/// Fits every (h, k) pair and selects the smallest BIC, ties toward smaller
/// h then smaller k. A failing cell is recorded and skipped.
GridReport grid_search(std::span<const double> y, std::span<const std::size_t> h_values,
                       std::span<const std::size_t> k_values, const EMSettings& settings);

}  // namespace hohmm
