#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hohmm {

using Tensor = std::vector<double>;

enum class EmissionFamily { kGaussianSV };

/// Number of latent states and order of the latent chain. h == 0 means the
/// states are serially independent draws from one shared marginal.
struct ModelConfig {
  std::size_t k = 1;
  std::size_t h = 0;
  EmissionFamily emission = EmissionFamily::kGaussianSV;

  /// Throws hohmm::Error when k == 0.
  void check() const;
};

/// Dense row-major table of conditional distributions. Row r enumerates one
/// configuration of the conditioning states in lexicographic order with the
/// latest state varying fastest; the column is the outcome state. Flattened,
/// the table is therefore the window tensor (conditioning..., outcome).
class ConditionalTable {
 public:
  ConditionalTable() = default;
  ConditionalTable(std::size_t rows, std::size_t k);
  ConditionalTable(std::size_t rows, std::size_t k, std::vector<double> values);

  static ConditionalTable uniform(std::size_t rows, std::size_t k);

  std::size_t rows() const { return rows_; }
  std::size_t k() const { return k_; }

  double operator()(std::size_t row, std::size_t v) const { return values_[row * k_ + v]; }
  double& operator()(std::size_t row, std::size_t v) { return values_[row * k_ + v]; }

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * k_, k_};
  }
  std::span<double> row(std::size_t r) { return {values_.data() + r * k_, k_}; }

  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t k_ = 0;
  std::vector<double> values_;
};

/// Parameters of the Gaussian stochastic-volatility HMM of order h.
///
/// early[t] (0-based t < h) governs the state at time t given the t states
/// before it and has k^t rows; early[0] is the initial distribution. pi is
/// the homogeneous law of u_t given the previous h states (k^h rows) and is
/// used for every t >= h. With h == 0, early is empty and pi is the single
/// marginal shared by all occasions.
struct ParameterSet {
  std::vector<ConditionalTable> early;
  ConditionalTable pi;
  std::vector<double> sigma;

  std::size_t k() const { return sigma.size(); }
  std::size_t h() const { return early.size(); }
  ModelConfig config() const { return {k(), h(), EmissionFamily::kGaussianSV}; }

  /// The transition table in force at 0-based time t.
  const ConditionalTable& transition(std::size_t t) const {
    return t < early.size() ? early[t] : pi;
  }
};

struct ObservationSeries {
  std::vector<double> y;
  std::string source;
  std::vector<std::string> dates;

  std::size_t size() const { return y.size(); }
};

/// Simple dense row-major matrix, used for T x k posterior tables.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// k^e for small non-negative exponents.
std::size_t ipow(std::size_t k, std::size_t e);

/// Number of free parameters: k volatilities, (k-1) per conditioning row of
/// every early table and of pi. For k == 1 this is 1.
std::size_t param_count(const ModelConfig& config);

/// Zero-mean normal density with standard deviation sigma.
double emission_density(double y, double sigma);
double emission_density(double y, std::size_t v, const ParameterSet& params);

/// Densities f(y | v) for v = 0..k-1.
std::vector<double> emission_vector(double y, const ParameterSet& params);

/// Every invariant violation of params against config. Empty means valid.
std::vector<std::string> validate(const ParameterSet& params, const ModelConfig& config);

/// Throws hohmm::Error listing every violation, if any.
void require_valid(const ParameterSet& params, const ModelConfig& config);

/// Throws when any observation is non-finite or the series is empty.
void require_observations(std::span<const double> y);

struct Simulation {
  std::vector<std::size_t> states;
  ObservationSeries series;
};

/// Draws a state path (early tables first, then pi) and zero-mean Gaussian
/// observations. Deterministic for a given seed.
Simulation simulate(const ModelConfig& config, const ParameterSet& params, std::size_t length,
                    std::uint64_t seed);

/// Renames states so that new state i is old state order[i].
ParameterSet relabel(const ParameterSet& params, std::span<const std::size_t> order);

/// Permutation that sorts the states by ascending sigma.
std::vector<std::size_t> sigma_order(const ParameterSet& params);

/// Uniform transitions with the given volatilities; handy as a starting point.
ParameterSet uniform_parameters(const ModelConfig& config, std::vector<double> sigma);

}  // namespace hohmm
