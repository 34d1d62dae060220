#include "hohmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "hohmm/error.hpp"

namespace hohmm {

namespace {

constexpr double kRowSumTolerance = 1e-12;

// Comma separated 1-based states of a conditioning row, e.g. "(1,2)".
std::string describe_row(std::size_t row, std::size_t k, std::size_t width) {
  std::vector<std::size_t> digits(width);
  for (std::size_t i = width; i-- > 0;) {
    digits[i] = row % k;
    row /= k;
  }
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < width; ++i) os << (i ? "," : "") << digits[i] + 1;
  os << ')';
  return os.str();
}

void check_table(const ConditionalTable& table, const std::string& name, std::size_t k,
                 std::size_t width, std::vector<std::string>& out) {
  const std::size_t rows = ipow(k, width);
  if (table.rows() != rows || table.k() != k || table.values().size() != rows * k) {
    std::ostringstream os;
    os << name << ": shape " << table.rows() << "x" << table.k() << " but expected " << rows
       << "x" << k;
    out.push_back(os.str());
    return;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (std::size_t v = 0; v < k; ++v) {
      const double p = table(r, v);
      if (!std::isfinite(p) || p < 0.0) {
        std::ostringstream os;
        os << name << " row " << r + 1 << " given " << describe_row(r, k, width) << ": entry "
           << v + 1 << " is " << p;
        out.push_back(os.str());
      }
      sum += p;
    }
    if (!(std::abs(sum - 1.0) <= kRowSumTolerance)) {
      std::ostringstream os;
      os.precision(15);
      os << name << " row " << r + 1 << " given " << describe_row(r, k, width) << ": sums to " << sum;
      out.push_back(os.str());
    }
  }
}

std::size_t draw(std::span<const double> probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t v = 0; v < probs.size(); ++v) {
    acc += probs[v];
    if (probs[v] > 0.0) last_positive = v;
    if (u < acc) return v;
  }
  return last_positive;
}

ConditionalTable relabel_table(const ConditionalTable& table, std::span<const std::size_t> order,
                               std::size_t width) {
  const std::size_t k = table.k();
  ConditionalTable out(table.rows(), k);
  const std::size_t n = table.values().size();
  std::vector<double> values(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::size_t rest = idx;
    std::size_t old = 0;
    std::size_t scale = 1;
    for (std::size_t i = 0; i < width + 1; ++i) {
      old += order[rest % k] * scale;
      rest /= k;
      scale *= k;
    }
    values[idx] = table.values()[old];
  }
  return ConditionalTable(table.rows(), k, std::move(values));
}

}  // namespace

void ModelConfig::check() const {
  if (k == 0) throw Error("hmm-core", "number of states k must be at least 1");
}

ConditionalTable::ConditionalTable(std::size_t rows, std::size_t k)
    : rows_(rows), k_(k), values_(rows * k, 0.0) {}

ConditionalTable::ConditionalTable(std::size_t rows, std::size_t k, std::vector<double> values)
    : rows_(rows), k_(k), values_(std::move(values)) {
  if (values_.size() != rows_ * k_) {
    throw Error("hmm-core", "conditional table has " + std::to_string(values_.size()) +
                                " entries, expected " + std::to_string(rows_ * k_));
  }
}

ConditionalTable ConditionalTable::uniform(std::size_t rows, std::size_t k) {
  return ConditionalTable(rows, k, std::vector<double>(rows * k, 1.0 / static_cast<double>(k)));
}

std::size_t ipow(std::size_t k, std::size_t e) {
  std::size_t r = 1;
  while (e-- > 0) r *= k;
  return r;
}

std::size_t param_count(const ModelConfig& config) {
  config.check();
  const std::size_t k = config.k;
  std::size_t early_rows = 0;
  for (std::size_t t = 1; t <= config.h; ++t) early_rows += ipow(k, t - 1);
  return k + (k - 1) * early_rows + (k - 1) * ipow(k, config.h);
}

double emission_density(double y, double sigma) {
  if (!std::isfinite(y)) throw Error("hmm-core", "observation is not finite");
  const double z = y / sigma;
  return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * sigma);
}

double emission_density(double y, std::size_t v, const ParameterSet& params) {
  if (v >= params.k()) {
    throw Error("hmm-core", "state index " + std::to_string(v) + " out of range");
  }
  return emission_density(y, params.sigma[v]);
}

std::vector<double> emission_vector(double y, const ParameterSet& params) {
  std::vector<double> f(params.k());
  for (std::size_t v = 0; v < f.size(); ++v) f[v] = emission_density(y, params.sigma[v]);
  return f;
}

std::vector<std::string> validate(const ParameterSet& params, const ModelConfig& config) {
  std::vector<std::string> out;
  if (config.k == 0) {
    out.emplace_back("config: k must be at least 1");
    return out;
  }
  const std::size_t k = config.k;
  if (params.sigma.size() != k) {
    out.push_back("sigma: has " + std::to_string(params.sigma.size()) + " entries, expected " +
                  std::to_string(k));
  }
  for (std::size_t v = 0; v < params.sigma.size(); ++v) {
    const double s = params.sigma[v];
    if (!std::isfinite(s) || s <= 0.0) {
      std::ostringstream os;
      os << "sigma[" << v + 1 << "] = " << s << " is not positive";
      out.push_back(os.str());
    }
  }
  if (params.early.size() != config.h) {
    out.push_back("early: has " + std::to_string(params.early.size()) + " tables, expected " +
                  std::to_string(config.h));
  }
  for (std::size_t t = 0; t < params.early.size() && t < config.h; ++t) {
    check_table(params.early[t], "early[" + std::to_string(t + 1) + "]", k, t, out);
  }
  check_table(params.pi, "pi", k, config.h, out);
  return out;
}

void require_valid(const ParameterSet& params, const ModelConfig& config) {
  const auto violations = validate(params, config);
  if (violations.empty()) return;
  std::string msg = "invalid parameters:";
  for (const auto& v : violations) msg += "\n  " + v;
  throw Error("hmm-core", msg);
}

void require_observations(std::span<const double> y) {
  if (y.empty()) throw Error("hmm-core", "observation series is empty");
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (!std::isfinite(y[t])) {
      throw Error("hmm-core", "observation " + std::to_string(t + 1) + " is not finite");
    }
  }
}

Simulation simulate(const ModelConfig& config, const ParameterSet& params, std::size_t length,
                    std::uint64_t seed) {
  if (length < 1) throw Error("hmm-core", "simulation length must be at least 1");
  require_valid(params, config);

  const std::size_t k = config.k;
  const std::size_t h = config.h;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Simulation sim;
  sim.states.resize(length);
  sim.series.y.resize(length);
  sim.series.source = "simulated";
  for (std::size_t t = 0; t < length; ++t) {
    const std::size_t lag = std::min(t, h);
    std::size_t row = 0;
    for (std::size_t s = t - lag; s < t; ++s) row = row * k + sim.states[s];
    const std::size_t u = draw(params.transition(t).row(row), rng);
    sim.states[t] = u;
    sim.series.y[t] = params.sigma[u] * normal(rng);
  }
  return sim;
}

ParameterSet relabel(const ParameterSet& params, std::span<const std::size_t> order) {
  const std::size_t k = params.k();
  if (order.size() != k) throw Error("hmm-core", "relabel order has wrong length");
  std::vector<bool> seen(k, false);
  for (auto o : order) {
    if (o >= k || seen[o]) throw Error("hmm-core", "relabel order is not a permutation");
    seen[o] = true;
  }
  ParameterSet out;
  out.sigma.resize(k);
  for (std::size_t v = 0; v < k; ++v) out.sigma[v] = params.sigma[order[v]];
  for (std::size_t t = 0; t < params.early.size(); ++t) {
    out.early.push_back(relabel_table(params.early[t], order, t));
  }
  out.pi = relabel_table(params.pi, order, params.h());
  return out;
}

std::vector<std::size_t> sigma_order(const ParameterSet& params) {
  std::vector<std::size_t> order(params.k());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return params.sigma[a] < params.sigma[b];
  });
  return order;
}

ParameterSet uniform_parameters(const ModelConfig& config, std::vector<double> sigma) {
  config.check();
  if (sigma.size() != config.k) throw Error("hmm-core", "sigma must have k entries");
  ParameterSet p;
  for (std::size_t t = 0; t < config.h; ++t) {
    p.early.push_back(ConditionalTable::uniform(ipow(config.k, t), config.k));
  }
  p.pi = ConditionalTable::uniform(ipow(config.k, config.h), config.k);
  p.sigma = std::move(sigma);
  return p;
}

}  // namespace hohmm
