#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hohmm/em.hpp"
#include "hohmm/model.hpp"
#include "hohmm/recursion.hpp"

namespace hohmm::io {

using nlohmann::json;

/// Reads one numeric column of a comma separated file. The header row is
/// optional and detected by a non-numeric first row. `column` is a header
/// name or a 1-based index; empty picks "Adj Close", then "Close", then the
/// first numeric column. With `prices` the values are turned into
/// percentage log-returns 100 ln(p_t / p_{t-1}).
ObservationSeries ingest(const std::filesystem::path& path, const std::string& column = {},
                         bool prices = false);

ObservationSeries ingest_text(const std::string& text, const std::string& column = {},
                              bool prices = false, const std::string& source = {});

std::vector<double> prices_to_returns(const std::vector<double>& prices);

/// Rounds to 10 significant digits, the precision of every JSON number we
/// write.
double round_sig(double value, int digits = 10);

/// {k, h, sigma, early: [[row]...] per t, pi: [[row]...]}.
json params_to_json(const ParameterSet& params);

/// Accepts a params object or any object holding one under "params". Rows
/// within 1e-8 of summing to one are renormalized (the file is rounded).
ParameterSet params_from_json(const json& doc);

ParameterSet read_params(const std::filesystem::path& path);

json fit_to_json(const FitResult& result, std::size_t T);
std::string fit_to_csv(const FitResult& result);

json grid_to_json(const GridReport& report, std::size_t T);
std::string grid_to_csv(const GridReport& report);

json decode_to_json(const Smoothing& smoothing, const std::vector<std::size_t>& states);
std::string decode_to_csv(const Smoothing& smoothing, const std::vector<std::size_t>& states);

json prediction_to_json(const Prediction& prediction);
std::string prediction_to_csv(const Prediction& prediction);

std::string simulation_to_csv(const Simulation& sim);
json simulation_to_json(const Simulation& sim);

/// Six significant digits, for human readable tables.
std::string format_table(const GridReport& report);

}  // namespace hohmm::io
