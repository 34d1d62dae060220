#include "hohmm/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "hohmm/error.hpp"

namespace hohmm::io {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  if (e - b >= 2 && s[b] == '"' && s[e - 1] == '"') {
    ++b;
    --e;
  }
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(const std::string& field) {
  if (field.empty()) return std::nullopt;
  const char* begin = field.data();
  const char* end = begin + field.size();
  if (*begin == '+') ++begin;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string states_label(std::size_t row, std::size_t k, std::size_t width) {
  std::vector<std::size_t> digits(width);
  for (std::size_t i = width; i-- > 0;) {
    digits[i] = row % k;
    row /= k;
  }
  std::string out;
  for (std::size_t i = 0; i < width; ++i) {
    if (i) out += ' ';
    out += std::to_string(digits[i] + 1);
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json table_to_json(const ConditionalTable& table) {
  json rows = json::array();
  for (std::size_t r = 0; r < table.rows(); ++r) {
    json row = json::array();
    for (double p : table.row(r)) row.push_back(round_sig(p));
    rows.push_back(std::move(row));
  }
  return rows;
}

ConditionalTable table_from_json(const json& rows, std::size_t expected_rows, std::size_t k,
                                 const std::string& name) {
  if (!rows.is_array() || rows.size() != expected_rows) {
    throw Error("io", name + ": expected " + std::to_string(expected_rows) + " rows");
  }
  std::vector<double> values;
  values.reserve(expected_rows * k);
  for (std::size_t r = 0; r < expected_rows; ++r) {
    const auto& row = rows[r];
    if (!row.is_array() || row.size() != k) {
      throw Error("io", name + " row " + std::to_string(r + 1) + ": expected " +
                            std::to_string(k) + " entries");
    }
    double sum = 0.0;
    for (const auto& v : row) sum += v.get<double>();
    const bool rescale = sum > 0.0 && std::abs(sum - 1.0) <= 1e-8;
    for (const auto& v : row) values.push_back(rescale ? v.get<double>() / sum : v.get<double>());
  }
  return ConditionalTable(expected_rows, k, std::move(values));
}

void long_table_rows(std::ostringstream& os, const std::string& name,
                     const ConditionalTable& table, std::size_t width) {
  const std::size_t k = table.k();
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t v = 0; v < k; ++v) {
      os << name << ',' << states_label(r, k, width) << ',' << v + 1 << ',' << num(table(r, v))
         << '\n';
    }
  }
}

}  // namespace

std::vector<double> prices_to_returns(const std::vector<double>& prices) {
  std::vector<double> out;
  if (prices.size() < 2) return out;
  out.reserve(prices.size() - 1);
  for (std::size_t t = 1; t < prices.size(); ++t) {
    for (std::size_t s : {t - 1, t}) {
      if (!(prices[s] > 0.0)) {
        throw Error("io", "price " + std::to_string(s + 1) + " is not positive");
      }
    }
    out.push_back(100.0 * std::log(prices[t] / prices[t - 1]));
  }
  return out;
}

ObservationSeries ingest_text(const std::string& text, const std::string& column, bool prices,
                              const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    rows.emplace_back(line_no, split(line));
  }
  if (rows.empty()) throw Error("io", "input has no rows");

  std::vector<std::string> header;
  const auto& first = rows.front().second;
  const bool has_header = std::none_of(first.begin(), first.end(),
                                       [](const std::string& f) { return parse_number(f).has_value(); });
  if (has_header) {
    header = first;
    rows.erase(rows.begin());
  }
  if (rows.empty()) throw Error("io", "input has a header but no data rows");

  auto find_header = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (lower(header[i]) == lower(name)) return i;
    }
    return std::nullopt;
  };

  std::size_t col = 0;
  if (!column.empty()) {
    if (auto hit = find_header(column)) {
      col = *hit;
    } else if (std::all_of(column.begin(), column.end(),
                           [](unsigned char c) { return std::isdigit(c); })) {
      col = std::stoul(column);
      if (col == 0) throw Error("io", "column index is 1-based");
      --col;
    } else {
      throw Error("io", "no column named '" + column + "'");
    }
  } else if (auto adj = find_header("Adj Close")) {
    col = *adj;
  } else if (auto close = find_header("Close")) {
    col = *close;
  } else {
    const auto& data = rows.front().second;
    auto it = std::find_if(data.begin(), data.end(),
                           [](const std::string& f) { return parse_number(f).has_value(); });
    if (it == data.end()) throw Error("io", "no numeric column found");
    col = static_cast<std::size_t>(it - data.begin());
  }

  std::optional<std::size_t> date_col = find_header("date");
  if (!date_col && col != 0 && !parse_number(rows.front().second[0])) date_col = 0;
  if (date_col && *date_col == col) date_col.reset();

  std::vector<double> values;
  std::vector<std::string> dates;
  std::vector<std::size_t> bad_lines;
  for (const auto& [no, fields] : rows) {
    std::optional<double> v;
    if (col < fields.size()) v = parse_number(fields[col]);
    if (!v) {
      bad_lines.push_back(no);
      continue;
    }
    if (prices && !(*v > 0.0)) {
      throw Error("io", "non-positive price on line " + std::to_string(no));
    }
    values.push_back(*v);
    if (date_col) dates.push_back(*date_col < fields.size() ? fields[*date_col] : std::string());
  }
  if (!bad_lines.empty()) {
    std::string msg = "non-numeric entries on line";
    msg += bad_lines.size() > 1 ? "s " : " ";
    for (std::size_t i = 0; i < bad_lines.size() && i < 10; ++i) {
      msg += (i ? ", " : "") + std::to_string(bad_lines[i]);
    }
    if (bad_lines.size() > 10) msg += ", ...";
    throw Error("io", msg);
  }

  ObservationSeries series;
  series.source = source;
  if (prices) {
    series.y = prices_to_returns(values);
    if (!dates.empty()) dates.erase(dates.begin());
  } else {
    series.y = std::move(values);
  }
  series.dates = std::move(dates);
  if (series.y.empty()) throw Error("io", "series is empty");
  return series;
}

ObservationSeries ingest(const std::filesystem::path& path, const std::string& column,
                         bool prices) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ingest_text(buf.str(), column, prices, path.string());
}

double round_sig(double value, int digits) {
  if (value == 0.0 || !std::isfinite(value)) return value;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  return std::strtod(buf, nullptr);
}

json params_to_json(const ParameterSet& params) {
  json doc;
  doc["k"] = params.k();
  doc["h"] = params.h();
  json sigma = json::array();
  for (double s : params.sigma) sigma.push_back(round_sig(s));
  doc["sigma"] = std::move(sigma);
  json early = json::array();
  for (const auto& table : params.early) early.push_back(table_to_json(table));
  doc["early"] = std::move(early);
  doc["pi"] = table_to_json(params.pi);
  return doc;
}

ParameterSet params_from_json(const json& doc) {
  const json& p = doc.contains("params") ? doc.at("params") : doc;
  try {
    const auto k = p.at("k").get<std::size_t>();
    const auto h = p.at("h").get<std::size_t>();
    if (k == 0) throw Error("io", "k must be at least 1");
    ParameterSet out;
    out.sigma = p.at("sigma").get<std::vector<double>>();
    const auto& early = p.at("early");
    if (!early.is_array() || early.size() != h) {
      throw Error("io", "early must hold " + std::to_string(h) + " tables");
    }
    for (std::size_t t = 0; t < h; ++t) {
      out.early.push_back(
          table_from_json(early[t], ipow(k, t), k, "early[" + std::to_string(t + 1) + "]"));
    }
    out.pi = table_from_json(p.at("pi"), ipow(k, h), k, "pi");
    require_valid(out, {k, h, EmissionFamily::kGaussianSV});
    return out;
  } catch (const json::exception& ex) {
    throw Error("io", std::string("malformed params: ") + ex.what());
  }
}

ParameterSet read_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& ex) {
    throw Error("io", path.string() + ": " + ex.what());
  }
  return params_from_json(doc);
}

json fit_to_json(const FitResult& result, std::size_t T) {
  json doc;
  doc["h"] = result.params.h();
  doc["k"] = result.params.k();
  doc["T"] = T;
  doc["loglik"] = round_sig(result.loglik);
  doc["npar"] = result.npar;
  doc["bic"] = round_sig(result.bic);
  doc["converged"] = result.converged;
  doc["start_index"] = result.start_index;
  doc["iterations"] = result.trace.empty() ? 0 : result.trace.size() - 1;
  json trace = json::array();
  for (double v : result.trace) trace.push_back(round_sig(v));
  doc["trace"] = std::move(trace);
  doc["warnings"] = result.warnings;
  doc["params"] = params_to_json(relabel(result.params, sigma_order(result.params)));
  return doc;
}

std::string fit_to_csv(const FitResult& result) {
  const ParameterSet p = relabel(result.params, sigma_order(result.params));
  std::ostringstream os;
  os << "quantity,conditioning,state,value\n";
  os << "loglik,,," << num(result.loglik) << '\n';
  os << "npar,,," << result.npar << '\n';
  os << "bic,,," << num(result.bic) << '\n';
  os << "converged,,," << (result.converged ? 1 : 0) << '\n';
  for (std::size_t v = 0; v < p.k(); ++v) os << "sigma,," << v + 1 << ',' << num(p.sigma[v]) << '\n';
  for (std::size_t t = 0; t < p.h(); ++t) {
    long_table_rows(os, "early" + std::to_string(t + 1), p.early[t], t);
  }
  long_table_rows(os, "pi", p.pi, p.h());
  return os.str();
}

json grid_to_json(const GridReport& report, std::size_t T) {
  json doc;
  doc["T"] = T;
  json cells = json::array();
  for (const auto& c : report.cells) {
    json cell{{"h", c.h}, {"k", c.k}};
    if (c.result) {
      cell["loglik"] = round_sig(c.result->loglik);
      cell["npar"] = c.result->npar;
      cell["bic"] = round_sig(c.result->bic);
      cell["converged"] = c.result->converged;
    } else {
      cell["error"] = c.error;
    }
    cells.push_back(std::move(cell));
  }
  doc["cells"] = std::move(cells);
  if (report.selected) {
    const auto& s = report.cells[*report.selected];
    doc["selected"] = {{"h", s.h}, {"k", s.k}};
  } else {
    doc["selected"] = nullptr;
  }
  return doc;
}

std::string grid_to_csv(const GridReport& report) {
  std::ostringstream os;
  os << "h,k,loglik,npar,bic,converged,selected,error\n";
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    const auto& c = report.cells[i];
    os << c.h << ',' << c.k << ',';
    if (c.result) {
      os << num(c.result->loglik) << ',' << c.result->npar << ',' << num(c.result->bic) << ','
         << (c.result->converged ? 1 : 0);
    } else {
      os << ",,,";
    }
    os << ',' << (report.selected == i ? 1 : 0) << ',';
    if (!c.error.empty()) {
      std::string e = c.error;
      std::replace(e.begin(), e.end(), ',', ';');
      std::replace(e.begin(), e.end(), '\n', ' ');
      os << e;
    }
    os << '\n';
  }
  return os.str();
}

json decode_to_json(const Smoothing& smoothing, const std::vector<std::size_t>& states) {
  json doc;
  doc["T"] = states.size();
  doc["loglik"] = round_sig(smoothing.loglik);
  json s = json::array();
  for (auto v : states) s.push_back(v + 1);
  doc["states"] = std::move(s);
  json m = json::array();
  for (std::size_t t = 0; t < smoothing.marginals.rows(); ++t) {
    json row = json::array();
    for (double p : smoothing.marginals.row(t)) row.push_back(round_sig(p));
    m.push_back(std::move(row));
  }
  doc["marginals"] = std::move(m);
  return doc;
}

std::string decode_to_csv(const Smoothing& smoothing, const std::vector<std::size_t>& states) {
  std::ostringstream os;
  os << "t,state";
  for (std::size_t v = 0; v < smoothing.marginals.cols(); ++v) os << ",p" << v + 1;
  os << '\n';
  for (std::size_t t = 0; t < states.size(); ++t) {
    os << t + 1 << ',' << states[t] + 1;
    for (double p : smoothing.marginals.row(t)) os << ',' << num(p);
    os << '\n';
  }
  return os.str();
}

json prediction_to_json(const Prediction& prediction) {
  json doc;
  doc["state"] = prediction.state + 1;
  json w = json::array();
  for (auto v : prediction.window) w.push_back(v + 1);
  doc["window"] = std::move(w);
  json weights = json::array();
  for (double v : prediction.weights) weights.push_back(round_sig(v));
  doc["weights"] = std::move(weights);
  json sigma = json::array();
  for (double v : prediction.sigma) sigma.push_back(round_sig(v));
  doc["sigma"] = std::move(sigma);
  return doc;
}

std::string prediction_to_csv(const Prediction& prediction) {
  std::ostringstream os;
  os << "component,weight,sigma,predicted\n";
  for (std::size_t v = 0; v < prediction.weights.size(); ++v) {
    os << v + 1 << ',' << num(prediction.weights[v]) << ',' << num(prediction.sigma[v]) << ','
       << (v == prediction.state ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string simulation_to_csv(const Simulation& sim) {
  std::ostringstream os;
  os << "t,state,y\n";
  for (std::size_t t = 0; t < sim.states.size(); ++t) {
    os << t + 1 << ',' << sim.states[t] + 1 << ',' << num(sim.series.y[t]) << '\n';
  }
  return os.str();
}

json simulation_to_json(const Simulation& sim) {
  json doc;
  json s = json::array();
  for (auto v : sim.states) s.push_back(v + 1);
  doc["states"] = std::move(s);
  json y = json::array();
  for (double v : sim.series.y) y.push_back(round_sig(v));
  doc["y"] = std::move(y);
  return doc;
}

std::string format_table(const GridReport& report) {
  std::vector<std::size_t> hs;
  std::vector<std::size_t> ks;
  for (const auto& c : report.cells) {
    if (std::find(hs.begin(), hs.end(), c.h) == hs.end()) hs.push_back(c.h);
    if (std::find(ks.begin(), ks.end(), c.k) == ks.end()) ks.push_back(c.k);
  }
  auto cell = [&](std::size_t h, std::size_t k) -> const GridCell* {
    for (const auto& c : report.cells) {
      if (c.h == h && c.k == k) return &c;
    }
    return nullptr;
  };
  std::ostringstream os;
  os << std::setprecision(6);
  os << std::left << std::setw(10) << "" << std::setw(4) << "h";
  for (auto k : ks) os << std::right << std::setw(14) << ("k=" + std::to_string(k));
  os << '\n';
  const char* labels[] = {"log-lik.", "#par", "BIC"};
  for (int q = 0; q < 3; ++q) {
    for (std::size_t i = 0; i < hs.size(); ++i) {
      os << std::left << std::setw(10) << (i == 0 ? labels[q] : "") << std::setw(4) << hs[i];
      for (auto k : ks) {
        const GridCell* c = cell(hs[i], k);
        std::ostringstream v;
        v << std::setprecision(6);
        if (!c || !c->result) {
          v << "failed";
        } else if (q == 0) {
          v << c->result->loglik;
        } else if (q == 1) {
          v << c->result->npar;
        } else {
          v << c->result->bic;
        }
        os << std::right << std::setw(14) << v.str();
      }
      os << '\n';
    }
  }
  if (report.selected) {
    const auto& s = report.cells[*report.selected];
    os << "selected: h=" << s.h << " k=" << s.k << '\n';
  }
  return os.str();
}

}  // namespace hohmm::io
