#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <vector>

#include "hohmm/em.hpp"
#include "hohmm/error.hpp"
#include "hohmm/io.hpp"
#include "hohmm/model.hpp"
#include "hohmm/oracle.hpp"
#include "hohmm/recursion.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

using Rows = std::vector<std::vector<double>>;

Rows table_rows(const hohmm::ConditionalTable& table) {
  Rows rows(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    rows[r].assign(table.row(r).begin(), table.row(r).end());
  }
  return rows;
}

hohmm::ConditionalTable table_from_rows(const Rows& rows) {
  if (rows.empty()) throw hohmm::Error("python", "a table needs at least one row");
  const std::size_t k = rows.front().size();
  std::vector<double> values;
  for (const auto& r : rows) {
    if (r.size() != k) throw hohmm::Error("python", "ragged table rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return hohmm::ConditionalTable(rows.size(), k, std::move(values));
}

Rows matrix_rows(const hohmm::Matrix& m) {
  Rows rows(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) rows[r].assign(m.row(r).begin(), m.row(r).end());
  return rows;
}

hohmm::Matrix matrix_from_rows(const Rows& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  hohmm::Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw hohmm::Error("python", "ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

hohmm::ParameterSet make_params(std::vector<double> sigma, const Rows& pi,
                                const std::vector<Rows>& early) {
  hohmm::ParameterSet p;
  p.sigma = std::move(sigma);
  p.pi = table_from_rows(pi);
  for (const auto& t : early) p.early.push_back(table_from_rows(t));
  hohmm::require_valid(p, p.config());
  return p;
}

hohmm::EMSettings make_settings(std::size_t n_starts, std::uint64_t seed,
                                std::size_t max_iterations, double rel_tolerance,
                                bool strict_zeros) {
  hohmm::EMSettings s;
  s.n_starts = n_starts;
  s.seed = seed;
  s.max_iterations = max_iterations;
  s.rel_tolerance = rel_tolerance;
  s.strict_zeros = strict_zeros;
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hidden Markov models of arbitrary order with Gaussian volatility emissions";

  py::register_exception<hohmm::Error>(m, "HohmmError", PyExc_RuntimeError);

  py::class_<hohmm::ParameterSet>(m, "ParameterSet")
      .def(py::init(&make_params), "sigma"_a, "pi"_a, "early"_a = std::vector<Rows>{})
      .def_property_readonly("k", &hohmm::ParameterSet::k)
      .def_property_readonly("h", &hohmm::ParameterSet::h)
      .def_readonly("sigma", &hohmm::ParameterSet::sigma)
      .def_property_readonly("pi", [](const hohmm::ParameterSet& p) { return table_rows(p.pi); })
      .def_property_readonly("early",
                             [](const hohmm::ParameterSet& p) {
                               std::vector<Rows> out;
                               for (const auto& t : p.early) out.push_back(table_rows(t));
                               return out;
                             })
      .def("to_json",
           [](const hohmm::ParameterSet& p) { return hohmm::io::params_to_json(p).dump(); })
      .def_static("from_json",
                  [](const std::string& text) {
                    return hohmm::io::params_from_json(hohmm::io::json::parse(text));
                  })
      .def("relabel", [](const hohmm::ParameterSet& p, const std::vector<std::size_t>& order) {
        return hohmm::relabel(p, order);
      });

  m.def("uniform_parameters",
        [](std::size_t k, std::size_t h, std::vector<double> sigma) {
          return hohmm::uniform_parameters({k, h, hohmm::EmissionFamily::kGaussianSV},
                                           std::move(sigma));
        },
        "k"_a, "h"_a, "sigma"_a);

  m.def("param_count",
        [](std::size_t k, std::size_t h) {
          return hohmm::param_count({k, h, hohmm::EmissionFamily::kGaussianSV});
        },
        "k"_a, "h"_a);
  m.def("emission_density", py::overload_cast<double, double>(&hohmm::emission_density), "y"_a,
        "sigma"_a);
  m.def("validate",
        [](const hohmm::ParameterSet& p) { return hohmm::validate(p, p.config()); }, "params"_a);
  m.def("simulate",
        [](const hohmm::ParameterSet& p, std::size_t length, std::uint64_t seed) {
          auto sim = hohmm::simulate(p.config(), p, length, seed);
          return py::make_tuple(sim.states, sim.series.y);
        },
        "params"_a, "length"_a, "seed"_a = 0);

  py::class_<hohmm::PosteriorSlice>(m, "PosteriorSlice")
      .def_readonly("t", &hohmm::PosteriorSlice::t)
      .def_readonly("j", &hohmm::PosteriorSlice::j)
      .def_readonly("lag", &hohmm::PosteriorSlice::lag)
      .def_readonly("values", &hohmm::PosteriorSlice::values);

  py::class_<hohmm::SmoothedJoint>(m, "SmoothedJoint")
      .def_readonly("t", &hohmm::SmoothedJoint::t)
      .def_readonly("width", &hohmm::SmoothedJoint::width)
      .def_readonly("values", &hohmm::SmoothedJoint::values);

  py::class_<hohmm::Smoothing>(m, "Smoothing")
      .def_readonly("slices", &hohmm::Smoothing::slices)
      .def_readonly("joints", &hohmm::Smoothing::joints)
      .def_property_readonly("marginals",
                             [](const hohmm::Smoothing& s) { return matrix_rows(s.marginals); })
      .def_readonly("loglik", &hohmm::Smoothing::loglik);

  m.def("backward_pass",
        [](const hohmm::ParameterSet& p, const std::vector<double>& y, bool strict_zeros) {
          return hohmm::backward_pass(p, y, {strict_zeros, nullptr});
        },
        "params"_a, "y"_a, "strict_zeros"_a = false);
  m.def("smooth",
        [](const hohmm::ParameterSet& p, const std::vector<double>& y, bool strict_zeros) {
          return hohmm::smooth(p, y, {strict_zeros, nullptr});
        },
        "params"_a, "y"_a, "strict_zeros"_a = false);
  m.def("log_likelihood",
        [](const hohmm::ParameterSet& p, const std::vector<double>& y,
           std::optional<std::vector<std::size_t>> reference) {
          const auto slices = hohmm::backward_pass(p, y);
          return reference ? hohmm::log_likelihood(p, y, slices, *reference)
                           : hohmm::log_likelihood(p, y, slices);
        },
        "params"_a, "y"_a, "reference"_a = py::none());
  m.def("local_decode",
        [](const Rows& marginals) { return hohmm::local_decode(matrix_from_rows(marginals)); },
        "marginals"_a);

  py::class_<hohmm::Prediction>(m, "Prediction")
      .def_readonly("state", &hohmm::Prediction::state)
      .def_readonly("weights", &hohmm::Prediction::weights)
      .def_readonly("sigma", &hohmm::Prediction::sigma)
      .def_readonly("window", &hohmm::Prediction::window)
      .def("density", &hohmm::Prediction::density, "y"_a);
  m.def("predict",
        [](const hohmm::ParameterSet& p, const std::vector<double>& y) {
          return hohmm::predict(p, hohmm::smooth(p, y));
        },
        "params"_a, "y"_a);

  py::class_<hohmm::FitResult>(m, "FitResult")
      .def_readonly("params", &hohmm::FitResult::params)
      .def_readonly("loglik", &hohmm::FitResult::loglik)
      .def_readonly("npar", &hohmm::FitResult::npar)
      .def_readonly("bic", &hohmm::FitResult::bic)
      .def_readonly("trace", &hohmm::FitResult::trace)
      .def_readonly("converged", &hohmm::FitResult::converged)
      .def_readonly("start_index", &hohmm::FitResult::start_index)
      .def_readonly("warnings", &hohmm::FitResult::warnings);

  m.def("fit",
        [](std::size_t k, std::size_t h, const std::vector<double>& y, std::size_t n_starts,
           std::uint64_t seed, std::size_t max_iterations, double rel_tolerance,
           bool strict_zeros) {
          py::gil_scoped_release release;
          return hohmm::fit({k, h, hohmm::EmissionFamily::kGaussianSV}, y,
                            make_settings(n_starts, seed, max_iterations, rel_tolerance,
                                          strict_zeros));
        },
        "k"_a, "h"_a, "y"_a, "n_starts"_a = 10, "seed"_a = 0, "max_iterations"_a = 1000,
        "rel_tolerance"_a = 1e-8, "strict_zeros"_a = false);

  m.def("bic", &hohmm::bic, "loglik"_a, "npar"_a, "T"_a);

  m.def("grid_search",
        [](const std::vector<double>& y, const std::vector<std::size_t>& h_values,
           const std::vector<std::size_t>& k_values, std::size_t n_starts, std::uint64_t seed,
           std::size_t max_iterations, double rel_tolerance) {
          hohmm::GridReport report;
          {
            py::gil_scoped_release release;
            report = hohmm::grid_search(
                y, h_values, k_values,
                make_settings(n_starts, seed, max_iterations, rel_tolerance, false));
          }
          py::list cells;
          for (const auto& c : report.cells) {
            py::dict cell("h"_a = c.h, "k"_a = c.k);
            if (c.result) {
              cell["loglik"] = c.result->loglik;
              cell["npar"] = c.result->npar;
              cell["bic"] = c.result->bic;
              cell["converged"] = c.result->converged;
            } else {
              cell["error"] = c.error;
            }
            cells.append(cell);
          }
          py::object selected = py::none();
          if (report.selected) {
            const auto& s = report.cells[*report.selected];
            selected = py::make_tuple(s.h, s.k);
          }
          return py::make_tuple(cells, selected);
        },
        "y"_a, "h_values"_a, "k_values"_a, "n_starts"_a = 10, "seed"_a = 0,
        "max_iterations"_a = 1000, "rel_tolerance"_a = 1e-8);

  m.def("ingest", [](const std::string& path, const std::string& column, bool prices) {
    return hohmm::io::ingest(path, column, prices).y;
  },
        "path"_a, "column"_a = "", "prices"_a = false);

  auto oracle = m.def_submodule("oracle", "reference implementations");
  oracle.def("baum_welch_log_likelihood",
             [](const hohmm::ParameterSet& p, const std::vector<double>& y) {
               return hohmm::oracle::bw_forward(p, y).log_likelihood();
             },
             "params"_a, "y"_a);
  oracle.def("baum_welch_marginals",
             [](const hohmm::ParameterSet& p, const std::vector<double>& y) {
               const auto tables = hohmm::oracle::bw_backward(p, y);
               return matrix_rows(hohmm::oracle::bw_posteriors(p, y, tables).marginals);
             },
             "params"_a, "y"_a);
  oracle.def("brute_force_log_likelihood",
             [](const hohmm::ParameterSet& p, const std::vector<double>& y) {
               return hohmm::oracle::brute_force_joint(p, y).log_likelihood();
             },
             "params"_a, "y"_a);
}
