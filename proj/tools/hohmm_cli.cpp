// hohmm: fit, select, decode and simulate Gaussian volatility HMMs of any
// order from the command line.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hohmm/em.hpp"
#include "hohmm/error.hpp"
#include "hohmm/io.hpp"
#include "hohmm/model.hpp"
#include "hohmm/recursion.hpp"

namespace {

struct InputOptions {
  std::string input;
  std::string column;
  bool prices = false;
};

struct OutputOptions {
  std::string out;
  std::string format = "json";
};

void add_input(CLI::App* cmd, InputOptions& in) {
  cmd->add_option("--input", in.input, "CSV file with one observation per row")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--column", in.column, "column name or 1-based index");
  cmd->add_flag("--prices", in.prices, "column holds prices; use 100*log returns");
}

void add_output(CLI::App* cmd, OutputOptions& out, const std::string& default_format) {
  cmd->add_option("--out", out.out, "output file (default: stdout)");
  // The options struct is shared, so the default is applied per command.
  cmd->add_option("--format", out.format, "output format (default: " + default_format + ")")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd->preparse_callback([&out, default_format](std::size_t) { out.format = default_format; });
}

void add_em(CLI::App* cmd, hohmm::EMSettings& em) {
  cmd->add_option("--starts", em.n_starts, "number of EM starts")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", em.seed, "random seed");
  cmd->add_option("--max-iter", em.max_iterations, "EM iteration limit")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tol", em.rel_tolerance, "relative log-likelihood tolerance")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--strict-zeros", em.strict_zeros, "fail on zero-probability windows");
}

void emit(const OutputOptions& out, const std::string& text) {
  if (out.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out.out, std::ios::binary);
  if (!f) throw hohmm::Error("cli", "cannot write " + out.out);
  f << text;
}

std::string render(const OutputOptions& out, const hohmm::io::json& doc, const std::string& csv) {
  return out.format == "json" ? doc.dump(2) + "\n" : csv;
}

hohmm::ObservationSeries load(const InputOptions& in) {
  return hohmm::io::ingest(in.input, in.column, in.prices);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hidden Markov volatility models of arbitrary order"};
  // --h names the model order, so help is --help only.
  app.set_help_flag("--help", "print this help message and exit");
  app.require_subcommand(1);

  InputOptions in;
  OutputOptions out;
  hohmm::EMSettings em;
  std::size_t h = 1;
  std::size_t k = 2;
  std::vector<std::size_t> h_list;
  std::vector<std::size_t> k_list;
  std::string params_path;
  std::size_t length = 0;
  std::uint64_t sim_seed = 0;

  auto* fit = app.add_subcommand("fit", "estimate one (h, k) model by EM");
  add_input(fit, in);
  fit->add_option("--h", h, "order of the latent chain")->required();
  fit->add_option("--k", k, "number of latent states")->required()->check(CLI::PositiveNumber);
  add_em(fit, em);
  add_output(fit, out, "json");

  auto* grid = app.add_subcommand("grid", "fit a grid of (h, k) and select by BIC");
  add_input(grid, in);
  grid->add_option("--h-list", h_list, "orders to try")->required()->delimiter(',');
  grid->add_option("--k-list", k_list, "state counts to try")
      ->required()
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  add_em(grid, em);
  add_output(grid, out, "json");

  auto* decode = app.add_subcommand("decode", "posterior state probabilities and local decoding");
  decode->add_option("--params", params_path, "params JSON (or a fit output)")
      ->required()
      ->check(CLI::ExistingFile);
  add_input(decode, in);
  add_output(decode, out, "json");

  auto* predict = app.add_subcommand("predict", "next-state prediction and predictive mixture");
  predict->add_option("--params", params_path, "params JSON (or a fit output)")
      ->required()
      ->check(CLI::ExistingFile);
  add_input(predict, in);
  add_output(predict, out, "json");

  auto* simulate = app.add_subcommand("simulate", "draw states and observations");
  simulate->add_option("--params", params_path, "params JSON (or a fit output)")
      ->required()
      ->check(CLI::ExistingFile);
  simulate->add_option("--length", length, "series length")->required()->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim_seed, "random seed");
  add_output(simulate, out, "csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) {
      const auto series = load(in);
      const hohmm::ModelConfig config{k, h, hohmm::EmissionFamily::kGaussianSV};
      const auto result = hohmm::fit(config, series.y, em);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      emit(out, render(out, hohmm::io::fit_to_json(result, series.size()),
                       hohmm::io::fit_to_csv(result)));
    } else if (*grid) {
      const auto series = load(in);
      const auto report = hohmm::grid_search(series.y, h_list, k_list, em);
      std::cerr << hohmm::io::format_table(report);
      if (!report.selected) throw hohmm::Error("cli", "every grid cell failed");
      emit(out, render(out, hohmm::io::grid_to_json(report, series.size()),
                       hohmm::io::grid_to_csv(report)));
    } else if (*decode) {
      const auto params = hohmm::io::read_params(params_path);
      const auto series = load(in);
      const auto smoothing = hohmm::smooth(params, series.y);
      const auto states = hohmm::local_decode(smoothing.marginals);
      emit(out, render(out, hohmm::io::decode_to_json(smoothing, states),
                       hohmm::io::decode_to_csv(smoothing, states)));
    } else if (*predict) {
      const auto params = hohmm::io::read_params(params_path);
      const auto series = load(in);
      const auto prediction = hohmm::predict(params, hohmm::smooth(params, series.y));
      emit(out, render(out, hohmm::io::prediction_to_json(prediction),
                       hohmm::io::prediction_to_csv(prediction)));
    } else if (*simulate) {
      const auto params = hohmm::io::read_params(params_path);
      const auto sim = hohmm::simulate(params.config(), params, length, sim_seed);
      emit(out, render(out, hohmm::io::simulation_to_json(sim), hohmm::io::simulation_to_csv(sim)));
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
