#include "fracq/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fracq/harness.hpp"
#include "fracq/transient.hpp"

namespace fracq::cli {
namespace {

using estimate::Model;
using json = nlohmann::ordered_json;

struct OutputTarget {
  std::string path;  // empty: stdout

  void write(const std::string& content) const {
    if (path.empty()) {
      std::cout << content;
      return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file `" + path + "`");
    out << content;
  }
};

Model parse_model(const std::string& name) {
  if (name == "linear_bd") return Model::linear_bd;
  if (name == "mm1") return Model::mm1;
  throw CLI::ValidationError("--model", "must be linear_bd or mm1");
}

std::vector<harness::GridCell> parse_grid(const std::string& text) {
  std::vector<harness::GridCell> grid;
  std::istringstream cells(text);
  std::string cell;
  while (std::getline(cells, cell, ';')) {
    std::istringstream fields(cell);
    std::string field;
    std::vector<double> v;
    while (std::getline(fields, field, ',')) v.push_back(std::stod(field));
    if (v.size() != 3) {
      throw CLI::ValidationError("--grid", "each cell must be `alpha,lambda,mu`");
    }
    grid.push_back({v[0], v[1], v[2]});
  }
  if (grid.empty()) throw CLI::ValidationError("--grid", "no cells given");
  return grid;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::istringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) sizes.push_back(std::stoul(field));
  if (sizes.empty()) throw CLI::ValidationError("--sizes", "no sizes given");
  return sizes;
}

void add_common_flags(CLI::App* cmd, std::uint64_t* seed, std::string* out,
                      std::string* format) {
  cmd->add_option("--seed", *seed, "RNG seed");
  cmd->add_option("--out", *out, "output file (default: stdout)");
  cmd->add_option("--format", *format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->set_config("--config", "", "key=value config file; flags override it");
}

int cmd_simulate(const std::string& model, const sim::ModelParams& params,
                 const sim::StopRule& stop, std::uint64_t seed, std::uint64_t stream,
                 const std::string& emit, const std::string& format,
                 const OutputTarget& target) {
  rng::RngStream rng_stream(seed, stream);
  const sim::PathSample path =
      model == "linear_bd" ? sim::simulate_linear_bd(params, rng_stream, stop)
                           : sim::simulate_mm1(params, rng_stream, stop);
  std::ostringstream out;
  if (emit == "sojourns") {
    const sim::SojournData data = sim::extract_sojourns(path);
    if (format == "csv") {
      harness::write_sojourns_csv(data, out);
    } else {
      json events = json::array();
      for (const auto& rec : data.records) {
        events.push_back(json{{"state_before", rec.state_before},
                              {"duration", rec.duration},
                              {"event_type", rec.type == sim::EventType::birth
                                                 ? "birth"
                                                 : "death"}});
      }
      out << json{{"schema_version", harness::schema_version},
                  {"kind", "sojourns"},
                  {"n_births", data.n_births},
                  {"n_deaths", data.n_deaths},
                  {"records", events}}
                 .dump(2)
          << "\n";
    }
  } else {
    if (format == "csv") {
      sim::write_path_csv(path, out);
    } else {
      const char* reason = nullptr;
      switch (path.terminal_reason) {
        case sim::TerminalReason::max_events: reason = "max_events"; break;
        case sim::TerminalReason::extinction: reason = "extinction"; break;
        case sim::TerminalReason::horizon: reason = "horizon"; break;
        case sim::TerminalReason::target_state: reason = "target_state"; break;
      }
      json events = json::array();
      for (std::size_t i = 0; i < path.events.size(); ++i) {
        const auto& e = path.events[i];
        events.push_back(json{{"event_index", i},
                              {"event_time", e.time},
                              {"event_type",
                               e.type == sim::EventType::birth ? "birth" : "death"},
                              {"state_after", e.state_after}});
      }
      out << json{{"schema_version", harness::schema_version},
                  {"kind", "path"},
                  {"terminal_reason", reason},
                  {"events", events}}
                 .dump(2)
          << "\n";
    }
  }
  target.write(out.str());
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"fracq: simulation and inference for fractional M/M/1 queues and "
               "linear birth-death processes"};
  app.require_subcommand(1);

  // --- simulate ---------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "generate one trajectory");
  std::string sim_model = "mm1";
  sim::ModelParams params{0.8, 1.0, 2.0, 1};
  std::uint64_t sim_seed = 20130813, sim_stream = 0;
  std::optional<std::size_t> sim_events;
  std::optional<double> sim_horizon;
  std::optional<long> sim_target;
  std::string sim_emit = "path", sim_format = "csv", sim_out;
  simulate->add_option("--model", sim_model)->check(CLI::IsMember({"linear_bd", "mm1"}));
  simulate->add_option("--alpha", params.alpha, "fractional order in (0,1]")->required();
  simulate->add_option("--lambda", params.lambda, "birth rate")->required();
  simulate->add_option("--mu", params.mu, "death rate")->required();
  simulate->add_option("--init", params.initial_state, "initial state")->required();
  simulate->add_option("--events", sim_events, "stop after this many events");
  simulate->add_option("--horizon", sim_horizon, "stop at this time");
  simulate->add_option("--target", sim_target, "stop when this state is reached");
  simulate->add_option("--stream", sim_stream, "substream id");
  simulate->add_option("--emit", sim_emit)->check(CLI::IsMember({"path", "sojourns"}));
  add_common_flags(simulate, &sim_seed, &sim_out, &sim_format);

  // --- transient ---------------------------------------------------------
  auto* transient_cmd = app.add_subcommand("transient", "state-probability table");
  sim::ModelParams tr_params{0.6, 0.5, 1.0, 2};
  std::vector<double> tr_times;
  long tr_kmax = 10;
  double tr_tol = 1e-10;
  std::uint64_t tr_seed = 0;
  std::string tr_format = "csv", tr_out;
  transient_cmd->add_option("--alpha", tr_params.alpha)->required();
  transient_cmd->add_option("--lambda", tr_params.lambda)->required();
  transient_cmd->add_option("--mu", tr_params.mu)->required();
  transient_cmd->add_option("--init", tr_params.initial_state)->required();
  transient_cmd->add_option("--t", tr_times, "time points")->required()->expected(-1);
  transient_cmd->add_option("--kmax", tr_kmax, "largest state to report");
  transient_cmd->add_option("--tol", tr_tol, "truncation tolerance");
  add_common_flags(transient_cmd, &tr_seed, &tr_out, &tr_format);

  // --- estimate ----------------------------------------------------------
  auto* estimate_cmd = app.add_subcommand("estimate", "fit (alpha, lambda, mu) to data");
  std::string est_input, est_model = "mm1", est_kind = "sojourns";
  double est_level = 0.95;
  bool est_exclude_zero = false;
  std::uint64_t est_seed = 20130813;
  std::string est_format = "json", est_out;
  estimate_cmd->add_option("--input", est_input, "sojourn or path CSV")->required();
  estimate_cmd->add_option("--model", est_model)
      ->check(CLI::IsMember({"linear_bd", "mm1"}));
  estimate_cmd->add_option("--input-kind", est_kind)
      ->check(CLI::IsMember({"sojourns", "path"}));
  estimate_cmd->add_option("--level", est_level, "confidence level");
  estimate_cmd->add_flag("--exclude-zero-state", est_exclude_zero,
                         "drop sojourns departing state 0 (mm1)");
  add_common_flags(estimate_cmd, &est_seed, &est_out, &est_format);

  // --- mc-bias / mc-coverage ---------------------------------------------
  harness::ExperimentConfig mc_config;
  std::string mc_model = "mm1", mc_grid, mc_sizes, mc_format = "csv", mc_out;
  auto add_mc_options = [&](CLI::App* cmd) {
    cmd->add_option("--model", mc_model)->check(CLI::IsMember({"linear_bd", "mm1"}));
    cmd->add_option("--grid", mc_grid, "cells `alpha,lambda,mu[;alpha,lambda,mu]`")
        ->required();
    cmd->add_option("--sizes", mc_sizes, "sample sizes, comma separated");
    cmd->add_option("--n", mc_sizes, "alias for --sizes");
    cmd->add_option("--reps", mc_config.replicates, "replicates per cell");
    cmd->add_option("--level", mc_config.level, "confidence level");
    cmd->add_option("--threads", mc_config.threads, "worker threads (0: auto)");
    cmd->add_flag("--exclude-zero-state", mc_config.exclude_zero_state);
    add_common_flags(cmd, &mc_config.seed, &mc_out, &mc_format);
  };
  auto* mc_bias = app.add_subcommand("mc-bias", "percent bias / CV table");
  add_mc_options(mc_bias);
  auto* mc_coverage = app.add_subcommand("mc-coverage", "interval coverage table");
  add_mc_options(mc_coverage);

  // --- fit -----------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "financial-series pipeline");
  std::string fit_input, fit_model = "mm1", fit_interval = "interval";
  double fit_level = 0.95;
  std::size_t fit_rate_m = 0;
  std::uint64_t fit_seed = 20130813;
  std::string fit_format = "json", fit_out;
  fit->add_option("--input", fit_input, "CSV with header `date,value`")->required();
  fit->add_option("--model", fit_model)->check(CLI::IsMember({"linear_bd", "mm1"}));
  fit->add_option("--interval-label", fit_interval, "sampling interval label");
  fit->add_option("--level", fit_level, "confidence level");
  fit->add_option("--rate-fit-m", fit_rate_m,
                  "run the KS rate-fit check with this many simulated samples");
  add_common_flags(fit, &fit_seed, &fit_out, &fit_format);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", e.what()}, {"type", "usage"}}.dump() << "\n";
    return 2;
  }

  try {
    if (simulate->parsed()) {
      sim::StopRule stop{sim_events, sim_horizon, sim_target};
      return cmd_simulate(sim_model, params, stop, sim_seed, sim_stream, sim_emit,
                          sim_format, OutputTarget{sim_out});
    }
    if (transient_cmd->parsed()) {
      std::vector<harness::TransientRow> rows;
      for (double t : tr_times) {
        const auto res = transient::state_probabilities(tr_params, tr_kmax, t, tr_tol);
        for (long k = 0; k <= tr_kmax; ++k) {
          rows.push_back({k, t, res[static_cast<std::size_t>(k)].probability,
                          res[static_cast<std::size_t>(k)].terms_used});
        }
      }
      std::ostringstream out;
      if (tr_format == "csv") {
        harness::write_transient_csv(rows, out);
      } else {
        out << harness::transient_json(rows);
      }
      OutputTarget{tr_out}.write(out.str());
      return 0;
    }
    if (estimate_cmd->parsed()) {
      std::ifstream in(est_input);
      if (!in) throw std::runtime_error("cannot open input file `" + est_input + "`");
      sim::SojournData data;
      if (est_kind == "sojourns") {
        data = harness::read_sojourns_csv(in);
      } else {
        throw std::runtime_error("path input requires the sojourn converter; "
                                 "use `simulate --emit sojourns`");
      }
      const auto est = parse_model(est_model) == Model::linear_bd
                           ? estimate::fit_linear_bd(data, est_level)
                           : estimate::fit_mm1(data, est_level, est_exclude_zero);
      std::ostringstream out;
      if (est_format == "csv") {
        harness::write_estimation_csv(est, out);
      } else {
        out << harness::estimation_json(est);
      }
      OutputTarget{est_out}.write(out.str());
      return 0;
    }
    if (mc_bias->parsed() || mc_coverage->parsed()) {
      mc_config.model = parse_model(mc_model);
      mc_config.grid = parse_grid(mc_grid);
      if (!mc_sizes.empty()) mc_config.sample_sizes = parse_sizes(mc_sizes);
      std::ostringstream out;
      if (mc_bias->parsed()) {
        const auto table = harness::run_bias_cv_experiment(mc_config);
        if (mc_format == "csv") {
          harness::write_bias_cv_csv(table, out);
        } else {
          out << harness::bias_cv_json(table);
        }
      } else {
        const auto table = harness::run_coverage_experiment(mc_config);
        if (mc_format == "csv") {
          harness::write_coverage_csv(table, out);
        } else {
          out << harness::coverage_json(table);
        }
      }
      OutputTarget{mc_out}.write(out.str());
      return 0;
    }
    if (fit->parsed()) {
      const auto series = harness::ingest_series_file(fit_input, fit_interval);
      const auto sojourns = harness::series_to_sojourns(series);
      const auto est = parse_model(fit_model) == Model::linear_bd
                           ? estimate::fit_linear_bd(sojourns.data, fit_level)
                           : estimate::fit_mm1(sojourns.data, fit_level);
      json doc = json::parse(harness::estimation_json(est));
      doc["series"] = json{{"observations", series.observations.size()},
                           {"sampling_interval", series.sampling_interval},
                           {"positive_changes", sojourns.data.n_births},
                           {"negative_changes", sojourns.data.n_deaths},
                           {"zero_changes_dropped", sojourns.zero_changes_dropped}};
      if (fit_rate_m > 0) {
        doc["rate_fit"] =
            json{{"m", fit_rate_m},
                 {"significance", 0.05},
                 {"acceptance_proportion",
                  estimate::rate_fit_test(sojourns.data, est, fit_rate_m, 0.05,
                                          fit_seed)}};
      }
      if (fit_format == "csv") {
        std::ostringstream out;
        harness::write_estimation_csv(est, out);
        OutputTarget{fit_out}.write(out.str());
      } else {
        OutputTarget{fit_out}.write(doc.dump(2) + "\n");
      }
      return 0;
    }
  } catch (const std::exception& e) {
    const char* type = "runtime";
    if (dynamic_cast<const std::invalid_argument*>(&e)) type = "invalid_argument";
    if (dynamic_cast<const convergence_error*>(&e)) type = "convergence";
    if (dynamic_cast<const degenerate_data_error*>(&e)) type = "degenerate_data";
    if (dynamic_cast<const ill_conditioned_error*>(&e)) type = "ill_conditioned";
    if (dynamic_cast<const unsupported_parameter_error*>(&e)) type = "unsupported_parameter";
    std::cerr << json{{"error", e.what()}, {"type", type}}.dump() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace fracq::cli
