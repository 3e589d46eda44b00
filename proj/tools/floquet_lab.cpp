// floquet-lab: train, analyse and sweep MLP vector fields.
//
// Exit codes: 0 success, 1 validation/config error, 2 numerical failure.
// Errors are reported as one JSON object on stderr.

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "floquet_lab/benchmark.hpp"
#include "floquet_lab/bounds.hpp"
#include "floquet_lab/experiments.hpp"
#include "floquet_lab/flow.hpp"
#include "floquet_lab/io.hpp"
#include "floquet_lab/network_io.hpp"
#include "floquet_lab/training.hpp"

using namespace flab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string output_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  bool quiet = false;
};

// Loads --config and checks its "schema" tag before anything runs.
json load_config(const Common& c, const std::string& kind) {
  if (c.config.empty()) return json::object();
  json j = read_json_file(c.config);
  if (!j.is_object()) fail(ErrorKind::Config, "'" + c.config + "' must hold a JSON object");
  const std::string want = "floquet-lab/" + kind + "/v1";
  if (!j.contains("schema")) fail(ErrorKind::Config, "'" + c.config + "' lacks the \"schema\" field (" + want + ")");
  if (j.at("schema") != want) {
    fail(ErrorKind::Config, "'" + c.config + "' has schema " + j.at("schema").dump() + ", expected \"" + want + "\"");
  }
  return j;
}

void emit(const Common& c, const json& j) {
  if (!c.quiet) std::cout << j.dump(2) << "\n";
}

void emit_text(const Common& c, const std::string& text) {
  if (!c.quiet) std::cout << text;
}

int exit_code_for(const Error& e) { return e.is_numerical() ? 2 : 1; }

void report_error(std::string_view kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

Mlp load_model(const std::string& path) {
  if (path.empty()) fail(ErrorKind::Config, "--weights is required");
  if (!fs::exists(path)) fail(ErrorKind::Config, "weights file '" + path + "' not found");
  return read_weights(path);
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string preset = "default";
};

void cmd_train(const Common& c, const TrainArgs& a) {
  json j = load_config(c, "train");
  TrainConfig cfg = a.preset == "protocol" ? TrainConfig::protocol() : TrainConfig{};
  if (!j.empty()) {
    j.erase("schema");
    json base = to_json(cfg);
    if (j.contains("hidden_width")) base.erase("hidden_widths");
    base.merge_patch(j);
    cfg = train_config_from_json(base);
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  const auto report = train(cfg);
  const fs::path out = c.output_dir;
  write_weights(report.trained_model, out / "model.json");
  json rep = to_json(report);
  rep.erase("trained_model");
  rep["config"] = to_json(cfg);
  rep["weights"] = (out / "model.json").string();
  write_text_atomic(out / "train_report.json", rep.dump(2) + "\n");
  rep.erase("loss_history");
  emit(c, rep);
}

// ---- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  std::string weights;
  std::optional<double> s;
  std::optional<double> delta;
  std::size_t points = 1000;
};

void cmd_analyze(const Common& c, AnalyzeArgs a) {
  json j = load_config(c, "analyze");
  if (j.contains("scale_s") && !a.s) a.s = j.at("scale_s").get<double>();
  if (j.contains("delta") && !a.delta) a.delta = j.at("delta").get<double>();
  a.points = j.value("orbit_points", a.points);
  if (j.contains("region") && j.at("region") != "unit-circle") fail(ErrorKind::Config, "region must be \"unit-circle\"");
  Mlp m = load_model(a.weights);
  if (a.s) m = m.with_scale(*a.s);
  const auto u = unit_circle_region(a.points);
  const auto sr = a.delta ? analyze_saturation(m, u, *a.delta) : analyze_saturation_tight(m, u);
  json out = to_json(sr);
  out["scale_s"] = m.scale();
  out["global_lipschitz"] = global_lipschitz(m);
  write_text_atomic(fs::path(c.output_dir) / "analysis.json", out.dump(2) + "\n");
  emit(c, out);
}

// ---- floquet ---------------------------------------------------------------

struct FloquetArgs {
  std::string weights;
  std::string field = "mlp";
  std::string orbit = "unit-circle";
  double T = 2 * std::numbers::pi;
  std::vector<double> x0{1.0, 0.0};
  std::optional<double> s;
};

void cmd_floquet(const Common& c, FloquetArgs a) {
  json j = load_config(c, "floquet");
  a.T = j.value("T", a.T);
  a.orbit = j.value("orbit", a.orbit);
  if (j.contains("x0")) a.x0 = j.at("x0").get<std::vector<double>>();
  if (j.contains("scale_s") && !a.s) a.s = j.at("scale_s").get<double>();
  const int steps = c.steps.value_or(j.value("steps", 4000));
  if (a.orbit != "unit-circle" && a.orbit != "trajectory") {
    fail(ErrorKind::InvalidInput, "--orbit must be unit-circle or trajectory");
  }
  if (!(a.T > 0)) fail(ErrorKind::InvalidInput, "--T must be positive");

  std::optional<Mlp> model;
  VectorField vf;
  if (!a.weights.empty() || a.field == "mlp") {
    model = load_model(a.weights);
    if (a.s) model = model->with_scale(*a.s);
    vf = mlp_vector_field(*model);
  } else if (a.field == "stuart-landau") {
    vf = sl_vector_field();
  } else {
    fail(ErrorKind::InvalidInput, "--field must be mlp or stuart-landau");
  }
  if (vf.dim != 2 && a.orbit == "unit-circle") fail(ErrorKind::Dimension, "unit-circle orbit needs a 2-D field");

  FloquetResult fr;
  if (a.orbit == "unit-circle") {
    fr = transition_matrix_along(vf, sl_limit_cycle(), a.T, steps);
  } else {
    fr = transition_matrix(vf, Eigen::Map<const Vector>(a.x0.data(), static_cast<Eigen::Index>(a.x0.size())), a.T,
                           steps);
  }
  json out{{"orbit", a.orbit}};
  if (model && a.orbit == "unit-circle") {
    const auto sr = analyze_saturation_tight(*model, unit_circle_region(1000));
    attach_window(fr, sr.c_of_u);
    out["saturation"] = to_json(sr);
    out["bounds"] = to_json(check_floquet_bounds(fr, sr, sr.bottleneck_r));
  } else if (!model) {
    double c_of_u = 0;
    for (const auto& p : unit_circle_points(1000)) c_of_u = std::max(c_of_u, spectral_norm(sl_jacobian(p(0), p(1))));
    attach_window(fr, c_of_u);
    out["c_of_u"] = c_of_u;
    out["bounds"] = to_json(check_floquet_bounds(fr, c_of_u, c_of_u, 2));
  }
  out["floquet"] = to_json(fr);
  write_text_atomic(fs::path(c.output_dir) / "floquet.json", out.dump(2) + "\n");
  emit(c, out);
}

// ---- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::string weights;
  std::vector<double> s_values;
};

void cmd_sweep(const Common& c, SweepArgs a) {
  json j = load_config(c, "sweep");
  if (a.s_values.empty()) a.s_values = j.value("s_values", std::vector<double>{1.0, 2.0, 4.0, 7.0});
  SweepSpec spec = default_spec(Illustration::F);
  spec.s_values = a.s_values;
  spec.orbit_points = j.value("orbit_points", spec.orbit_points);
  spec.steps = c.steps.value_or(j.value("steps", spec.steps));
  spec.validate();
  const Mlp m = load_model(a.weights);
  if (m.state_dim() != 2) fail(ErrorKind::Dimension, "sweep evaluates along the unit circle; needs a 2-D field");
  const auto rows = run_illustration_f(spec, m);
  CsvTable t({"s", "delta", "c_of_u", "c_tilde_of_u", "mu1_abs", "mu2_abs", "window_lo", "window_hi", "det",
              "contained"});
  for (const auto& r : rows) {
    t.add_row({r.s, r.delta, r.c_of_u, r.c_tilde_of_u, r.mu1_abs, r.mu2_abs, r.window_lo, r.window_hi, r.det,
               r.contained ? 1.0 : 0.0});
  }
  t.write(fs::path(c.output_dir) / "sweep.csv");
  emit_text(c, t.str());
}

// ---- experiment / table ----------------------------------------------------

struct ExperimentArgs {
  std::string name;
  std::string weights;
  bool train = false;
};

json run_named(const Common& c, const ExperimentArgs& a, const json& cfg, Illustration which) {
  SweepSpec spec = sweep_spec_from_json(cfg, which);
  spec.output_dir = c.output_dir;
  if (c.seed) spec.seed = *c.seed;
  if (c.steps) spec.steps = *c.steps;
  spec.validate();
  ModelSource src;
  if (!a.weights.empty()) src.weights = fs::path(a.weights);
  src.train_if_missing = a.train;
  return run_experiment(which, spec, src);
}

void cmd_experiment(const Common& c, const ExperimentArgs& a) {
  json cfg = load_config(c, "experiment");
  std::string name = a.name.empty() ? cfg.value("name", std::string{}) : a.name;
  if (name.empty()) fail(ErrorKind::InvalidInput, "--name is required");
  cfg.erase("name");
  if (!cfg.empty()) cfg["schema"] = "floquet-lab/experiment/v1";
  std::vector<Illustration> which;
  if (name == "all") {
    which = all_illustrations();
  } else {
    which = {parse_illustration(name)};
  }
  if (which.size() > 1 && !a.weights.empty()) {
    fail(ErrorKind::InvalidInput, "--weights applies to a single experiment, not 'all'");
  }
  json manifests = json::array();
  for (auto w : which) manifests.push_back(run_named(c, a, cfg, w));
  emit(c, which.size() == 1 ? manifests.front() : manifests);
}

void cmd_table(const Common& c, const ExperimentArgs& a) {
  json cfg = load_config(c, "table");
  const std::string name = a.name.empty() ? cfg.value("name", std::string{}) : a.name;
  cfg.erase("name");
  if (!cfg.empty()) cfg["schema"] = "floquet-lab/experiment/v1";
  Illustration which;
  if (name == "d" || name == "table-d") {
    which = Illustration::D;
  } else if (name == "e" || name == "table-e") {
    which = Illustration::E;
  } else if (name == "f" || name == "table-f") {
    which = Illustration::F;
  } else {
    fail(ErrorKind::InvalidInput, "--name must be d, e or f");
  }
  const json manifest = run_named(c, a, cfg, which);
  const fs::path dir = fs::path(c.output_dir) / std::string(to_string(which));
  for (const auto& [file, hash] : manifest.at("files").items()) {
    std::ifstream in(dir / file);
    std::stringstream buf;
    buf << in.rdbuf();
    emit_text(c, buf.str());
  }
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file");
  sub->add_option("--output-dir", c.output_dir, "Directory for all outputs")->capture_default_str();
  sub->add_option("--seed", c.seed, "Seed for every stochastic choice");
  sub->add_option("--steps", c.steps, "RK4 steps per period")->check(CLI::PositiveNumber);
  sub->add_flag("--quiet", c.quiet, "Suppress standard output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"floquet-lab: saturation bounds and Floquet spectra of MLP vector fields"};
  app.require_subcommand(1);
  Common common;

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Fit an MLP to the Stuart-Landau field");
  add_common(train_cmd, common);
  train_cmd->add_option("--preset", train_args.preset, "default (32 units) or protocol (256 units, bias shift)")
      ->check(CLI::IsMember({"default", "protocol"}));

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "Saturation report over the unit circle");
  add_common(analyze_cmd, common);
  analyze_cmd->add_option("--weights", analyze_args.weights, "Weight file");
  analyze_cmd->add_option("--s", analyze_args.s, "Override the pre-activation scale");
  analyze_cmd->add_option("--delta", analyze_args.delta, "Saturation threshold (default: tight)");
  analyze_cmd->add_option("--points", analyze_args.points, "Orbit sample count");

  FloquetArgs floquet_args;
  auto* floquet_cmd = app.add_subcommand("floquet", "Transition matrix, multipliers and bound checks");
  add_common(floquet_cmd, common);
  floquet_cmd->add_option("--weights", floquet_args.weights, "Weight file");
  floquet_cmd->add_option("--field", floquet_args.field, "mlp or stuart-landau")
      ->check(CLI::IsMember({"mlp", "stuart-landau"}));
  floquet_cmd->add_option("--orbit", floquet_args.orbit, "unit-circle (reference curve) or trajectory");
  floquet_cmd->add_option("--T", floquet_args.T, "Period");
  floquet_cmd->add_option("--x0", floquet_args.x0, "Start state for --orbit trajectory")->delimiter(',');
  floquet_cmd->add_option("--s", floquet_args.s, "Override the pre-activation scale");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Multiplier windows over a grid of s");
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--weights", sweep_args.weights, "Weight file");
  sweep_cmd->add_option("--s-values", sweep_args.s_values, "Comma-separated scales")->delimiter(',');

  ExperimentArgs exp_args;
  auto* exp_cmd = app.add_subcommand("experiment", "Run an illustration and write CSV + manifest");
  add_common(exp_cmd, common);
  exp_cmd->add_option("--name", exp_args.name, "illustration-a|b|c|e|f, table-d or all");
  exp_cmd->add_option("--weights", exp_args.weights, "Trained model to evaluate");
  exp_cmd->add_flag("--train", exp_args.train, "Train the model when no weights are given");

  ExperimentArgs table_args;
  auto* table_cmd = app.add_subcommand("table", "Print a table (d, e or f) as CSV");
  add_common(table_cmd, common);
  table_cmd->add_option("--name", table_args.name, "d, e or f");
  table_cmd->add_option("--weights", table_args.weights, "Trained model to evaluate");
  table_cmd->add_flag("--train", table_args.train, "Train the model when no weights are given");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    report_error("usage", e.what());
    return 1;
  }

  try {
    if (*train_cmd) cmd_train(common, train_args);
    if (*analyze_cmd) cmd_analyze(common, analyze_args);
    if (*floquet_cmd) cmd_floquet(common, floquet_args);
    if (*sweep_cmd) cmd_sweep(common, sweep_args);
    if (*exp_cmd) cmd_experiment(common, exp_args);
    if (*table_cmd) cmd_table(common, table_args);
  } catch (const Error& e) {
    report_error(to_string(e.kind()), e.what());
    return exit_code_for(e);
  } catch (const json::exception& e) {
    report_error("config", e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
  return 0;
}
