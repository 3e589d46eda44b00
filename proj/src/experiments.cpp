#include "floquet_lab/experiments.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <thread>

#include "floquet_lab/benchmark.hpp"
#include "floquet_lab/bounds.hpp"
#include "floquet_lab/flow.hpp"
#include "floquet_lab/io.hpp"
#include "floquet_lab/network_io.hpp"

namespace flab {

namespace {

constexpr double kPeriod = 2 * std::numbers::pi;
constexpr const char* kManifestSchema = "floquet-lab/manifest/v1";
constexpr const char* kSweepSchema = "floquet-lab/experiment/v1";

// Largest raw slope max_i sigma'(a_{k,i}) over hidden layers, from M_k = s * that.
double raw_delta(const SaturationReport& sr, double s) {
  double d = 0;
  for (double mk : sr.per_layer_max_deriv) d = std::max(d, mk / s);
  return d;
}

RegionSamples orbit_region(const SweepSpec& spec) { return unit_circle_region(spec.orbit_points); }

void require_planar(const Mlp& m, const char* what) {
  if (m.state_dim() != 2) fail(ErrorKind::Dimension, std::string(what) + " is defined for 2-D state networks");
}

std::string tag_for(double s) {
  std::string t = format_float(s);
  for (char& c : t)
    if (c == '.') c = 'p';
  return "s" + t;
}

}  // namespace

std::string_view to_string(Illustration which) {
  switch (which) {
    case Illustration::A: return "illustration-a";
    case Illustration::B: return "illustration-b";
    case Illustration::C: return "illustration-c";
    case Illustration::D: return "table-d";
    case Illustration::E: return "illustration-e";
    case Illustration::F: return "illustration-f";
  }
  return "unknown";
}

std::vector<Illustration> all_illustrations() {
  return {Illustration::A, Illustration::B, Illustration::C, Illustration::D, Illustration::E, Illustration::F};
}

Illustration parse_illustration(std::string_view name) {
  for (auto w : all_illustrations())
    if (to_string(w) == name) return w;
  // Short aliases: a..f, table-e, table-f.
  if (name.size() == 1 && name[0] >= 'a' && name[0] <= 'f') return all_illustrations()[static_cast<std::size_t>(name[0] - 'a')];
  if (name == "table-e") return Illustration::E;
  if (name == "table-f") return Illustration::F;
  fail(ErrorKind::InvalidInput, "unknown experiment '" + std::string(name) +
                                    "' (expected illustration-a|b|c|e|f or table-d)");
}

std::vector<double> log_space(double lo, double hi, std::size_t n) {
  if (!(lo > 0) || !(hi >= lo)) fail(ErrorKind::InvalidInput, "log_space needs 0 < lo <= hi");
  if (n == 0) return {};
  if (n == 1) return {lo};
  std::vector<double> out(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

void SweepSpec::validate() const {
  if (s_values.empty()) fail(ErrorKind::InvalidInput, "s_values must be nonempty");
  for (double s : s_values)
    if (!(s > 0) || !std::isfinite(s)) fail(ErrorKind::InvalidInput, "s_values must be positive and finite");
  for (double c : c_offsets)
    if (!(c >= 0) || !std::isfinite(c)) fail(ErrorKind::InvalidInput, "c_offsets must be finite and >= 0");
  if (orbit_points < 1) fail(ErrorKind::InvalidInput, "orbit_points must be >= 1");
  if (steps < 1) fail(ErrorKind::InvalidInput, "steps must be >= 1");
  if (!eval_point.allFinite()) fail(ErrorKind::InvalidInput, "eval_point must be finite");
}

SweepSpec default_spec(Illustration which) {
  SweepSpec spec;
  switch (which) {
    case Illustration::A:
    case Illustration::B: spec.s_values = log_space(1.0, 30.0, 30); break;
    case Illustration::C: spec.s_values = {1.0, 4.0, 15.0}; break;
    case Illustration::D: spec.s_values = {1.0}; break;
    case Illustration::E: spec.s_values = {1.0, 4.2, 7.4, 10.7, 13.9, 17.1, 20.3, 23.6, 26.8, 30.0}; break;
    case Illustration::F: spec.s_values = {1.0, 2.0, 4.0, 7.0}; break;
  }
  if (which == Illustration::B) spec.c_offsets = {0.0, 1.5, 3.0, 6.0};
  return spec;
}

bool needs_model(Illustration which) { return which != Illustration::D; }

TrainConfig model_config(Illustration which, std::uint64_t seed) {
  if (which == Illustration::C || which == Illustration::F) return TrainConfig::protocol(seed);
  TrainConfig cfg;
  cfg.seed = seed;
  return cfg;
}

unsigned sweep_threads() {
  if (const char* env = std::getenv("FLOQUET_LAB_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) fail(ErrorKind::Config, "FLOQUET_LAB_THREADS must be a positive integer");
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<AttenuationRow> run_illustration_a(const SweepSpec& spec, const Mlp& model) {
  spec.validate();
  const RegionSamples at_h0{{spec.eval_point}, "evaluation point"};
  const double c_w = weight_norm_product(model);
  return parallel_map<AttenuationRow>(spec.s_values.size(), [&](std::size_t i) {
    const double s = spec.s_values[i];
    const Mlp m = model.with_scale(s);
    const auto sr = analyze_saturation_tight(m, at_h0);
    const double c_w_factor = c_w * std::pow(s, static_cast<double>(m.num_hidden()));
    return AttenuationRow{s, spectral_norm(m.jacobian_matrix(spec.eval_point)), sr.c_of_u, c_w_factor,
                          sr.c_of_u / c_w_factor};
  });
}

std::vector<ObstructionRow> run_illustration_b(const SweepSpec& spec, const Mlp& model) {
  spec.validate();
  if (spec.c_offsets.empty()) fail(ErrorKind::InvalidInput, "illustration B needs c_offsets");
  const double c_min = model.layer(0).weight.rowwise().norm().maxCoeff();
  const RegionSamples u = orbit_region(spec);
  const Mlp base = model.absorb_offset();
  const double d = static_cast<double>(model.state_dim());
  const std::size_t ns = spec.s_values.size();
  return parallel_map<ObstructionRow>(spec.c_offsets.size() * ns, [&](std::size_t idx) {
    const double mult = spec.c_offsets[idx / ns];
    const double s = spec.s_values[idx % ns];
    // b_1 -> b_1 + c inside the scaled pre-activation.
    const Mlp m = base.with_offset(mult * c_min).with_scale(s);
    const auto sr = analyze_saturation_tight(m, u);
    return ObstructionRow{s, mult, mult * c_min, raw_delta(sr, s), sr.c_of_u, d * sr.c_of_u * kPeriod};
  });
}

std::vector<PortraitSummaryRow> run_illustration_c(const SweepSpec& spec, const Mlp& model) {
  spec.validate();
  require_planar(model, "illustration C");
  const RegionSamples u = orbit_region(spec);
  auto rows = parallel_map<PortraitSummaryRow>(spec.s_values.size(), [&](std::size_t i) {
    const double s = spec.s_values[i];
    const Mlp m = model.with_scale(s);
    const auto sr = analyze_saturation_tight(m, u);
    const auto fr = transition_matrix_along(mlp_vector_field(m), sl_limit_cycle(), kPeriod, spec.steps);
    return PortraitSummaryRow{"mlp", s, raw_delta(sr, s), sr.c_of_u, fr.trace_integral, fr.log_det, fr.det_transition};
  });
  const auto fr = transition_matrix(sl_vector_field(), Vector{{1.0, 0.0}}, kPeriod, spec.steps);
  double c_sl = 0;
  for (const auto& p : u.points) c_sl = std::max(c_sl, spectral_norm(sl_jacobian(p(0), p(1))));
  rows.insert(rows.begin(), PortraitSummaryRow{"stuart-landau", std::nan(""), std::nan(""), c_sl, fr.trace_integral,
                                               fr.log_det, fr.det_transition});
  return rows;
}

LajTable run_table_d(const SweepSpec& spec) {
  spec.validate();
  const auto pts = unit_circle_points(spec.orbit_points);
  LajTable t{};
  std::vector<double> traces;
  traces.reserve(pts.size() + 1);
  for (const auto& p : pts) {
    const Eigen::Matrix2d j = sl_jacobian(p(0), p(1));
    const double tr = j.trace();
    traces.push_back(tr);
    if (std::abs(tr + 2) >= t.trace_max_abs_dev) {
      t.trace_max_abs_dev = std::abs(tr + 2);
      t.trace_on_orbit = tr;
    }
    t.c_of_u = std::max(t.c_of_u, spectral_norm(j));
  }
  traces.push_back(traces.front());  // closes the orbit at t = T
  t.trace_integral = simpson(traces, kPeriod / static_cast<double>(pts.size()));
  const auto fr = transition_matrix(sl_vector_field(), Vector{{1.0, 0.0}}, kPeriod, spec.steps);
  t.det = fr.det_transition;
  t.abs_ln_det = std::abs(fr.log_det);
  t.bound = 2.0 * t.c_of_u * kPeriod;
  return t;
}

std::vector<RefinedRow> run_illustration_e(const SweepSpec& spec, const Mlp& model) {
  spec.validate();
  return parallel_map<RefinedRow>(spec.s_values.size(), [&](std::size_t i) {
    const double s = spec.s_values[i];
    const Mlp m = model.with_scale(s);
    const auto b = pointwise_jacobian_bound(m, spec.eval_point);
    double delta = 0;
    for (const auto& a : m.forward(spec.eval_point).pre_activations)
      for (Eigen::Index k = 0; k < a.size(); ++k) delta = std::max(delta, m.activation().deriv(a(k)));
    return RefinedRow{s, b.actual, b.refined, b.original, b.original / b.refined, delta};
  });
}

std::vector<MultiplierRow> run_illustration_f(const SweepSpec& spec, const Mlp& model) {
  spec.validate();
  require_planar(model, "illustration F");
  const RegionSamples u = orbit_region(spec);
  return parallel_map<MultiplierRow>(spec.s_values.size(), [&](std::size_t i) {
    const double s = spec.s_values[i];
    const Mlp m = model.with_scale(s);
    const auto sr = analyze_saturation_tight(m, u);
    auto fr = transition_matrix_along(mlp_vector_field(m), sl_limit_cycle(), kPeriod, spec.steps);
    attach_window(fr, sr.c_of_u);
    const auto bc = check_floquet_bounds(fr, sr, sr.bottleneck_r);
    bool contained = true;
    for (bool ok : bc.per_multiplier_ok) contained = contained && ok;
    return MultiplierRow{s,
                         raw_delta(sr, s),
                         sr.c_of_u,
                         sr.c_tilde_of_u,
                         std::abs(fr.multipliers[0]),
                         std::abs(fr.multipliers[1]),
                         bc.window_lo,
                         bc.window_hi,
                         fr.det_transition,
                         contained};
  });
}

Mlp resolve_model(Illustration which, const ModelSource& source, std::uint64_t seed) {
  if (source.weights) {
    if (!std::filesystem::exists(*source.weights)) {
      fail(ErrorKind::Config, "model weights '" + source.weights->string() + "' not found");
    }
    return read_weights(*source.weights);
  }
  if (!source.train_if_missing) {
    fail(ErrorKind::Config, std::string(to_string(which)) + " needs a trained model; pass weights or enable training");
  }
  return train(model_config(which, seed)).trained_model;
}

SweepSpec sweep_spec_from_json(const nlohmann::json& j, Illustration which) {
  SweepSpec spec = default_spec(which);
  try {
    if (j.contains("schema") && j.at("schema") != kSweepSchema) {
      fail(ErrorKind::Config, "unsupported experiment schema " + j.at("schema").dump());
    }
    if (j.contains("s_values")) spec.s_values = j.at("s_values").get<std::vector<double>>();
    if (j.contains("c_offsets")) spec.c_offsets = j.at("c_offsets").get<std::vector<double>>();
    if (j.contains("eval_point")) spec.eval_point = vector_from_json(j.at("eval_point"));
    spec.orbit_points = j.value("orbit_points", spec.orbit_points);
    spec.steps = j.value("steps", spec.steps);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("output_dir")) spec.output_dir = j.at("output_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, std::string("experiment config: ") + e.what());
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const SweepSpec& spec) {
  return {{"schema", kSweepSchema},
          {"s_values", spec.s_values},
          {"c_offsets", spec.c_offsets},
          {"eval_point", vector_to_json(spec.eval_point)},
          {"orbit_points", spec.orbit_points},
          {"steps", spec.steps},
          {"seed", spec.seed}};
}

namespace {

struct Artifact {
  std::string name;
  std::string text;
};

std::vector<Artifact> render(Illustration which, const SweepSpec& spec, const Mlp* model) {
  std::vector<Artifact> out;
  switch (which) {
    case Illustration::A: {
      CsvTable t({"s", "actual_norm", "bound", "c_w_factor", "delta_factor"});
      for (const auto& r : run_illustration_a(spec, *model)) t.add_row({r.s, r.actual_norm, r.bound, r.c_w_factor, r.delta_factor});
      out.push_back({"attenuation.csv", t.str()});
      break;
    }
    case Illustration::B: {
      CsvTable t({"s", "c_multiple", "c_offset", "delta", "c_of_u", "obstruction_bound", "reference_abs_ln_det"});
      for (const auto& r : run_illustration_b(spec, *model)) {
        t.add_row({r.s, r.c_multiple, r.c_offset, r.delta, r.c_of_u, r.obstruction_bound, 4 * std::numbers::pi});
      }
      out.push_back({"obstruction.csv", t.str()});
      break;
    }
    case Illustration::C: {
      CsvTable t({"model", "s", "delta", "c_of_u", "trace_integral", "ln_det", "det"});
      for (const auto& r : run_illustration_c(spec, *model)) {
        const bool exact = r.model == "stuart-landau";
        t.add_row({r.model, exact ? "" : format_float(r.s), exact ? "" : format_float(r.delta), format_float(r.c_of_u),
                   format_float(r.trace_integral), format_float(r.ln_det), format_float(r.det)});
      }
      out.push_back({"summary.csv", t.str()});
      // Phase portraits: 6 angles x radii {0.3, 1.7}, two periods, every 10th step.
      std::vector<Vector> starts;
      for (double radius : {0.3, 1.7})
        for (int k = 0; k < 6; ++k) {
          const double th = 2 * std::numbers::pi * k / 6.0;
          starts.push_back(Vector{{radius * std::cos(th), radius * std::sin(th)}});
        }
      std::vector<std::pair<std::string, VectorField>> fields{{"sl", sl_vector_field()}};
      for (double s : spec.s_values) fields.emplace_back(tag_for(s), mlp_vector_field(model->with_scale(s)));
      const int stride = 10;
      const int steps = std::max(stride, 2 * spec.steps / stride * stride);
      auto portraits = parallel_map<std::string>(fields.size(), [&](std::size_t f) {
        CsvTable t({"start", "t", "x_1", "x_2"});
        for (std::size_t i = 0; i < starts.size(); ++i) {
          const auto traj = integrate(fields[f].second, starts[i], 0.0, 2 * kPeriod, steps);
          for (std::size_t k = 0; k < traj.size(); k += stride) {
            t.add_row({static_cast<double>(i), traj[k].t, traj[k].state(0), traj[k].state(1)});
          }
        }
        return t.str();
      });
      for (std::size_t f = 0; f < fields.size(); ++f) out.push_back({"portrait_" + fields[f].first + ".csv", portraits[f]});
      break;
    }
    case Illustration::D: {
      const auto d = run_table_d(spec);
      const auto ref = sl_reference();
      CsvTable t({"quantity", "numerical", "exact"});
      t.add_row({"trace_on_orbit", format_float(d.trace_on_orbit), format_float(ref.trace_on_cycle)});
      t.add_row({"trace_integral", format_float(d.trace_integral), format_float(ref.ln_det)});
      t.add_row({"det_monodromy", format_float(d.det), format_float(ref.det)});
      t.add_row({"abs_ln_det", format_float(d.abs_ln_det), format_float(-ref.ln_det)});
      t.add_row({"bound_d_c_t", format_float(d.bound), format_float(-ref.ln_det)});
      out.push_back({"laj.csv", t.str()});
      break;
    }
    case Illustration::E: {
      CsvTable t({"s", "actual", "refined", "original", "ratio", "delta"});
      for (const auto& r : run_illustration_e(spec, *model)) t.add_row({r.s, r.actual, r.refined, r.original, r.ratio, r.delta});
      out.push_back({"refined.csv", t.str()});
      break;
    }
    case Illustration::F: {
      CsvTable t({"s", "delta", "c_of_u", "c_tilde_of_u", "mu1_abs", "mu2_abs", "window_lo", "window_hi", "det",
                  "contained"});
      for (const auto& r : run_illustration_f(spec, *model)) {
        t.add_row({r.s, r.delta, r.c_of_u, r.c_tilde_of_u, r.mu1_abs, r.mu2_abs, r.window_lo, r.window_hi, r.det,
                   r.contained ? 1.0 : 0.0});
      }
      out.push_back({"multipliers.csv", t.str()});
      break;
    }
  }
  return out;
}

}  // namespace

nlohmann::json run_experiment(Illustration which, const SweepSpec& spec, const ModelSource& source) {
  spec.validate();
  const auto dir = spec.output_dir / std::string(to_string(which));
  nlohmann::json manifest{{"schema", kManifestSchema}, {"experiment", to_string(which)}, {"config", to_json(spec)},
                          {"seed", spec.seed}};
  std::string inputs = to_json(spec).dump();
  std::optional<Mlp> model;
  if (needs_model(which)) {
    model = resolve_model(which, source, spec.seed);
    const std::string weights = dump_weights(*model);
    inputs += weights;
    nlohmann::json m{{"hash", content_hash(weights)}};
    if (source.weights) {
      m["source"] = source.weights->string();
    } else {
      m["source"] = "trained";
      m["train_config"] = to_json(model_config(which, spec.seed));
      write_text_atomic(dir / "model.json", weights);
    }
    manifest["model"] = m;
  }
  manifest["inputs_hash"] = content_hash(inputs);
  nlohmann::json files = nlohmann::json::object();
  for (const auto& a : render(which, spec, model ? &*model : nullptr)) {
    write_text_atomic(dir / a.name, a.text);
    files[a.name] = content_hash(a.text);
  }
  manifest["files"] = files;
  write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace flab
