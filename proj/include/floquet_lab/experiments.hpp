#pragma once

// Runners for the numerical illustrations. Each writes
//   <output_dir>/<illustration>/<name>.csv  and  manifest.json
// and returns the rows it wrote so callers can assert on them directly.
//
// CSV schemas (all floats with 9 significant digits):
//   illustration-a/attenuation.csv   s,actual_norm,bound,c_w_factor,delta_factor
//   illustration-b/obstruction.csv   s,c_multiple,c_offset,delta,c_of_u,obstruction_bound,reference_abs_ln_det
//   illustration-c/summary.csv       model,s,delta,c_of_u,trace_integral,ln_det,det
//   illustration-c/portrait_<tag>.csv start,t,x_1,x_2
//   table-d/laj.csv                  quantity,numerical,exact
//   illustration-e/refined.csv       s,actual,refined,original,ratio,delta
//   illustration-f/multipliers.csv   s,delta,c_of_u,c_tilde_of_u,mu1_abs,mu2_abs,window_lo,window_hi,det,contained
//
// delta columns hold the raw activation slope max_i sigma'(a_i) (without the
// factor s), which is the quantity the saturation threshold is usually quoted in.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "floquet_lab/network.hpp"
#include "floquet_lab/training.hpp"

namespace flab {

enum class Illustration { A, B, C, D, E, F };

std::string_view to_string(Illustration which);
Illustration parse_illustration(std::string_view name);
std::vector<Illustration> all_illustrations();

struct SweepSpec {
  std::vector<double> s_values;
  std::vector<double> c_offsets;  // multiples of c_min = max_j ||W_{1,j.}||
  Vector eval_point = Vector{{0.8, 0.4}};
  std::size_t orbit_points = 1000;
  int steps = 4000;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;

  void validate() const;
};

/// Grids: A/B 30 log-spaced points in [1, 30]; C {1, 4, 15}; E ten points in
/// [1, 30]; F {1, 2, 4, 7}. B offsets {0, 1.5, 3, 6}.
SweepSpec default_spec(Illustration which);

/// n log-spaced values from lo to hi inclusive.
std::vector<double> log_space(double lo, double hi, std::size_t n);

/// The network an illustration is evaluated on: the 32-unit net for A, B, E
/// and the bias-shifted 256-unit net for C, F. D needs none.
TrainConfig model_config(Illustration which, std::uint64_t seed);
bool needs_model(Illustration which);

/// Worker count for sweeps: FLOQUET_LAB_THREADS when set, else hardware concurrency.
unsigned sweep_threads();

/// Runs job(i) for i in [0, n) on up to sweep_threads() workers. Results are
/// stored by index, so the output order never depends on scheduling.
template <typename R>
std::vector<R> parallel_map(std::size_t n, const std::function<R(std::size_t)>& job);

struct AttenuationRow {
  double s, actual_norm, bound, c_w_factor, delta_factor;
};
struct ObstructionRow {
  double s, c_multiple, c_offset, delta, c_of_u, obstruction_bound;
};
struct PortraitSummaryRow {
  std::string model;
  double s, delta, c_of_u, trace_integral, ln_det, det;
};
struct LajTable {
  double trace_on_orbit;      // value with the largest deviation from -2 over the samples
  double trace_max_abs_dev;   // max |Tr + 2|
  double trace_integral;      // Simpson over the orbit samples
  double det;                 // det of the RK4 monodromy matrix
  double abs_ln_det;
  double c_of_u;              // max ||Df|| over the orbit samples
  double bound;               // d C(U) T
};
struct RefinedRow {
  double s, actual, refined, original, ratio, delta;
};
struct MultiplierRow {
  double s, delta, c_of_u, c_tilde_of_u, mu1_abs, mu2_abs, window_lo, window_hi, det;
  bool contained;
};

std::vector<AttenuationRow> run_illustration_a(const SweepSpec& spec, const Mlp& model);
std::vector<ObstructionRow> run_illustration_b(const SweepSpec& spec, const Mlp& model);
std::vector<PortraitSummaryRow> run_illustration_c(const SweepSpec& spec, const Mlp& model);
LajTable run_table_d(const SweepSpec& spec);
std::vector<RefinedRow> run_illustration_e(const SweepSpec& spec, const Mlp& model);
std::vector<MultiplierRow> run_illustration_f(const SweepSpec& spec, const Mlp& model);

/// Where an experiment's network comes from: a weight file, or training with
/// model_config(which, seed) when allowed. Neither available is a Config error.
struct ModelSource {
  std::optional<std::filesystem::path> weights;
  bool train_if_missing = false;
};

Mlp resolve_model(Illustration which, const ModelSource& source, std::uint64_t seed);

/// Resolves the model (if needed), runs the illustration and writes its
/// artifacts. When the model was trained here it is saved as model.json next
/// to the CSVs. Returns the manifest.
nlohmann::json run_experiment(Illustration which, const SweepSpec& spec, const ModelSource& source);

SweepSpec sweep_spec_from_json(const nlohmann::json& j, Illustration which);
nlohmann::json to_json(const SweepSpec& spec);

}  // namespace flab

#include "floquet_lab/detail/parallel.hpp"
