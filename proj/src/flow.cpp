#include "floquet_lab/flow.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "floquet_lab/bounds.hpp"
#include "floquet_lab/io.hpp"
#include "floquet_lab/network_io.hpp"

namespace flab {

namespace {

constexpr double kRelTol = 1e-9;

void require_steps(int steps) {
  if (steps < 1) fail(ErrorKind::InvalidInput, "steps must be >= 1, got " + std::to_string(steps));
}

void require_dim(const VectorField& vf, const Vector& x0) {
  if (x0.size() != vf.dim) {
    fail(ErrorKind::Dimension, "initial state has dimension " + std::to_string(x0.size()) + ", field has " +
                                   std::to_string(vf.dim));
  }
}

[[noreturn]] void diverged(double t_bad, double t_last) {
  std::ostringstream msg;
  msg << "non-finite state at t=" << t_bad << " (last valid t=" << t_last << ")";
  fail(ErrorKind::Divergence, msg.str());
}

void finish(FloquetResult& fr) {
  const Matrix& psi = fr.transition_matrix;
  fr.det_transition = determinant(psi);
  fr.det_positive = fr.det_transition > 0;
  fr.log_det = fr.det_positive ? std::log(fr.det_transition) : std::numeric_limits<double>::quiet_NaN();
  fr.multipliers = eigenvalues(psi);
  fr.exponents.clear();
  for (const auto& mu : fr.multipliers.values) fr.exponents.push_back(std::log(std::abs(mu)) / fr.period_T);
}

bool within_window(double value, double lo, double hi) {
  return value >= lo * (1 - kRelTol) && value <= hi * (1 + kRelTol);
}

}  // namespace

VectorField mlp_vector_field(Mlp m) {
  const Eigen::Index d = m.state_dim();
  auto shared = std::make_shared<const Mlp>(std::move(m));
  return VectorField{
      d,
      [shared](const Vector& x) -> Vector { return (*shared)(x); },
      [shared](const Vector& x) -> Matrix { return shared->jacobian_matrix(x); },
  };
}

VectorField linear_vector_field(Matrix a) {
  require_square(a, "linear field matrix");
  const Eigen::Index d = a.rows();
  return VectorField{
      d,
      [a](const Vector& x) -> Vector { return a * x; },
      [a](const Vector&) -> Matrix { return a; },
  };
}

VectorField zero_vector_field(Eigen::Index d) {
  return VectorField{
      d,
      [d](const Vector&) -> Vector { return Vector::Zero(d); },
      [d](const Vector&) -> Matrix { return Matrix::Zero(d, d); },
  };
}

Trajectory integrate(const VectorField& vf, const Vector& x0, double t0, double t1, int steps) {
  require_steps(steps);
  require_dim(vf, x0);
  const double h = (t1 - t0) / steps;
  Trajectory out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back({t0, x0});
  Vector x = x0;
  for (int i = 0; i < steps; ++i) {
    const Vector k1 = vf.eval(x);
    const Vector k2 = vf.eval(x + 0.5 * h * k1);
    const Vector k3 = vf.eval(x + 0.5 * h * k2);
    const Vector k4 = vf.eval(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t = t0 + (i + 1) * h;
    if (!x.allFinite()) diverged(t, out.back().t);
    out.push_back({t, x});
  }
  return out;
}

double simpson(const std::vector<double>& f, double h) {
  const std::size_t n = f.size() - 1;  // intervals
  if (f.size() < 2) return 0.0;
  if (n == 1) return 0.5 * h * (f[0] + f[1]);
  std::size_t m = n;  // intervals handled by the 1/3 rule
  double tail = 0.0;
  if (n % 2 == 1) {
    m = n - 3;
    tail = 3.0 * h / 8.0 * (f[m] + 3 * f[m + 1] + 3 * f[m + 2] + f[m + 3]);
  }
  double acc = 0.0;
  if (m > 0) {
    acc = f[0] + f[m];
    for (std::size_t i = 1; i < m; ++i) acc += (i % 2 ? 4.0 : 2.0) * f[i];
    acc *= h / 3.0;
  }
  return acc + tail;
}

FloquetResult transition_matrix(const VectorField& vf, const Vector& x0, double T, int steps) {
  require_steps(steps);
  require_dim(vf, x0);
  if (!(T > 0)) fail(ErrorKind::InvalidInput, "period must be positive");
  const Eigen::Index d = vf.dim;
  const double h = T / steps;
  Vector x = x0;
  Matrix psi = Matrix::Identity(d, d);
  std::vector<double> traces;
  traces.reserve(static_cast<std::size_t>(steps) + 1);

  Matrix j1 = vf.jacobian(x);
  traces.push_back(j1.trace());
  for (int i = 0; i < steps; ++i) {
    const Vector k1 = vf.eval(x);
    const Matrix p1 = j1 * psi;
    const Vector x2 = x + 0.5 * h * k1;
    const Vector k2 = vf.eval(x2);
    const Matrix p2 = vf.jacobian(x2) * (psi + 0.5 * h * p1);
    const Vector x3 = x + 0.5 * h * k2;
    const Vector k3 = vf.eval(x3);
    const Matrix p3 = vf.jacobian(x3) * (psi + 0.5 * h * p2);
    const Vector x4 = x + h * k3;
    const Vector k4 = vf.eval(x4);
    const Matrix p4 = vf.jacobian(x4) * (psi + h * p3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    psi += h / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
    if (!x.allFinite() || !psi.allFinite()) diverged((i + 1) * h, i * h);
    j1 = vf.jacobian(x);
    traces.push_back(j1.trace());
  }

  FloquetResult fr;
  fr.period_T = T;
  fr.steps = steps;
  fr.transition_matrix = psi;
  fr.trace_integral = simpson(traces, h);
  fr.end_state = x;
  finish(fr);
  return fr;
}

FloquetResult transition_matrix_along(const VectorField& vf, const ReferenceCurve& curve, double T, int steps) {
  require_steps(steps);
  if (!(T > 0)) fail(ErrorKind::InvalidInput, "period must be positive");
  const Eigen::Index d = vf.dim;
  const double h = T / steps;
  Matrix psi = Matrix::Identity(d, d);
  std::vector<double> traces;
  traces.reserve(static_cast<std::size_t>(steps) + 1);

  auto jac_at = [&](double t) {
    const Vector g = curve(t);
    if (g.size() != d) fail(ErrorKind::Dimension, "reference curve dimension does not match the field");
    return vf.jacobian(g);
  };

  Matrix j_start = jac_at(0.0);
  traces.push_back(j_start.trace());
  for (int i = 0; i < steps; ++i) {
    const double t = i * h;
    const Matrix j_mid = jac_at(t + 0.5 * h);
    const Matrix j_end = jac_at(t + h);
    const Matrix p1 = j_start * psi;
    const Matrix p2 = j_mid * (psi + 0.5 * h * p1);
    const Matrix p3 = j_mid * (psi + 0.5 * h * p2);
    const Matrix p4 = j_end * (psi + h * p3);
    psi += h / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
    if (!psi.allFinite()) diverged(t + h, t);
    j_start = j_end;
    traces.push_back(j_end.trace());
  }

  FloquetResult fr;
  fr.period_T = T;
  fr.steps = steps;
  fr.transition_matrix = psi;
  fr.trace_integral = simpson(traces, h);
  finish(fr);
  return fr;
}

Matrix reverse_transition(const VectorField& vf, const Vector& x0, double T, int steps) {
  VectorField reversed{
      vf.dim,
      [&vf](const Vector& x) -> Vector { return -vf.eval(x); },
      [&vf](const Vector& x) -> Matrix { return -vf.jacobian(x); },
  };
  return transition_matrix(reversed, x0, T, steps).transition_matrix;
}

double FloquetResult::laj_residual() const {
  if (!det_positive) return std::numeric_limits<double>::infinity();
  return std::abs(log_det - trace_integral);
}

void attach_window(FloquetResult& fr, double c_of_u) {
  fr.window = std::make_pair(std::exp(-c_of_u * fr.period_T), std::exp(c_of_u * fr.period_T));
}

bool BoundCheck::all_ok() const {
  bool ok = det_ok && det_ok_bottleneck && exponents_ok && refined_det_ok;
  for (bool b : per_multiplier_ok) ok = ok && b;
  for (bool b : per_multiplier_refined_ok) ok = ok && b;
  return ok;
}

BoundCheck check_floquet_bounds(const FloquetResult& fr, double c_of_u, double c_tilde_of_u,
                                Eigen::Index rank_factor) {
  const Eigen::Index d = fr.transition_matrix.rows();
  if (rank_factor < 1) fail(ErrorKind::Dimension, "rank factor must be >= 1");
  if (static_cast<Eigen::Index>(fr.multipliers.size()) != d) {
    fail(ErrorKind::Dimension, "multiplier count does not match transition matrix");
  }
  if (!(c_of_u >= 0) || !(c_tilde_of_u >= 0)) fail(ErrorKind::InvalidInput, "Jacobian bounds must be >= 0");
  const double T = fr.period_T;
  BoundCheck bc;
  bc.c_of_u = c_of_u;
  bc.c_tilde_of_u = c_tilde_of_u;
  bc.det_bound_d = static_cast<double>(d) * c_of_u * T;
  bc.det_bound_r = static_cast<double>(rank_factor) * c_of_u * T;
  const double abs_log_det = fr.det_positive ? std::abs(fr.log_det) : std::numeric_limits<double>::infinity();
  auto le = [](double a, double b) { return a <= b * (1 + kRelTol) + 1e-12; };
  bc.det_ok = le(abs_log_det, bc.det_bound_d);
  bc.det_ok_bottleneck = le(abs_log_det, bc.det_bound_r);
  bc.window_lo = std::exp(-c_of_u * T);
  bc.window_hi = std::exp(c_of_u * T);
  bc.refined_window_lo = std::exp(-c_tilde_of_u * T);
  bc.refined_window_hi = std::exp(c_tilde_of_u * T);
  bc.exponent_bound = c_of_u;
  bc.exponents_ok = true;
  for (std::size_t i = 0; i < fr.multipliers.size(); ++i) {
    const double m = std::abs(fr.multipliers[i]);
    bc.per_multiplier_ok.push_back(within_window(m, bc.window_lo, bc.window_hi));
    bc.per_multiplier_refined_ok.push_back(within_window(m, bc.refined_window_lo, bc.refined_window_hi));
    bc.exponents_ok = bc.exponents_ok && le(std::abs(fr.exponents[i]), c_of_u);
  }
  bc.refined_det_bound = static_cast<double>(d) * c_tilde_of_u * T;
  bc.refined_det_ok = le(abs_log_det, bc.refined_det_bound);
  return bc;
}

BoundCheck check_floquet_bounds(const FloquetResult& fr, const SaturationReport& sr, Eigen::Index rank_factor) {
  return check_floquet_bounds(fr, sr.c_of_u, sr.c_tilde_of_u, rank_factor);
}

double flow_sensitivity_bound(double c, double t, double dx0) {
  if (t < 0) fail(ErrorKind::Domain, "elapsed time must be >= 0");
  return std::exp(c * t) * dx0;
}

double amplification_ratio(double c_of_u, double c_tilde_of_u, double T) {
  if (T < 0) fail(ErrorKind::Domain, "period must be >= 0");
  if (c_tilde_of_u > c_of_u * (1 + 1e-12) + 1e-15) {
    fail(ErrorKind::Domain, "refined bound exceeds the original one");
  }
  return std::exp((c_of_u - c_tilde_of_u) * T);
}

nlohmann::json to_json(const FloquetResult& fr) {
  nlohmann::json mult = nlohmann::json::array();
  for (const auto& mu : fr.multipliers.values) {
    mult.push_back({{"re", mu.real()}, {"im", mu.imag()}, {"abs", std::abs(mu)}});
  }
  auto finite_or_null = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json exps = nlohmann::json::array();
  for (double e : fr.exponents) exps.push_back(finite_or_null(e));
  nlohmann::json j{{"period_T", fr.period_T},
                   {"steps", fr.steps},
                   {"transition_matrix", matrix_to_json(fr.transition_matrix)},
                   {"det_transition", fr.det_transition},
                   {"det_positive", fr.det_positive},
                   {"log_det", finite_or_null(fr.log_det)},
                   {"trace_integral", fr.trace_integral},
                   {"laj_residual", finite_or_null(fr.laj_residual())},
                   {"multipliers", mult},
                   {"exponents", exps}};
  j["window"] = fr.window ? nlohmann::json{fr.window->first, fr.window->second} : nlohmann::json(nullptr);
  if (fr.end_state) j["end_state"] = vector_to_json(*fr.end_state);
  return j;
}

nlohmann::json to_json(const BoundCheck& bc) {
  return {{"c_of_u", bc.c_of_u},
          {"c_tilde_of_u", bc.c_tilde_of_u},
          {"det_bound_d", bc.det_bound_d},
          {"det_bound_r", bc.det_bound_r},
          {"det_ok", bc.det_ok},
          {"det_ok_bottleneck", bc.det_ok_bottleneck},
          {"window", {bc.window_lo, bc.window_hi}},
          {"per_multiplier_ok", bc.per_multiplier_ok},
          {"exponent_bound", bc.exponent_bound},
          {"exponents_ok", bc.exponents_ok},
          {"refined_det_bound", bc.refined_det_bound},
          {"refined_det_ok", bc.refined_det_ok},
          {"refined_window", {bc.refined_window_lo, bc.refined_window_hi}},
          {"per_multiplier_refined_ok", bc.per_multiplier_refined_ok}};
}

std::string trajectory_csv(const Trajectory& traj) {
  const Eigen::Index d = traj.empty() ? 0 : traj.front().state.size();
  std::vector<std::string> header{"t"};
  for (Eigen::Index i = 0; i < d; ++i) header.push_back("x_" + std::to_string(i + 1));
  CsvTable table(std::move(header));
  for (const auto& p : traj) {
    std::vector<double> row{p.t};
    for (Eigen::Index i = 0; i < d; ++i) row.push_back(p.state(i));
    table.add_row(row);
  }
  return table.str();
}

}  // namespace flab
