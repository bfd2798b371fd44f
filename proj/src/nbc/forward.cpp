#include "nbc/forward.hpp"

#include <cmath>
#include <string>

namespace nbc {

ControlSignal ControlSignal::constant(const Vec& u, int intervals) {
  if (intervals < 1) fail_invalid("control: need at least one interval");
  ControlSignal c;
  c.control_dim = static_cast<int>(u.size());
  c.values.assign(static_cast<size_t>(intervals), u);
  return c;
}

Integrator integrator_from_name(const std::string& name) {
  if (name == "euler") return Integrator::euler;
  if (name == "rk4") return Integrator::rk4;
  fail_invalid("unknown integrator '" + name + "' (expected euler or rk4)");
}

const char* integrator_name(Integrator method) {
  return method == Integrator::euler ? "euler" : "rk4";
}

const LiftedEnsemble& TrajectoryBundle::at(int node) const {
  if (node < 0 || node >= static_cast<int>(states.size()))
    fail_invalid("trajectory: node index out of range");
  return states[static_cast<size_t>(node)];
}

LiftedEnsemble discretize_initial(const ParticleMeasure& theta) {
  const double mass = theta.total_mass();
  if (theta.size() == 0 || mass <= 0.0)
    fail_invalid("discretize_initial: initial measure must carry positive mass");
  std::vector<double> w(static_cast<size_t>(theta.size()));
  for (int k = 0; k < theta.size(); ++k) w[static_cast<size_t>(k)] = theta.weight(k) / mass;
  // make the simplex constraint exact against rounding in the divisions
  double wsum = 0.0;
  for (double x : w) wsum += x;
  for (double& x : w) x /= wsum;
  std::vector<double> y(static_cast<size_t>(theta.size()), mass);
  return {theta.dim(), theta.points(), std::move(y), std::move(w)};
}

double support_bound(const Model& model, const LiftedEnsemble& initial, double horizon) {
  const double C = model.sublinear_bound;
  double y_max = 0.0;
  for (int k = 0; k < initial.size(); ++k) y_max = std::max(y_max, initial.mass(k));
  const double mass0 = barycentric_projection(initial).total_mass();
  const double growth = std::exp(C * horizon);
  return support_radius(initial) + horizon * (C * (1.0 + mass0 * growth) + C * y_max * growth);
}

namespace {

struct State {
  std::vector<double> x; // N * n
  std::vector<double> y; // N
};

ParticleMeasure state_measure(int dim, const std::vector<double>& w, const State& s, int step) {
  std::vector<double> weights(w.size());
  for (size_t k = 0; k < w.size(); ++k) {
    if (!(s.y[k] >= 0.0))
      fail_numeric("forward: mass coordinate left [0,inf) at step " + std::to_string(step));
    weights[k] = w[k] * s.y[k];
  }
  return {dim, s.x, std::move(weights)};
}

State eval_rhs(const Model& model, double t, const Vec& u, const std::vector<double>& w,
               const State& s, int step) {
  const int n = model.dim;
  const int N = static_cast<int>(w.size());
  ParticleMeasure mu = state_measure(n, w, s, step);
  State k{std::vector<double>(s.x.size()), std::vector<double>(s.y.size())};
  for (int i = 0; i < N; ++i) {
    Eigen::Map<const Vec> xi(s.x.data() + static_cast<size_t>(i) * n, n);
    Vec f = model.drift(t, u, mu, xi);
    for (int d = 0; d < n; ++d) k.x[static_cast<size_t>(i) * n + d] = f[d];
    k.y[static_cast<size_t>(i)] = s.y[static_cast<size_t>(i)] * model.source(t, u, mu, xi);
  }
  return k;
}

State advance(const State& s, const State& k, double scale) {
  State out = s;
  for (size_t i = 0; i < out.x.size(); ++i) out.x[i] += scale * k.x[i];
  for (size_t i = 0; i < out.y.size(); ++i) out.y[i] += scale * k.y[i];
  return out;
}

void require_finite(const State& s, int step) {
  for (double v : s.x)
    if (!std::isfinite(v)) fail_numeric("forward: non-finite state at step " + std::to_string(step));
  for (double v : s.y)
    if (!std::isfinite(v)) fail_numeric("forward: non-finite state at step " + std::to_string(step));
}

} // namespace

TrajectoryBundle integrate_forward(const Model& model, const ControlSignal& control,
                                   const LiftedEnsemble& initial, const TimeGrid& grid,
                                   Integrator method) {
  model.require_complete();
  if (initial.dim() != model.dim) fail_invalid("forward: initial ensemble dimension mismatch");
  if (control.control_dim != model.control_dim) fail_invalid("forward: control dimension mismatch");
  if (control.intervals() != grid.steps)
    fail_invalid("forward: control partition does not match the time grid");
  for (const Vec& u : control.values)
    if (!model.control_box.contains(u)) fail_invalid("forward: control leaves the admissible box");

  TrajectoryBundle traj;
  traj.grid = grid;
  traj.method = method;
  traj.states.reserve(static_cast<size_t>(grid.steps) + 1);
  traj.states.push_back(initial);

  const double h = grid.dt();
  State s{initial.positions(), initial.masses()};
  const std::vector<double>& w = initial.weights();

  for (int m = 0; m < grid.steps; ++m) {
    const double t = grid.node(m);
    const Vec& u = control.values[static_cast<size_t>(m)];
    if (method == Integrator::euler) {
      State k1 = eval_rhs(model, t, u, w, s, m);
      s = advance(s, k1, h);
    } else {
      State k1 = eval_rhs(model, t, u, w, s, m);
      State k2 = eval_rhs(model, t + 0.5 * h, u, w, advance(s, k1, 0.5 * h), m);
      State k3 = eval_rhs(model, t + 0.5 * h, u, w, advance(s, k2, 0.5 * h), m);
      State k4 = eval_rhs(model, t + h, u, w, advance(s, k3, h), m);
      for (size_t i = 0; i < s.x.size(); ++i)
        s.x[i] += h / 6.0 * (k1.x[i] + 2.0 * k2.x[i] + 2.0 * k3.x[i] + k4.x[i]);
      for (size_t i = 0; i < s.y.size(); ++i)
        s.y[i] += h / 6.0 * (k1.y[i] + 2.0 * k2.y[i] + 2.0 * k3.y[i] + k4.y[i]);
    }
    require_finite(s, m);
    for (size_t k = 0; k < s.y.size(); ++k)
      if (!(s.y[k] >= 0.0))
        fail_numeric("forward: mass coordinate left [0,inf) at step " + std::to_string(m));
    traj.states.emplace_back(model.dim, s.x, s.y, w);
  }
  return traj;
}

double terminal_cost(const Model& model, const TrajectoryBundle& traj) {
  return model.cost(traj.measure_at(traj.grid.steps));
}

std::vector<double> mass_curve(const TrajectoryBundle& traj) {
  std::vector<double> out;
  out.reserve(traj.states.size());
  for (const LiftedEnsemble& e : traj.states) {
    double mass = 0.0;
    for (int k = 0; k < e.size(); ++k) mass += e.weight(k) * e.mass(k);
    out.push_back(mass);
  }
  return out;
}

std::vector<double> weak_form_residual(const Model& model, const ControlSignal& control,
                                       const TrajectoryBundle& traj,
                                       const std::function<double(const Vec&)>& phi,
                                       const std::function<RowVec(const Vec&)>& grad_phi) {
  if (control.intervals() != traj.grid.steps)
    fail_invalid("weak_form_residual: control partition does not match the trajectory");
  const double h = traj.grid.dt();
  const int n = traj.states.front().dim();

  auto pairing = [&](const LiftedEnsemble& e) {
    double acc = 0.0;
    for (int k = 0; k < e.size(); ++k) acc += e.weight(k) * e.mass(k) * phi(Vec(e.position(k)));
    return acc;
  };

  std::vector<double> out;
  out.reserve(static_cast<size_t>(traj.grid.steps));
  for (int m = 0; m < traj.grid.steps; ++m) {
    const LiftedEnsemble& a = traj.at(m);
    const LiftedEnsemble& b = traj.at(m + 1);
    const double lhs = (pairing(b) - pairing(a)) / h;

    std::vector<double> xm(a.positions().size()), ym(static_cast<size_t>(a.size()));
    for (size_t i = 0; i < xm.size(); ++i) xm[i] = 0.5 * (a.positions()[i] + b.positions()[i]);
    for (size_t i = 0; i < ym.size(); ++i) ym[i] = 0.5 * (a.masses()[i] + b.masses()[i]);
    LiftedEnsemble mid(n, std::move(xm), std::move(ym), a.weights());
    ParticleMeasure mu = barycentric_projection(mid);
    const double t = traj.grid.node(m) + 0.5 * h;
    const Vec& u = control.values[static_cast<size_t>(m)];

    double rhs = 0.0;
    for (int k = 0; k < mid.size(); ++k) {
      Vec x = mid.position(k);
      rhs += mid.weight(k) * mid.mass(k) *
             (grad_phi(x).dot(model.drift(t, u, mu, x)) + phi(x) * model.source(t, u, mu, x));
    }
    out.push_back(std::abs(lhs - rhs));
  }
  return out;
}

} // namespace nbc
