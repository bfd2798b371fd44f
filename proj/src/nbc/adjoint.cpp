#include "nbc/adjoint.hpp"

#include <cmath>
#include <string>

namespace nbc {

std::pair<Mat, Vec> terminal_costate(const Model& model, const LiftedEnsemble& terminal) {
  const ParticleMeasure mu = barycentric_projection(terminal);
  const int N = terminal.size();
  Mat p(N, model.dim);
  Vec q(N);
  for (int k = 0; k < N; ++k) {
    Vec x = terminal.position(k);
    p.row(k) = -terminal.mass(k) * model.cost_grad(mu, x);
    q[k] = -model.cost_flat(mu, x);
  }
  return {std::move(p), std::move(q)};
}

namespace {

struct Costate {
  Mat p;
  Vec q;
};

// right-hand side of the costate system at a frozen forward state:
//   dp_k = -p_k DxF(x_k) - q_k y_k dG(x_k) - y_k sum_j w_j [p_j DmuF(x_j,x_k) + q_j y_j dmuG(x_j,x_k)]
//   dq_k = -q_k G(x_k) - sum_j w_j [p_j . dF/dmu(x_j,x_k) + q_j y_j dG/dmu(x_j,x_k)]
Costate costate_rhs(const Model& model, double t, const Vec& u, const LiftedEnsemble& state,
                    const Costate& c) {
  const int N = state.size();
  const int n = model.dim;
  const ParticleMeasure mu = barycentric_projection(state);

  Costate d{Mat(N, n), Vec(N)};
  for (int k = 0; k < N; ++k) {
    Vec xk = state.position(k);
    RowVec nonlocal_p = RowVec::Zero(n);
    double nonlocal_q = 0.0;
    for (int j = 0; j < N; ++j) {
      Vec xj = state.position(j);
      const double wj = state.weight(j);
      const double yq = c.q[j] * state.mass(j);
      nonlocal_p += wj * (c.p.row(j) * model.drift_dmu(t, u, mu, xj, xk) +
                          yq * model.source_dmu(t, u, mu, xj, xk));
      nonlocal_q += wj * (c.p.row(j).dot(model.drift_dmu_flat(t, u, mu, xj, xk)) +
                          yq * model.source_dmu_flat(t, u, mu, xj, xk));
    }
    d.p.row(k) = -c.p.row(k) * model.drift_dx(t, u, mu, xk) -
                 c.q[k] * state.mass(k) * model.source_dx(t, u, mu, xk) -
                 state.mass(k) * nonlocal_p;
    d.q[k] = -c.q[k] * model.source(t, u, mu, xk) - nonlocal_q;
  }
  return d;
}

LiftedEnsemble interpolate(const LiftedEnsemble& a, const LiftedEnsemble& b) {
  std::vector<double> x(a.positions().size()), y(static_cast<size_t>(a.size()));
  for (size_t i = 0; i < x.size(); ++i) x[i] = 0.5 * (a.positions()[i] + b.positions()[i]);
  for (size_t i = 0; i < y.size(); ++i) y[i] = 0.5 * (a.masses()[i] + b.masses()[i]);
  return {a.dim(), std::move(x), std::move(y), a.weights()};
}

void require_finite(const Costate& c, int step) {
  if (!c.p.allFinite() || !c.q.allFinite())
    fail_numeric("adjoint: non-finite costate at step " + std::to_string(step));
}

} // namespace

CostateBundle integrate_adjoint_backward(const Model& model, const ControlSignal& control,
                                         const TrajectoryBundle& traj) {
  model.require_complete();
  if (control.intervals() != traj.grid.steps)
    fail_invalid("adjoint: control partition does not match the trajectory");
  if (control.control_dim != model.control_dim) fail_invalid("adjoint: control dimension mismatch");
  if (static_cast<int>(traj.states.size()) != traj.grid.steps + 1)
    fail_invalid("adjoint: trajectory is missing node states");

  const int M = traj.grid.steps;
  const double h = traj.grid.dt();

  CostateBundle out;
  out.p.resize(static_cast<size_t>(M) + 1);
  out.q.resize(static_cast<size_t>(M) + 1);
  auto [pT, qT] = terminal_costate(model, traj.at(M));
  Costate c{std::move(pT), std::move(qT)};
  out.p[static_cast<size_t>(M)] = c.p;
  out.q[static_cast<size_t>(M)] = c.q;

  for (int m = M - 1; m >= 0; --m) {
    const double t0 = traj.grid.node(m);
    const double t1 = traj.grid.node(m + 1);
    const Vec& u = control.values[static_cast<size_t>(m)];
    const LiftedEnsemble& s0 = traj.at(m);
    const LiftedEnsemble& s1 = traj.at(m + 1);

    if (traj.method == Integrator::euler) {
      Costate k1 = costate_rhs(model, t1, u, s1, c);
      c.p -= h * k1.p;
      c.q -= h * k1.q;
    } else {
      const LiftedEnsemble mid = interpolate(s0, s1);
      const double tm = 0.5 * (t0 + t1);
      Costate k1 = costate_rhs(model, t1, u, s1, c);
      Costate k2 = costate_rhs(model, tm, u, mid, {c.p - 0.5 * h * k1.p, c.q - 0.5 * h * k1.q});
      Costate k3 = costate_rhs(model, tm, u, mid, {c.p - 0.5 * h * k2.p, c.q - 0.5 * h * k2.q});
      Costate k4 = costate_rhs(model, t0, u, s0, {c.p - h * k3.p, c.q - h * k3.q});
      c.p -= h / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
      c.q -= h / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
    }
    require_finite(c, m);
    out.p[static_cast<size_t>(m)] = c.p;
    out.q[static_cast<size_t>(m)] = c.q;
  }
  return out;
}

AdjointMeasures adjoint_measures_at(const TrajectoryBundle& traj, const CostateBundle& costates,
                                    int node) {
  const LiftedEnsemble& e = traj.at(node);
  if (costates.nodes() != static_cast<int>(traj.states.size()))
    fail_invalid("adjoint measures: costates do not match the trajectory");
  const Mat& p = costates.p[static_cast<size_t>(node)];
  const Vec& q = costates.q[static_cast<size_t>(node)];
  const int n = e.dim();

  AdjointMeasures out;
  out.psi.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<double> w(static_cast<size_t>(e.size()));
    for (int k = 0; k < e.size(); ++k) w[static_cast<size_t>(k)] = e.weight(k) * p(k, i);
    out.psi.emplace_back(n, e.positions(), std::move(w));
  }
  std::vector<double> w(static_cast<size_t>(e.size()));
  for (int k = 0; k < e.size(); ++k) w[static_cast<size_t>(k)] = e.weight(k) * e.mass(k) * q[k];
  out.xi = SignedParticleMeasure(n, e.positions(), std::move(w));
  return out;
}

double hamiltonian_from_costates(const Model& model, double t, const Vec& u,
                                 const LiftedEnsemble& state, const Mat& p, const Vec& q) {
  const ParticleMeasure mu = barycentric_projection(state);
  double acc = 0.0;
  for (int k = 0; k < state.size(); ++k) {
    Vec x = state.position(k);
    acc += state.weight(k) * (p.row(k).dot(model.drift(t, u, mu, x)) +
                              q[k] * state.mass(k) * model.source(t, u, mu, x));
  }
  return acc;
}

double hamiltonian_from_adjoint_measures(const Model& model, double t, const Vec& u,
                                         const AdjointMeasures& adj, const ParticleMeasure& mu) {
  if (adj.psi.empty()) fail_invalid("hamiltonian: empty adjoint measures");
  const int N = adj.xi.size();
  const int n = static_cast<int>(adj.psi.size());
  Mat drift_vals(N, n);
  Vec source_vals(N);
  for (int k = 0; k < N; ++k) {
    Vec x = adj.xi.point(k);
    drift_vals.row(k) = model.drift(t, u, mu, x).transpose();
    source_vals[k] = model.source(t, u, mu, x);
  }
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double pairing = 0.0;
    for (int k = 0; k < N; ++k) pairing += adj.psi[static_cast<size_t>(i)].weight(k) * drift_vals(k, i);
    acc += pairing;
  }
  double pairing = 0.0;
  for (int k = 0; k < N; ++k) pairing += adj.xi.weight(k) * source_vals[k];
  return acc + pairing;
}

RowVec hamiltonian_control_derivative(const Model& model, double t, const Vec& u,
                                      const LiftedEnsemble& state, const Mat& p, const Vec& q) {
  if (!model.has_control_derivatives())
    fail_invalid("hamiltonian derivative: model lacks control derivatives");
  const ParticleMeasure mu = barycentric_projection(state);
  RowVec g = RowVec::Zero(model.control_dim);
  for (int k = 0; k < state.size(); ++k) {
    Vec x = state.position(k);
    g += state.weight(k) * (p.row(k) * model.drift_du(t, u, mu, x) +
                            q[k] * state.mass(k) * model.source_du(t, u, mu, x));
  }
  return g;
}

std::vector<RowVec> control_gradient(const Model& model, const ControlSignal& control,
                                     const TrajectoryBundle& traj, const CostateBundle& costates) {
  if (costates.nodes() != static_cast<int>(traj.states.size()))
    fail_invalid("control_gradient: costates do not match the trajectory");
  if (control.intervals() != traj.grid.steps)
    fail_invalid("control_gradient: control partition does not match the trajectory");
  const double h = traj.grid.dt();

  std::vector<RowVec> grad;
  grad.reserve(static_cast<size_t>(traj.grid.steps));
  for (int m = 0; m < traj.grid.steps; ++m) {
    LiftedEnsemble mid = interpolate(traj.at(m), traj.at(m + 1));
    Mat p = 0.5 * (costates.p[static_cast<size_t>(m)] + costates.p[static_cast<size_t>(m) + 1]);
    Vec q = 0.5 * (costates.q[static_cast<size_t>(m)] + costates.q[static_cast<size_t>(m) + 1]);
    const double t = traj.grid.node(m) + 0.5 * h;
    grad.push_back(-h * hamiltonian_control_derivative(model, t, control.values[static_cast<size_t>(m)],
                                                       mid, p, q));
  }
  return grad;
}

std::vector<Vec> control_grid(const ControlBox& box, int points_per_dim) {
  if (points_per_dim < 1) fail_invalid("control grid: need at least one point per axis");
  const int m = box.dim();
  double count = 1.0;
  for (int i = 0; i < m; ++i) count *= points_per_dim;
  if (count > 1e6) fail_invalid("control grid: too many grid points");

  std::vector<Vec> grid;
  grid.reserve(static_cast<size_t>(count));
  Vec u = box.lo;
  std::vector<int> idx(static_cast<size_t>(m), 0);
  while (true) {
    for (int i = 0; i < m; ++i)
      u[i] = points_per_dim == 1
                 ? 0.5 * (box.lo[i] + box.hi[i])
                 : box.lo[i] + idx[static_cast<size_t>(i)] * (box.hi[i] - box.lo[i]) /
                                   (points_per_dim - 1);
    grid.push_back(u);
    int d = m - 1;
    while (d >= 0 && ++idx[static_cast<size_t>(d)] == points_per_dim) {
      idx[static_cast<size_t>(d)] = 0;
      --d;
    }
    if (d < 0) break;
  }
  return grid;
}

double pmp_residual(const Model& model, const ControlSignal& control, const TrajectoryBundle& traj,
                    const CostateBundle& costates, const std::vector<Vec>& candidates) {
  if (costates.nodes() != static_cast<int>(traj.states.size()))
    fail_invalid("pmp_residual: costates do not match the trajectory");
  if (control.intervals() != traj.grid.steps)
    fail_invalid("pmp_residual: control partition does not match the trajectory");

  double worst = 0.0;
  for (int m = 0; m < traj.grid.steps; ++m) {
    const LiftedEnsemble& state = traj.at(m);
    const Mat& p = costates.p[static_cast<size_t>(m)];
    const Vec& q = costates.q[static_cast<size_t>(m)];
    const double t = traj.grid.node(m);
    const double applied =
        hamiltonian_from_costates(model, t, control.values[static_cast<size_t>(m)], state, p, q);
    double best = applied;
    for (const Vec& v : candidates)
      best = std::max(best, hamiltonian_from_costates(model, t, v, state, p, q));
    worst = std::max(worst, best - applied);
  }
  return worst;
}

} // namespace nbc
