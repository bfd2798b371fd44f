// Acceptance gate: one pass/fail line per criterion, nonzero exit if any fail.
// Each criterion is self-contained and states its tolerance in the detail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nbc/optimize.hpp"

using nbc::ControlSignal;
using nbc::CostateBundle;
using nbc::Integrator;
using nbc::LiftedEnsemble;
using nbc::Mat;
using nbc::MeasureFunctional;
using nbc::Model;
using nbc::OptimizationReport;
using nbc::OptimizerConfig;
using nbc::ParticleMeasure;
using nbc::RowVec;
using nbc::TimeGrid;
using nbc::TrajectoryBundle;
using nbc::Vec;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Vec scalar(double v) {
  Vec u(1);
  u[0] = v;
  return u;
}

ParticleMeasure dirac1(double x) { return {1, {x}, {1.0}}; }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double max_control_deviation(const ControlSignal& u, double v) {
  double worst = 0.0;
  for (const Vec& x : u.values) worst = std::max(worst, std::abs(x[0] - v));
  return worst;
}

// 1. bang optima of the scalar benchmark: control, cost, runtime
Outcome criterion_benchmark_optima() {
  Model m = nbc::builtin_scalar_benchmark();
  const TimeGrid grid(1.0, 1000);
  struct Case {
    ParticleMeasure theta;
    double u_star;
    double cost_star;
  };
  std::vector<Case> cases;
  cases.push_back({dirac1(2.0), -1.0, 0.5 * std::exp(1.0)});
  cases.push_back({ParticleMeasure(1, {0.0, 4.0}, {0.5, 0.5}), 1.0, 13.0 / (2.0 * std::exp(1.0))});

  Outcome out;
  out.pass = true;
  std::ostringstream detail;
  for (size_t i = 0; i < cases.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    OptimizationReport rep = nbc::optimize(m, cases[i].theta, grid, {}, Integrator::rk4);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double udev = max_control_deviation(rep.final_control, cases[i].u_star);
    const double cgap = std::abs(rep.final_cost - cases[i].cost_star);
    if (!(rep.converged && udev <= 1e-6 && cgap <= 1e-3 && secs <= 10.0)) out.pass = false;
    if (i) detail << "; ";
    detail << "u" << (cases[i].u_star > 0 ? "=+1" : "=-1") << " dev " << sci(udev) << ", cost gap "
           << sci(cgap) << ", " << sci(secs) << " s";
  }
  out.detail = detail.str();
  return out;
}

// 2. bang selection across a family of unit Diracs: when a bang is prescribed
// by extremality of the faces, the optimizer must return it
Outcome criterion_bang_selection() {
  Model m = nbc::builtin_scalar_benchmark();
  const TimeGrid grid(1.0, 500);
  const double e2 = std::exp(2.0);

  Outcome out;
  out.pass = true;
  std::ostringstream detail;
  bool first = true;
  for (double x0 : {0.5, 1.0, 1.5, 2.0, 3.0}) {
    ParticleMeasure theta = dirac1(x0);
    const double mass = theta.total_mass();
    const double m2 = theta.integrate([](const Vec& x) { return x.squaredNorm(); });
    const double m2s = theta.integrate([](const Vec& x) { return (x[0] - 2.0) * (x[0] - 2.0); });
    const bool plus_ok = m2 > mass;   // u = +1 satisfies the maximum condition
    const bool minus_ok = m2s < mass; // u = -1 satisfies the maximum condition

    double expected = 0.0;
    bool prescribed = true;
    if (plus_ok && minus_ok) {
      const double gap =
          theta.integrate([&](const Vec& x) { return e2 * (x[0] - 1.0) * (x[0] - 1.0); }) -
          theta.integrate([](const Vec& x) { return (x[0] + 1.0) * (x[0] + 1.0); });
      expected = gap > 0.0 ? 1.0 : -1.0;
    } else if (plus_ok) {
      expected = 1.0;
    } else if (minus_ok) {
      expected = -1.0;
    } else {
      prescribed = false;
    }

    if (!first) detail << ", ";
    first = false;
    detail << "x0=" << x0 << ":";
    if (!prescribed) {
      detail << "none";
      continue;
    }
    OptimizationReport rep = nbc::optimize(m, theta, grid, {}, Integrator::rk4);
    const double dev = max_control_deviation(rep.final_control, expected);
    const bool ok = rep.converged && dev <= 1e-6;
    if (!ok) out.pass = false;
    detail << (expected > 0 ? "+1" : "-1") << (ok ? " ok" : " MISMATCH");
  }
  out.detail = detail.str();
  return out;
}

// 3. a Dirac initial condition reduces the solver to the scalar characteristic
// ODE; compare against its closed form under a piecewise-constant control
Outcome criterion_dirac_reduction() {
  Model m = nbc::builtin_scalar_benchmark();
  const int M = 1000;
  const TimeGrid grid(1.0, M);
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  ControlSignal u;
  u.control_dim = 1;
  for (int i = 0; i < M; ++i) u.values.push_back(scalar(uni(rng)));

  TrajectoryBundle traj =
      nbc::integrate_forward(m, u, nbc::discretize_initial(dirac1(2.0)), grid, Integrator::rk4);
  double worst = 0.0, acc = 0.0;
  for (int node = 0; node <= M; ++node) {
    const LiftedEnsemble& e = traj.at(node);
    worst = std::max(worst, std::abs(e.position(0)[0] - (2.0 + acc)));
    worst = std::max(worst, std::abs(e.mass(0) - std::exp(-acc)));
    if (node < M) acc += grid.dt() * u.values[static_cast<size_t>(node)][0];
  }
  return {worst <= 1e-8, "max state error " + sci(worst) + " (tol 1e-8)"};
}

// 4. constant source, zero drift: every particle mass gains exactly exp(c T)
Outcome criterion_exponential_mass() {
  Model m = nbc::builtin_scalar_benchmark();
  const double c = 0.7;
  m.drift = [](double, const Vec&, const ParticleMeasure&, const Vec&) {
    return Vec(Vec::Zero(1));
  };
  m.drift_dx = [](double, const Vec&, const ParticleMeasure&, const Vec&) {
    return Mat(Mat::Zero(1, 1));
  };
  m.drift_du = m.drift_dx;
  m.drift_dmu_flat = [](double, const Vec&, const ParticleMeasure&, const Vec&, const Vec&) {
    return Vec(Vec::Zero(1));
  };
  m.drift_dmu = [](double, const Vec&, const ParticleMeasure&, const Vec&, const Vec&) {
    return Mat(Mat::Zero(1, 1));
  };
  m.source = [c](double, const Vec&, const ParticleMeasure&, const Vec&) { return c; };
  m.source_dx = [](double, const Vec&, const ParticleMeasure&, const Vec&) {
    return RowVec(RowVec::Zero(1));
  };
  m.source_du = m.source_dx;
  m.source_dmu_flat = [](double, const Vec&, const ParticleMeasure&, const Vec&, const Vec&) {
    return 0.0;
  };
  m.source_dmu = [](double, const Vec&, const ParticleMeasure&, const Vec&, const Vec&) {
    return RowVec(RowVec::Zero(1));
  };

  ParticleMeasure theta(1, {-1.0, 0.2, 1.7}, {0.25, 0.35, 0.40});
  const TimeGrid grid(1.0, 1000);
  TrajectoryBundle traj =
      nbc::integrate_forward(m, ControlSignal::constant(scalar(0.0), grid.steps),
                             nbc::discretize_initial(theta), grid, Integrator::rk4);
  double worst = 0.0;
  const LiftedEnsemble& final_state = traj.at(grid.steps);
  for (int k = 0; k < final_state.size(); ++k)
    worst = std::max(worst, std::abs(final_state.mass(k) - std::exp(c)));
  return {worst <= 1e-8, "max mass error " + sci(worst) + " (tol 1e-8)"};
}

// 5. skew-symmetric exchange kernel conserves total mass along the flow
Outcome criterion_mass_conservation() {
  nbc::OpinionParams par;
  par.dim = 1;
  par.attraction = 1.0;
  par.decay = 0.0; // alignment kernel reduces to y - x
  par.exchange = 1.0;
  Model m = nbc::builtin_opinion_dynamics(par);

  std::mt19937_64 rng(211);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int N = 64;
  std::vector<double> pts, w;
  for (int k = 0; k < N; ++k) {
    pts.push_back(4.0 * uni(rng) - 2.0);
    w.push_back(0.1 + 0.9 * uni(rng));
  }
  const TimeGrid grid(1.0, 1000); // h = 1e-3
  TrajectoryBundle traj = nbc::integrate_forward(
      m, ControlSignal::constant(Vec::Zero(m.control_dim), grid.steps),
      nbc::discretize_initial(ParticleMeasure(1, pts, w)), grid, Integrator::rk4);
  std::vector<double> mass = nbc::mass_curve(traj);
  double worst = 0.0;
  for (double v : mass) worst = std::max(worst, std::abs(v - mass.front()));
  return {worst <= 1e-6, "max |M(t)-M(0)| = " + sci(worst) + " over 64 particles (tol 1e-6)"};
}

// 6. the particle Hamiltonian and its adjoint-measure pairing agree
Outcome criterion_hamiltonian_equivalence() {
  double worst = 0.0;

  auto probe = [&](const Model& m, const ParticleMeasure& theta, int steps, int ppd,
                   uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    ControlSignal u;
    u.control_dim = m.control_dim;
    for (int i = 0; i < steps; ++i) {
      Vec v(m.control_dim);
      for (int c = 0; c < m.control_dim; ++c)
        v[c] = m.control_box.lo[c] + uni(rng) * (m.control_box.hi[c] - m.control_box.lo[c]);
      u.values.push_back(v);
    }
    TimeGrid grid(1.0, steps);
    TrajectoryBundle traj =
        nbc::integrate_forward(m, u, nbc::discretize_initial(theta), grid, Integrator::rk4);
    CostateBundle costates = nbc::integrate_adjoint_backward(m, u, traj);
    std::vector<Vec> candidates = nbc::control_grid(m.control_box, ppd);
    for (int node = 0; node <= steps; ++node) {
      nbc::AdjointMeasures adj = nbc::adjoint_measures_at(traj, costates, node);
      ParticleMeasure mu = traj.measure_at(node);
      const double t = grid.node(node);
      const LiftedEnsemble& st = traj.at(node);
      const Mat& p = costates.p[static_cast<size_t>(node)];
      const Vec& q = costates.q[static_cast<size_t>(node)];
      std::vector<Vec> all = candidates;
      if (node < steps) all.push_back(u.values[static_cast<size_t>(node)]);
      for (const Vec& v : all) {
        const double h1 = nbc::hamiltonian_from_costates(m, t, v, st, p, q);
        const double h2 = nbc::hamiltonian_from_adjoint_measures(m, t, v, adj, mu);
        worst = std::max(worst, std::abs(h1 - h2) / std::max(1.0, std::abs(h1)));
      }
    }
  };

  probe(nbc::builtin_scalar_benchmark(), ParticleMeasure(1, {2.0, -1.0, 0.5}, {0.5, 0.3, 0.2}),
        100, 11, 5);
  nbc::OpinionParams par;
  par.dim = 2;
  par.attraction = 0.8;
  par.decay = 0.5;
  par.exchange = 0.6;
  par.control_drift = true;
  probe(nbc::builtin_opinion_dynamics(par),
        ParticleMeasure(2, {0.4, -0.9, 1.3, 0.2, -0.5, 1.1, 0.0, -1.4}, {0.6, 1.1, 0.4, 0.9}), 60,
        4, 6);

  return {worst <= 1e-12, "max relative gap " + sci(worst) + " (tol 1e-12)"};
}

// 7. adjoint control gradient against central finite differences
Outcome criterion_adjoint_gradient() {
  const double delta = 1e-5;
  double worst = 0.0;

  auto probe = [&](const Model& m, const ParticleMeasure& theta, const Vec& base, int steps) {
    ControlSignal u = ControlSignal::constant(base, steps);
    LiftedEnsemble e0 = nbc::discretize_initial(theta);
    TimeGrid grid(1.0, steps);
    TrajectoryBundle traj = nbc::integrate_forward(m, u, e0, grid, Integrator::rk4);
    CostateBundle costates = nbc::integrate_adjoint_backward(m, u, traj);
    std::vector<RowVec> grad = nbc::control_gradient(m, u, traj, costates);
    auto cost_of = [&](const ControlSignal& v) {
      return nbc::terminal_cost(m, nbc::integrate_forward(m, v, e0, grid, Integrator::rk4));
    };
    for (int interval : {0, steps / 2, steps - 1}) {
      for (int c = 0; c < m.control_dim; ++c) {
        ControlSignal up = u, dn = u;
        up.values[static_cast<size_t>(interval)][c] += delta;
        dn.values[static_cast<size_t>(interval)][c] -= delta;
        const double fd = (cost_of(up) - cost_of(dn)) / (2.0 * delta);
        const double rel = std::abs(grad[static_cast<size_t>(interval)][c] - fd) /
                           std::max(std::abs(fd), 1e-10);
        worst = std::max(worst, rel);
      }
    }
  };

  probe(nbc::builtin_scalar_benchmark(), ParticleMeasure(1, {0.0, 4.0}, {0.5, 0.5}), scalar(0.3),
        200);
  nbc::OpinionParams par;
  par.dim = 2;
  par.attraction = 0.7;
  par.decay = 0.6;
  par.exchange = 0.5;
  par.control_drift = true;
  Vec base(2);
  base << 0.1, -0.2;
  probe(nbc::builtin_opinion_dynamics(par),
        ParticleMeasure(2, {0.5, -0.3, -0.8, 0.9, 0.2, 1.2, -0.6, -1.0}, {0.8, 0.7, 0.5, 0.4}),
        base, 200);

  return {worst <= 1e-4, "max relative error " + sci(worst) + " (tol 1e-4)"};
}

// 8. flat-derivative limits for the nonlocal source and the terminal cost,
// plus the lifted relation through the barycentric projection
Outcome criterion_derivative_calculus() {
  nbc::OpinionParams par;
  par.dim = 1;
  par.attraction = 0.8;
  par.decay = 0.5;
  par.exchange = 0.7;
  par.control_drift = true;
  Model m = nbc::builtin_opinion_dynamics(par);

  ParticleMeasure mu(1, {0.5, -1.2, 0.9}, {0.7, 1.1, 0.5});
  ParticleMeasure nu(1, {1.4, -0.3, 0.1}, {0.4, 0.9, 1.0});
  const Vec u0 = m.control_box.midpoint();
  const Vec xhat = scalar(0.4);

  MeasureFunctional source_at;
  source_at.value = [&m, u0, xhat](const ParticleMeasure& rho) {
    return m.source(0.0, u0, rho, xhat);
  };
  source_at.flat = [&m, u0, xhat](const ParticleMeasure& rho, const Vec& xp) {
    return m.source_dmu_flat(0.0, u0, rho, xhat, xp);
  };
  nbc::DerivativeReport g_rep = nbc::check_flat_derivative(source_at, mu, nu, 1e-6);

  MeasureFunctional cost_fn;
  cost_fn.value = m.cost;
  cost_fn.flat = m.cost_flat;
  cost_fn.grad = m.cost_grad;
  nbc::DerivativeReport c_rep = nbc::check_flat_derivative(cost_fn, mu, nu, 1e-6);

  LiftedEnsemble e(1, {0.5, -1.2, 0.9}, {0.8, 1.3, 0.6}, {0.3, 0.45, 0.25});
  nbc::LiftedDerivativeReport l_rep = nbc::check_lifted_derivative(cost_fn, e, 1e-6);

  const bool pass = g_rep.passed && c_rep.passed && l_rep.passed;
  return {pass, "source " + sci(g_rep.discrepancy) + ", cost " + sci(c_rep.discrepancy) +
                    ", lifted " +
                    sci(std::max(l_rep.flat_discrepancy, l_rep.gradient_discrepancy)) +
                    " (tol 1e-6)"};
}

// 9. the barycentric projection is 2b-Lipschitz from W2 on lifted ensembles
// with masses in [0, b] to the flat norm
Outcome criterion_projection_lipschitz() {
  std::mt19937_64 rng(421);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double worst_excess = -1.0;
  int violations = 0;

  for (double b : {1.0, 2.0, 4.0}) {
    for (int rep = 0; rep < 200; ++rep) {
      const int dim = rep % 2 ? 2 : 1;
      auto sample = [&]() {
        const int atoms = 2 + static_cast<int>(uni(rng) * 3.0);
        std::vector<double> x, y, w;
        double wsum = 0.0;
        for (int k = 0; k < atoms; ++k) {
          for (int i = 0; i < dim; ++i) x.push_back(4.0 * uni(rng) - 2.0);
          y.push_back(b * uni(rng));
          const double wk = 0.1 + uni(rng);
          w.push_back(wk);
          wsum += wk;
        }
        for (double& wk : w) wk /= wsum;
        return LiftedEnsemble(dim, std::move(x), std::move(y), std::move(w));
      };
      LiftedEnsemble e = sample(), f = sample();
      const double lhs =
          nbc::flat_norm(nbc::measure_difference(nbc::barycentric_projection(e),
                                                 nbc::barycentric_projection(f)));
      const double rhs =
          2.0 * b * nbc::w2_distance(nbc::product_cloud(e), nbc::product_cloud(f)) + 1e-9;
      worst_excess = std::max(worst_excess, lhs - rhs);
      if (lhs > rhs) ++violations;
    }
  }
  return {violations == 0, std::to_string(violations) + " violations in 600 pairs, worst slack " +
                               sci(-worst_excess)};
}

// 10. Richardson ratios for the integrators and the weak-form defect
Outcome criterion_convergence_orders() {
  Model m = nbc::builtin_scalar_benchmark();

  auto state_error = [&](Integrator method, int steps) {
    TimeGrid grid(1.0, steps);
    TrajectoryBundle traj =
        nbc::integrate_forward(m, ControlSignal::constant(scalar(1.0), steps),
                               nbc::discretize_initial(dirac1(0.0)), grid, method);
    const LiftedEnsemble& e = traj.at(steps);
    return std::max(std::abs(e.position(0)[0] - 1.0), std::abs(e.mass(0) - std::exp(-1.0)));
  };

  nbc::OpinionParams par;
  par.dim = 1;
  par.attraction = 0.8;
  par.decay = 0.5;
  par.exchange = 0.3;
  Model op = nbc::builtin_opinion_dynamics(par);
  LiftedEnsemble e0 =
      nbc::discretize_initial(ParticleMeasure(1, {0.5, -1.2, 0.9}, {0.7, 1.1, 0.5}));
  auto weak_residual = [&](int steps) {
    TimeGrid grid(0.5, steps); // h = 1e-2, 5e-3, 2.5e-3 at steps 50, 100, 200
    ControlSignal u = ControlSignal::constant(Vec::Zero(op.control_dim), steps);
    TrajectoryBundle traj = nbc::integrate_forward(op, u, e0, grid, Integrator::rk4);
    std::vector<double> r = nbc::weak_form_residual(
        op, u, traj, [](const Vec& x) { return x.squaredNorm(); },
        [](const Vec& x) { return RowVec(2.0 * x.transpose()); });
    double worst = 0.0;
    for (double v : r) worst = std::max(worst, v);
    return worst;
  };

  bool pass = true;
  std::ostringstream detail;
  detail << "ratios";
  for (int steps : {100, 200}) { // h and h/2 with h in {1e-2, 5e-3}
    const double re = state_error(Integrator::euler, steps) /
                      state_error(Integrator::euler, 2 * steps);
    const double r4 =
        state_error(Integrator::rk4, steps) / state_error(Integrator::rk4, 2 * steps);
    if (!(re >= 1.6 && re <= 2.4 && r4 >= 12.8 && r4 <= 19.2)) pass = false;
    detail << " euler " << sci(re) << " rk4 " << sci(r4);
  }
  for (int steps : {50, 100}) {
    const double rw = weak_residual(steps) / weak_residual(2 * steps);
    if (!(rw >= 3.2 && rw <= 4.8)) pass = false;
    detail << " weak " << sci(rw);
  }
  return {pass, detail.str() + " (20% bands)"};
}

// 11. the Hamiltonian-maximization defect separates extremal bang controls
// from the frozen control u = 0 started at a unit Dirac at 2
Outcome criterion_residual_discrimination() {
  Model m = nbc::builtin_scalar_benchmark();
  const TimeGrid grid(1.0, 1000);
  const std::vector<Vec> candidates = nbc::control_grid(m.control_box, 101);

  auto residual_of = [&](const ParticleMeasure& theta, double uval) {
    ControlSignal u = ControlSignal::constant(scalar(uval), grid.steps);
    TrajectoryBundle traj =
        nbc::integrate_forward(m, u, nbc::discretize_initial(theta), grid, Integrator::rk4);
    CostateBundle costates = nbc::integrate_adjoint_backward(m, u, traj);
    return nbc::pmp_residual(m, u, traj, costates, candidates);
  };

  const double r_bang_minus = residual_of(dirac1(2.0), -1.0);
  const double r_bang_plus = residual_of(ParticleMeasure(1, {0.0, 4.0}, {0.5, 0.5}), 1.0);
  const double r_zero = residual_of(dirac1(2.0), 0.0);

  const bool bangs_ok = r_bang_minus <= 1e-8 && r_bang_plus <= 1e-8;
  const bool zero_ok = r_zero >= 1e-3;
  std::string detail = "bang residuals " + sci(r_bang_minus) + " / " + sci(r_bang_plus) +
                       " (tol 1e-8); residual at u=0 from the Dirac at 2 is " + sci(r_zero) +
                       ", demanded >= 1e-3";
  if (!zero_ok)
    detail += " -- unreachable: that control freezes the state and its switch function "
              "vanishes identically, so the Hamiltonian is flat and the defect is exactly 0";
  return {bangs_ok && zero_ok, detail};
}

} // namespace

int main() {
  struct Entry {
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Entry> entries = {
      {"benchmark bang optima, costs and runtime", criterion_benchmark_optima},
      {"bang selection across the Dirac family", criterion_bang_selection},
      {"Dirac reduction to the characteristic ODE", criterion_dirac_reduction},
      {"exponential mass law", criterion_exponential_mass},
      {"mass conservation under skew exchange", criterion_mass_conservation},
      {"Hamiltonian pairing equivalence", criterion_hamiltonian_equivalence},
      {"adjoint gradient vs finite differences", criterion_adjoint_gradient},
      {"flat and lifted derivative calculus", criterion_derivative_calculus},
      {"projection Lipschitz bound", criterion_projection_lipschitz},
      {"integrator convergence orders", criterion_convergence_orders},
      {"PMP residual discrimination", criterion_residual_discrimination},
  };

  int passed = 0;
  for (size_t i = 0; i < entries.size(); ++i) {
    Outcome o;
    try {
      o = entries[i].fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (o.pass) ++passed;
    std::printf("criterion %2zu %-44s %s  (%s)\n", i + 1, entries[i].name,
                o.pass ? "PASS" : "FAIL", o.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", passed, entries.size());
  return passed == static_cast<int>(entries.size()) ? 0 : 1;
}
