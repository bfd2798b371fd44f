#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nbc/adjoint.hpp"

using nbc::ControlSignal;
using nbc::CostateBundle;
using nbc::Integrator;
using nbc::LiftedEnsemble;
using nbc::Mat;
using nbc::Model;
using nbc::ParticleMeasure;
using nbc::RowVec;
using nbc::TimeGrid;
using nbc::TrajectoryBundle;
using nbc::Vec;

namespace {

Vec scalar(double v) {
  Vec u(1);
  u[0] = v;
  return u;
}

struct Setup {
  TrajectoryBundle traj;
  CostateBundle costates;
  ControlSignal control;
};

Setup solve(const Model& m, const ParticleMeasure& theta, const ControlSignal& u, double T,
            int steps) {
  Setup s;
  s.control = u;
  s.traj = nbc::integrate_forward(m, u, nbc::discretize_initial(theta), TimeGrid(T, steps),
                                  Integrator::rk4);
  s.costates = nbc::integrate_adjoint_backward(m, u, s.traj);
  return s;
}

} // namespace

TEST_CASE("benchmark costates match the closed form") {
  // From a unit Dirac at 2 under u = -1: x = 2 - t, y = e^t. The position
  // momentum stays constant at -e and the mass momentum is -e^(1-t)/2.
  Model m = nbc::builtin_scalar_benchmark();
  const int M = 200;
  Setup s = solve(m, ParticleMeasure(1, {2.0}, {1.0}), ControlSignal::constant(scalar(-1.0), M),
                  1.0, M);
  REQUIRE(s.costates.nodes() == M + 1);

  const double e1 = std::exp(1.0);
  for (int node = 0; node <= M; ++node) {
    const double t = s.traj.grid.node(node);
    CHECK(s.costates.p[static_cast<size_t>(node)](0, 0) == doctest::Approx(-e1).epsilon(1e-10));
    CHECK(s.costates.q[static_cast<size_t>(node)][0] ==
          doctest::Approx(-0.5 * std::exp(1.0 - t)).epsilon(1e-10));
  }

  // momenta as measures: psi(R) = -e at every node, xi(R) = -e/2 constant
  for (int node : {0, M / 2, M}) {
    nbc::AdjointMeasures adj = nbc::adjoint_measures_at(s.traj, s.costates, node);
    REQUIRE(adj.psi.size() == 1);
    CHECK(adj.psi[0].total_mass() == doctest::Approx(-e1).epsilon(1e-10));
    CHECK(adj.xi.total_mass() == doctest::Approx(-0.5 * e1).epsilon(1e-10));
  }

  // H(v) = v (p - q y) = -v e/2, so dH/du = -e/2 throughout
  const LiftedEnsemble& st = s.traj.at(0);
  const Mat& p0 = s.costates.p.front();
  const Vec& q0 = s.costates.q.front();
  for (double v : {-1.0, 0.0, 0.5, 1.0})
    CHECK(nbc::hamiltonian_from_costates(m, 0.0, scalar(v), st, p0, q0) ==
          doctest::Approx(-v * 0.5 * e1).epsilon(1e-9));
  RowVec dH = nbc::hamiltonian_control_derivative(m, 0.0, scalar(-1.0), st, p0, q0);
  CHECK(dH[0] == doctest::Approx(-0.5 * e1).epsilon(1e-9));
}

TEST_CASE("the two hamiltonian pairings agree") {
  nbc::OpinionParams par;
  par.dim = 2;
  par.attraction = 0.8;
  par.decay = 0.5;
  par.exchange = 0.6;
  par.control_drift = true;
  Model m = nbc::builtin_opinion_dynamics(par);

  ParticleMeasure theta(2, {0.4, -0.9, 1.3, 0.2, -0.5, 1.1, 0.0, -1.4}, {0.6, 1.1, 0.4, 0.9});
  const int M = 60;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  ControlSignal u;
  u.control_dim = m.control_dim;
  for (int i = 0; i < M; ++i) {
    Vec v(m.control_dim);
    for (int c = 0; c < m.control_dim; ++c) v[c] = uni(rng);
    u.values.push_back(v);
  }
  Setup s = solve(m, theta, u, 1.0, M);

  std::vector<Vec> grid = nbc::control_grid(m.control_box, 3);
  for (int node : {0, 17, 30, 60}) {
    nbc::AdjointMeasures adj = nbc::adjoint_measures_at(s.traj, s.costates, node);
    ParticleMeasure mu = s.traj.measure_at(node);
    const double t = s.traj.grid.node(node);
    const LiftedEnsemble& st = s.traj.at(node);
    const Mat& p = s.costates.p[static_cast<size_t>(node)];
    const Vec& q = s.costates.q[static_cast<size_t>(node)];
    for (const Vec& v : grid) {
      const double h1 = nbc::hamiltonian_from_costates(m, t, v, st, p, q);
      const double h2 = nbc::hamiltonian_from_adjoint_measures(m, t, v, adj, mu);
      CHECK(std::abs(h1 - h2) <= 1e-12 * std::max(1.0, std::abs(h1)));
    }
  }
}

TEST_CASE("control gradient matches finite differences") {
  const double delta = 1e-5;

  auto compare = [&](const Model& m, const ParticleMeasure& theta, const ControlSignal& u,
                     int steps) {
    Setup s = solve(m, theta, u, 1.0, steps);
    std::vector<RowVec> grad = nbc::control_gradient(m, s.control, s.traj, s.costates);
    REQUIRE(static_cast<int>(grad.size()) == steps);

    LiftedEnsemble e0 = nbc::discretize_initial(theta);
    TimeGrid grid(1.0, steps);
    auto cost_of = [&](const ControlSignal& v) {
      return nbc::terminal_cost(m, nbc::integrate_forward(m, v, e0, grid, Integrator::rk4));
    };
    for (int interval : {0, steps / 2, steps - 1}) {
      for (int c = 0; c < m.control_dim; ++c) {
        ControlSignal up = u, dn = u;
        up.values[static_cast<size_t>(interval)][c] += delta;
        dn.values[static_cast<size_t>(interval)][c] -= delta;
        const double fd = (cost_of(up) - cost_of(dn)) / (2.0 * delta);
        CHECK(std::abs(grad[static_cast<size_t>(interval)][c] - fd) <= 1e-4);
      }
    }
  };

  Model bench = nbc::builtin_scalar_benchmark();
  compare(bench, ParticleMeasure(1, {0.0, 4.0}, {0.5, 0.5}),
          ControlSignal::constant(scalar(0.3), 50), 50);

  nbc::OpinionParams par;
  par.dim = 2;
  par.attraction = 0.7;
  par.decay = 0.6;
  par.exchange = 0.5;
  par.control_drift = true;
  Model op = nbc::builtin_opinion_dynamics(par);
  Vec base(2);
  base << 0.1, -0.2;
  compare(op, ParticleMeasure(2, {0.5, -0.3, -0.8, 0.9, 0.2, 1.2}, {0.8, 0.7, 0.5}),
          ControlSignal::constant(base, 50), 50);
}

TEST_CASE("costates scale linearly with the terminal cost") {
  Model m = nbc::builtin_scalar_benchmark();
  Model doubled = m;
  doubled.cost = [base = m.cost](const ParticleMeasure& mu) { return 2.0 * base(mu); };
  doubled.cost_flat = [base = m.cost_flat](const ParticleMeasure& mu, const Vec& x) {
    return 2.0 * base(mu, x);
  };
  doubled.cost_grad = [base = m.cost_grad](const ParticleMeasure& mu, const Vec& x) {
    return RowVec(2.0 * base(mu, x));
  };

  ParticleMeasure theta(1, {2.0, -0.5}, {0.75, 0.25});
  ControlSignal u = ControlSignal::constant(scalar(0.4), 40);
  Setup a = solve(m, theta, u, 1.0, 40);
  Setup b = solve(doubled, theta, u, 1.0, 40);

  for (int node = 0; node <= 40; ++node) {
    const Mat& pa = a.costates.p[static_cast<size_t>(node)];
    const Mat& pb = b.costates.p[static_cast<size_t>(node)];
    for (int k = 0; k < pa.rows(); ++k)
      CHECK(pb(k, 0) == doctest::Approx(2.0 * pa(k, 0)).epsilon(1e-13));
    for (int k = 0; k < pa.rows(); ++k)
      CHECK(b.costates.q[static_cast<size_t>(node)][k] ==
            doctest::Approx(2.0 * a.costates.q[static_cast<size_t>(node)][k]).epsilon(1e-13));
  }
  std::vector<RowVec> ga = nbc::control_gradient(m, u, a.traj, a.costates);
  std::vector<RowVec> gb = nbc::control_gradient(doubled, u, b.traj, b.costates);
  for (size_t i = 0; i < ga.size(); ++i)
    CHECK(gb[i][0] == doctest::Approx(2.0 * ga[i][0]).epsilon(1e-13));
}

TEST_CASE("zero terminal cost gives vanishing costates, gradient and residual") {
  Model m = nbc::builtin_scalar_benchmark();
  m.cost = [](const ParticleMeasure&) { return 0.0; };
  m.cost_flat = [](const ParticleMeasure&, const Vec&) { return 0.0; };
  m.cost_grad = [](const ParticleMeasure&, const Vec& x) { return RowVec(RowVec::Zero(x.size())); };

  Setup s = solve(m, ParticleMeasure(1, {1.0, -2.0}, {0.5, 0.5}),
                  ControlSignal::constant(scalar(0.7), 30), 1.0, 30);
  for (int node = 0; node <= 30; ++node) {
    CHECK(s.costates.p[static_cast<size_t>(node)].cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.costates.q[static_cast<size_t>(node)].cwiseAbs().maxCoeff() == 0.0);
  }
  for (const RowVec& g : nbc::control_gradient(m, s.control, s.traj, s.costates))
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
  CHECK(nbc::pmp_residual(m, s.control, s.traj, s.costates,
                          nbc::control_grid(m.control_box, 101)) == 0.0);
}

TEST_CASE("pmp residual separates extremal from non-extremal controls") {
  Model m = nbc::builtin_scalar_benchmark();
  std::vector<Vec> grid = nbc::control_grid(m.control_box, 101);

  // the optimal bang control from a Dirac at 2 maximizes H along its own path
  Setup opt = solve(m, ParticleMeasure(1, {2.0}, {1.0}),
                    ControlSignal::constant(scalar(-1.0), 100), 1.0, 100);
  const double r_opt = nbc::pmp_residual(m, opt.control, opt.traj, opt.costates, grid);
  CHECK(r_opt >= 0.0);
  CHECK(r_opt <= 1e-12);

  // u = 0 from a Dirac at 3 freezes the state at x = 3, y = 1, so the switch
  // function is p - q y = -3 + 4.5 = 1.5 and the defect is H(1) - H(0) = 1.5
  Setup mid = solve(m, ParticleMeasure(1, {3.0}, {1.0}),
                    ControlSignal::constant(scalar(0.0), 100), 1.0, 100);
  const double r_mid = nbc::pmp_residual(m, mid.control, mid.traj, mid.costates, grid);
  CHECK(r_mid == doctest::Approx(1.5).epsilon(1e-10));

  // nonnegativity for arbitrary admissible controls
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    ControlSignal u;
    u.control_dim = 1;
    for (int i = 0; i < 25; ++i) u.values.push_back(scalar(uni(rng)));
    Setup s = solve(m, ParticleMeasure(1, {1.5, -0.5}, {0.5, 0.5}), u, 1.0, 25);
    CHECK(nbc::pmp_residual(m, u, s.traj, s.costates, grid) >= 0.0);
  }
}

TEST_CASE("control grid covers the box") {
  nbc::ControlBox box;
  box.lo = Vec(2);
  box.hi = Vec(2);
  box.lo << -1.0, 0.0;
  box.hi << 1.0, 2.0;

  std::vector<Vec> g1 = nbc::control_grid(box, 1);
  REQUIRE(g1.size() == 1);
  CHECK(g1[0][0] == 0.0); // midpoints
  CHECK(g1[0][1] == 1.0);

  std::vector<Vec> g3 = nbc::control_grid(box, 3);
  REQUIRE(g3.size() == 9);
  // lexicographic, last axis fastest
  CHECK(g3[0][0] == -1.0);
  CHECK(g3[0][1] == 0.0);
  CHECK(g3[1][0] == -1.0);
  CHECK(g3[1][1] == 1.0);
  CHECK(g3[2][1] == 2.0);
  CHECK(g3[3][0] == 0.0);
  CHECK(g3[8][0] == 1.0);
  CHECK(g3[8][1] == 2.0);
  for (const Vec& v : g3) CHECK(box.contains(v));

  CHECK_THROWS_AS(nbc::control_grid(box, 0), nbc::Error);
  CHECK_THROWS_AS(nbc::control_grid(box, 1001), nbc::Error); // 1001^2 > 1e6
}

TEST_CASE("adjoint solve validates its inputs") {
  Model m = nbc::builtin_scalar_benchmark();
  Setup s = solve(m, ParticleMeasure(1, {2.0}, {1.0}), ControlSignal::constant(scalar(0.0), 10),
                  1.0, 10);
  ControlSignal wrong = ControlSignal::constant(scalar(0.0), 9);
  CHECK_THROWS_AS(nbc::integrate_adjoint_backward(m, wrong, s.traj), nbc::Error);
  CHECK_THROWS_AS(nbc::adjoint_measures_at(s.traj, s.costates, 11), nbc::Error);
  CHECK_THROWS_AS(nbc::pmp_residual(m, wrong, s.traj, s.costates,
                                    nbc::control_grid(m.control_box, 3)),
                  nbc::Error);

  Model incomplete = m;
  incomplete.cost_grad = nullptr;
  CHECK_THROWS_AS(nbc::integrate_adjoint_backward(incomplete, s.control, s.traj), nbc::Error);
}
