#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "nbc/optimize.hpp"

using nbc::ControlSignal;
using nbc::ExtremalClass;
using nbc::Integrator;
using nbc::Model;
using nbc::OptimizationReport;
using nbc::OptimizerConfig;
using nbc::OptimizerMethod;
using nbc::ParticleMeasure;
using nbc::RowVec;
using nbc::TimeGrid;
using nbc::Vec;

namespace {

Vec scalar(double v) {
  Vec u(1);
  u[0] = v;
  return u;
}

bool all_values_equal(const ControlSignal& u, double v, double tol = 0.0) {
  for (const Vec& x : u.values)
    if (std::abs(x[0] - v) > tol) return false;
  return true;
}

} // namespace

TEST_CASE("msa recovers the optimal bang control from a Dirac at 2") {
  Model m = nbc::builtin_scalar_benchmark();
  OptimizerConfig cfg; // msa, midpoint start
  OptimizationReport rep = nbc::optimize(m, ParticleMeasure(1, {2.0}, {1.0}), TimeGrid(1.0, 100),
                                         cfg, Integrator::rk4);

  // the midpoint start u = 0 freezes the state, the Hamiltonian is flat there
  // and the residual vanishes; the box-vertex comparison then finds the
  // strictly better bang control
  CHECK(rep.converged);
  CHECK(rep.reason == "bang-candidate");
  REQUIRE(!rep.iterations.empty());
  CHECK(rep.iterations.front().cost == 2.0); // u = 0 leaves the Dirac at 2 with unit mass
  CHECK(all_values_equal(rep.final_control, -1.0));
  CHECK(rep.final_cost == doctest::Approx(0.5 * std::exp(1.0)).epsilon(1e-9));
  CHECK(rep.final_residual <= 1e-10);
  CHECK(rep.classification == ExtremalClass::bang);

  REQUIRE(rep.candidates.size() == 2);
  CHECK(rep.candidates[0].value[0] == -1.0);
  CHECK(rep.candidates[0].cost == doctest::Approx(0.5 * std::exp(1.0)).epsilon(1e-9));
  CHECK(rep.candidates[0].extremal);
  CHECK(rep.candidates[1].value[0] == 1.0);
  CHECK(rep.candidates[1].cost == doctest::Approx(4.5 * std::exp(-1.0)).epsilon(1e-9));
  CHECK(rep.candidates[1].extremal); // locally extremal, just more expensive
}

TEST_CASE("msa drives the two-atom initial condition to u = +1") {
  Model m = nbc::builtin_scalar_benchmark();
  OptimizerConfig cfg;
  OptimizationReport rep = nbc::optimize(m, ParticleMeasure(1, {0.0, 4.0}, {0.5, 0.5}),
                                         TimeGrid(1.0, 100), cfg, Integrator::rk4);
  CHECK(rep.converged);
  CHECK(static_cast<int>(rep.iterations.size()) <= 5);
  CHECK(all_values_equal(rep.final_control, 1.0));
  CHECK(rep.final_cost == doctest::Approx(13.0 / (2.0 * std::exp(1.0))).epsilon(1e-9));
  CHECK(rep.final_residual <= 1e-10);
  CHECK(rep.classification == ExtremalClass::bang);
  CHECK_FALSE(rep.degenerate_hamiltonian);
}

TEST_CASE("vertex comparison rescues msa from the dearer extremal basin") {
  // starting at u = 0.5, the sweep locks onto u = +1 (extremal but more
  // expensive from a Dirac at 2); the candidate pass must switch to -1
  Model m = nbc::builtin_scalar_benchmark();
  OptimizerConfig cfg;
  cfg.initial = scalar(0.5);
  OptimizationReport rep = nbc::optimize(m, ParticleMeasure(1, {2.0}, {1.0}), TimeGrid(1.0, 100),
                                         cfg, Integrator::rk4);
  CHECK(rep.converged);
  CHECK(rep.reason == "bang-candidate");
  CHECK(all_values_equal(rep.final_control, -1.0));
  CHECK(rep.final_cost == doctest::Approx(0.5 * std::exp(1.0)).epsilon(1e-9));
}

TEST_CASE("projected gradient descends from rest") {
  Model m = nbc::builtin_scalar_benchmark();
  ParticleMeasure theta(1, {3.0}, {1.0});
  TimeGrid grid(1.0, 100);

  // frozen state x = 3, y = 1 gives sigma = 1.5, so dJ/da along constant
  // controls is -1.5 at a = 0 and the first step moves toward +1
  ControlSignal u0 = ControlSignal::constant(scalar(0.0), grid.steps);
  {
    nbc::TrajectoryBundle traj =
        nbc::integrate_forward(m, u0, nbc::discretize_initial(theta), grid, Integrator::rk4);
    nbc::CostateBundle costates = nbc::integrate_adjoint_backward(m, u0, traj);
    std::vector<RowVec> g = nbc::control_gradient(m, u0, traj, costates);
    double dJda = 0.0;
    for (const RowVec& row : g) dJda += row[0];
    CHECK(dJda == doctest::Approx(-1.5).epsilon(1e-12));
  }

  OptimizerConfig cfg;
  cfg.method = OptimizerMethod::projected_gradient;
  nbc::GradientStep step = nbc::projected_gradient_step(m, u0, theta, grid, cfg, Integrator::rk4);
  CHECK(step.accepted);
  CHECK(step.step == 1.0);
  CHECK(step.cost_before == 4.5);
  CHECK(step.cost_after < step.cost_before);
  for (const Vec& v : step.control.values) CHECK(v[0] == doctest::Approx(0.015).epsilon(1e-12));

  // a large initial step lets the line search jump straight onto the face
  cfg.armijo_alpha0 = 100.0;
  OptimizationReport rep = nbc::optimize(m, theta, grid, cfg, Integrator::rk4);
  CHECK(rep.converged);
  CHECK(all_values_equal(rep.final_control, 1.0));
  CHECK(rep.final_cost == doctest::Approx(8.0 * std::exp(-1.0)).epsilon(1e-9));
  for (size_t i = 1; i < rep.iterations.size(); ++i)
    CHECK(rep.iterations[i].cost <= rep.iterations[i - 1].cost + 1e-12);
}

TEST_CASE("a singleton control box converges in one iterate") {
  Model m = nbc::builtin_scalar_benchmark();
  m.control_box.lo = Vec::Constant(1, 0.3);
  m.control_box.hi = Vec::Constant(1, 0.3);
  OptimizerConfig cfg;
  OptimizationReport rep = nbc::optimize(m, ParticleMeasure(1, {2.0}, {1.0}), TimeGrid(1.0, 100),
                                         cfg, Integrator::rk4);
  CHECK(rep.converged);
  CHECK(rep.reason == "residual-tolerance");
  CHECK(rep.iterations.size() == 1);
  CHECK(all_values_equal(rep.final_control, 0.3));
  CHECK(rep.final_cost == doctest::Approx(0.5 * 2.3 * 2.3 * std::exp(-0.3)).epsilon(1e-9));
  CHECK(rep.candidates.size() == 1); // the two vertices coincide
}

TEST_CASE("zero terminal cost converges immediately at zero") {
  Model m = nbc::builtin_scalar_benchmark();
  m.cost = [](const ParticleMeasure&) { return 0.0; };
  m.cost_flat = [](const ParticleMeasure&, const Vec&) { return 0.0; };
  m.cost_grad = [](const ParticleMeasure&, const Vec& x) { return RowVec(RowVec::Zero(x.size())); };

  ParticleMeasure theta(1, {1.0, -0.5}, {0.5, 0.5});
  OptimizerConfig cfg;
  OptimizationReport rep =
      nbc::optimize(m, theta, TimeGrid(1.0, 50), cfg, Integrator::rk4);
  CHECK(rep.converged);
  CHECK(rep.iterations.size() == 1);
  CHECK(rep.final_cost == 0.0);
  CHECK(rep.final_residual == 0.0);

  // a direct sweep sees the flat Hamiltonian and ties to the smallest grid value
  bool degenerate = false;
  ControlSignal swept = nbc::msa_sweep(m, ControlSignal::constant(scalar(0.2), 50), theta,
                                       TimeGrid(1.0, 50), cfg, Integrator::rk4, &degenerate);
  CHECK(degenerate);
  CHECK(all_values_equal(swept, -1.0));
}

TEST_CASE("msa damping relaxes toward the argmax") {
  Model m = nbc::builtin_scalar_benchmark();
  OptimizerConfig cfg;
  cfg.damping = 0.5;
  ParticleMeasure theta(1, {0.0, 4.0}, {0.5, 0.5}); // argmax is +1 from u = 0
  ControlSignal swept = nbc::msa_sweep(m, ControlSignal::constant(scalar(0.0), 40), theta,
                                       TimeGrid(1.0, 40), cfg, Integrator::rk4);
  CHECK(all_values_equal(swept, 0.5));
}

TEST_CASE("iteration cap reports non-convergence") {
  nbc::OpinionParams par;
  par.dim = 2;
  par.attraction = 0.8;
  par.decay = 0.5;
  par.exchange = 0.4;
  par.control_drift = true;
  Model m = nbc::builtin_opinion_dynamics(par);

  ParticleMeasure theta(2, {0.6, -0.4, -1.1, 0.8, 0.3, 1.2}, {0.5, 0.8, 0.7});
  OptimizerConfig cfg;
  cfg.method = OptimizerMethod::projected_gradient;
  cfg.max_iters = 2;
  OptimizationReport rep = nbc::optimize(m, theta, TimeGrid(1.0, 50), cfg, Integrator::rk4);
  CHECK_FALSE(rep.converged);
  CHECK(rep.reason == "max-iterations");
  CHECK(rep.iterations.size() == 2);
  CHECK(rep.final_control.intervals() == 50);
  for (const Vec& v : rep.final_control.values) CHECK(m.control_box.contains(v));
  CHECK(rep.wall_time_s >= 0.0);
}

TEST_CASE("switching-function classification") {
  Model m = nbc::builtin_scalar_benchmark();
  TimeGrid grid(1.0, 60);

  auto classify = [&](const Model& model, double x0, double uval) {
    ControlSignal u = ControlSignal::constant(scalar(uval), grid.steps);
    nbc::TrajectoryBundle traj = nbc::integrate_forward(
        model, u, nbc::discretize_initial(ParticleMeasure(1, {x0}, {1.0})), grid,
        Integrator::rk4);
    nbc::CostateBundle costates = nbc::integrate_adjoint_backward(model, u, traj);
    return nbc::classify_extremal(model, u, traj, costates);
  };

  CHECK(classify(m, 2.0, -1.0) == ExtremalClass::bang);
  CHECK(classify(m, 3.0, 1.0) == ExtremalClass::bang);
  CHECK(classify(m, 2.0, 0.0) == ExtremalClass::singular); // sigma vanishes identically
  CHECK(classify(m, 3.0, 0.0) == ExtremalClass::non_extremal);

  Model blind = m;
  blind.drift_du = nullptr;
  blind.source_du = nullptr;
  CHECK(classify(blind, 2.0, -1.0) == ExtremalClass::unsupported);

  CHECK(std::string(nbc::extremal_class_name(ExtremalClass::bang)) == "bang");
  CHECK(std::string(nbc::extremal_class_name(ExtremalClass::singular)) == "singular");
  CHECK(std::string(nbc::extremal_class_name(ExtremalClass::non_extremal)) == "non-extremal");
  CHECK(std::string(nbc::extremal_class_name(ExtremalClass::unsupported)) == "unsupported");
}

TEST_CASE("optimizer configuration is validated") {
  Model m = nbc::builtin_scalar_benchmark();
  auto expect_invalid = [&](OptimizerConfig cfg) {
    CHECK_THROWS_AS(cfg.validate(m), nbc::Error);
  };

  OptimizerConfig bad;
  bad.max_iters = 0;
  expect_invalid(bad);
  bad = {};
  bad.residual_tol = 0.0;
  expect_invalid(bad);
  bad = {};
  bad.damping = 0.0;
  expect_invalid(bad);
  bad = {};
  bad.damping = 1.5;
  expect_invalid(bad);
  bad = {};
  bad.u_grid = 1;
  expect_invalid(bad);
  bad = {};
  bad.armijo_shrink = 1.0;
  expect_invalid(bad);
  bad = {};
  bad.initial = scalar(2.0); // outside [-1, 1]
  expect_invalid(bad);

  Model blind = m;
  blind.drift_du = nullptr;
  blind.source_du = nullptr;
  OptimizerConfig pg;
  pg.method = OptimizerMethod::projected_gradient;
  CHECK_THROWS_AS(pg.validate(blind), nbc::Error);

  CHECK(nbc::optimizer_method_from_name("msa") == OptimizerMethod::msa);
  CHECK(nbc::optimizer_method_from_name("projected-gradient") ==
        OptimizerMethod::projected_gradient);
  CHECK_THROWS_AS(nbc::optimizer_method_from_name("newton"), nbc::Error);
  CHECK(std::string(nbc::optimizer_method_name(OptimizerMethod::msa)) == "msa");
}
