#pragma once

#include <functional>
#include <vector>

#include "nbc/model.hpp"

namespace nbc {

// uniform grid 0 = t_0 < ... < t_M = horizon
struct TimeGrid {
  double horizon = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double horizon_, int steps_) : horizon(horizon_), steps(steps_) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) fail_invalid("time grid: horizon must be positive");
    if (steps < 1) fail_invalid("time grid: need at least one step");
  }
  double dt() const { return horizon / steps; }
  double node(int m) const { return m == steps ? horizon : m * dt(); }
};

// piecewise-constant control: value m applies on [t_m, t_{m+1})
struct ControlSignal {
  int control_dim = 1;
  std::vector<Vec> values;

  static ControlSignal constant(const Vec& u, int intervals);
  int intervals() const { return static_cast<int>(values.size()); }
};

enum class Integrator { euler, rk4 };

Integrator integrator_from_name(const std::string& name);
const char* integrator_name(Integrator method);

// node states of the characteristic system dx = F dt, dy = y G dt
struct TrajectoryBundle {
  TimeGrid grid;
  Integrator method = Integrator::rk4;
  std::vector<LiftedEnsemble> states; // steps + 1 entries

  const LiftedEnsemble& at(int node) const;
  ParticleMeasure measure_at(int node) const { return barycentric_projection(at(node)); }
};

// particle discretization with w_k = theta_k / mass, y_k = mass, so the
// projection reproduces theta
LiftedEnsemble discretize_initial(const ParticleMeasure& theta);

// a-priori support radius bound R0 + (C(1+sup mass) + C sup y) T from the
// declared sublinearity constant
double support_bound(const Model& model, const LiftedEnsemble& initial, double horizon);

TrajectoryBundle integrate_forward(const Model& model, const ControlSignal& control,
                                   const LiftedEnsemble& initial, const TimeGrid& grid,
                                   Integrator method);

double terminal_cost(const Model& model, const TrajectoryBundle& traj);

// per-node total mass of the projected measure
std::vector<double> mass_curve(const TrajectoryBundle& traj);

// midpoint-quadrature defect of d/dt <mu_t, phi> = <mu_t, grad phi . F + phi G>
// over each step; second order in the step size for smooth phi
std::vector<double> weak_form_residual(const Model& model, const ControlSignal& control,
                                       const TrajectoryBundle& traj,
                                       const std::function<double(const Vec&)>& phi,
                                       const std::function<RowVec(const Vec&)>& grad_phi);

} // namespace nbc
