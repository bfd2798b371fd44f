#include "nbc/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace nbc {

OptimizerMethod optimizer_method_from_name(const std::string& name) {
  if (name == "msa") return OptimizerMethod::msa;
  if (name == "projected-gradient") return OptimizerMethod::projected_gradient;
  fail_invalid("unknown optimizer method '" + name + "' (expected msa or projected-gradient)");
}

const char* optimizer_method_name(OptimizerMethod method) {
  return method == OptimizerMethod::msa ? "msa" : "projected-gradient";
}

const char* extremal_class_name(ExtremalClass c) {
  switch (c) {
    case ExtremalClass::bang: return "bang";
    case ExtremalClass::singular: return "singular";
    case ExtremalClass::non_extremal: return "non-extremal";
    default: return "unsupported";
  }
}

void OptimizerConfig::validate(const Model& model) const {
  if (max_iters < 1) fail_invalid("optimizer: max_iters must be positive");
  if (!(residual_tol > 0.0) || !(cost_tol > 0.0)) fail_invalid("optimizer: tolerances must be positive");
  if (!(damping > 0.0) || damping > 1.0) fail_invalid("optimizer: damping must lie in (0,1]");
  if (u_grid < 2) fail_invalid("optimizer: u_grid must be at least 2");
  if (!(armijo_alpha0 > 0.0) || !(armijo_shrink > 0.0) || armijo_shrink >= 1.0 ||
      !(armijo_c1 > 0.0) || !(min_step > 0.0))
    fail_invalid("optimizer: bad Armijo parameters");
  if (initial && !model.control_box.contains(*initial))
    fail_invalid("optimizer: initial control outside the admissible box");
  if (method == OptimizerMethod::projected_gradient && !model.has_control_derivatives())
    fail_invalid("optimizer: projected gradient requires control derivatives");
}

ControlSignal msa_sweep(const Model& model, const ControlSignal& u, const ParticleMeasure& theta,
                        const TimeGrid& grid, const OptimizerConfig& config, Integrator method,
                        bool* degenerate) {
  config.validate(model);
  const LiftedEnsemble e0 = discretize_initial(theta);
  const TrajectoryBundle traj = integrate_forward(model, u, e0, grid, method);
  const CostateBundle costates = integrate_adjoint_backward(model, u, traj);
  const std::vector<Vec> candidates = control_grid(model.control_box, config.u_grid);

  if (degenerate) *degenerate = false;
  ControlSignal out = u;
  for (int m = 0; m < grid.steps; ++m) {
    const LiftedEnsemble& state = traj.at(m);
    const Mat& p = costates.p[static_cast<size_t>(m)];
    const Vec& q = costates.q[static_cast<size_t>(m)];
    const double t = grid.node(m);

    double best = -std::numeric_limits<double>::infinity();
    double worst = std::numeric_limits<double>::infinity();
    Vec arg = candidates.front();
    for (const Vec& v : candidates) {
      double h = hamiltonian_from_costates(model, t, v, state, p, q);
      if (h > best) {
        best = h;
        arg = v;
      }
      worst = std::min(worst, h);
    }
    if (degenerate && best - worst <= 1e-12 * (1.0 + std::abs(best))) *degenerate = true;
    out.values[static_cast<size_t>(m)] =
        (1.0 - config.damping) * out.values[static_cast<size_t>(m)] + config.damping * arg;
  }
  return out;
}

GradientStep projected_gradient_step(const Model& model, const ControlSignal& u,
                                     const ParticleMeasure& theta, const TimeGrid& grid,
                                     const OptimizerConfig& config, Integrator method) {
  config.validate(model);
  if (!model.has_control_derivatives())
    fail_invalid("projected gradient: model lacks control derivatives");
  const LiftedEnsemble e0 = discretize_initial(theta);
  const TrajectoryBundle traj = integrate_forward(model, u, e0, grid, method);
  const CostateBundle costates = integrate_adjoint_backward(model, u, traj);
  const std::vector<RowVec> g = control_gradient(model, u, traj, costates);

  GradientStep result;
  result.control = u;
  result.cost_before = terminal_cost(model, traj);
  result.cost_after = result.cost_before;

  for (double alpha = config.armijo_alpha0; alpha >= config.min_step;
       alpha *= config.armijo_shrink) {
    ControlSignal trial = u;
    double move2 = 0.0;
    for (int m = 0; m < grid.steps; ++m) {
      Vec v = model.control_box.clip(u.values[static_cast<size_t>(m)] -
                                     alpha * g[static_cast<size_t>(m)].transpose());
      move2 += (v - u.values[static_cast<size_t>(m)]).squaredNorm();
      trial.values[static_cast<size_t>(m)] = v;
    }
    if (move2 == 0.0) break; // projected direction vanished: stationary on the box
    const double cost =
        terminal_cost(model, integrate_forward(model, trial, e0, grid, method));
    if (cost <= result.cost_before - config.armijo_c1 / alpha * move2) {
      result.control = std::move(trial);
      result.step = alpha;
      result.accepted = true;
      result.cost_after = cost;
      break;
    }
  }
  return result;
}

namespace {

std::vector<Vec> box_vertices(const ControlBox& box) {
  const int m = box.dim();
  if (m > 3) return {};
  std::vector<Vec> out;
  for (int mask = 0; mask < (1 << m); ++mask) {
    Vec v(m);
    for (int i = 0; i < m; ++i) v[i] = (mask >> i & 1) ? box.hi[i] : box.lo[i];
    out.push_back(std::move(v));
  }
  std::sort(out.begin(), out.end(), [](const Vec& a, const Vec& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                        b.data() + b.size());
  });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const Vec& a, const Vec& b) {
                          return std::equal(a.data(), a.data() + a.size(), b.data(),
                                            b.data() + b.size());
                        }),
            out.end());
  return out;
}

} // namespace

OptimizationReport optimize(const Model& model, const ParticleMeasure& theta, const TimeGrid& grid,
                            const OptimizerConfig& config, Integrator method) {
  const auto t_start = std::chrono::steady_clock::now();
  model.require_complete();
  config.validate(model);

  const LiftedEnsemble e0 = discretize_initial(theta);
  const std::vector<Vec> grid_candidates = control_grid(model.control_box, config.u_grid);

  OptimizationReport rep;
  rep.method = config.method;

  ControlSignal u =
      ControlSignal::constant(config.initial.value_or(model.control_box.midpoint()), grid.steps);

  TrajectoryBundle traj;
  CostateBundle costates;
  double prev_cost = 0.0;
  for (int iter = 1;; ++iter) {
    traj = integrate_forward(model, u, e0, grid, method);
    costates = integrate_adjoint_backward(model, u, traj);
    const double cost = terminal_cost(model, traj);
    const double residual = pmp_residual(model, u, traj, costates, grid_candidates);
    rep.iterations.push_back({iter, cost, residual});

    if (residual <= config.residual_tol) {
      rep.reason = "residual-tolerance";
      rep.converged = true;
      break;
    }
    if (iter > 1 && std::abs(cost - prev_cost) <= config.cost_tol * (1.0 + std::abs(cost))) {
      rep.reason = "cost-stall";
      rep.converged = true;
      break;
    }
    prev_cost = cost;
    if (iter == config.max_iters) {
      rep.reason = "max-iterations";
      rep.converged = false;
      break;
    }

    if (config.method == OptimizerMethod::msa) {
      bool degenerate = false;
      u = msa_sweep(model, u, theta, grid, config, method, &degenerate);
      rep.degenerate_hamiltonian = rep.degenerate_hamiltonian || degenerate;
    } else {
      GradientStep step = projected_gradient_step(model, u, theta, grid, config, method);
      if (!step.accepted) {
        rep.reason = "stalled";
        rep.converged = true;
        break;
      }
      u = std::move(step.control);
    }
  }

  rep.final_control = u;
  rep.final_cost = rep.iterations.back().cost;
  rep.final_residual = rep.iterations.back().residual;

  // candidate adjudication: when several box-vertex controls are extremal,
  // compare their costs directly and adopt a strictly better one
  if (model.control_affine) {
    const double extremal_tol = std::max(config.residual_tol, 1e-8);
    for (const Vec& v : box_vertices(model.control_box)) {
      ControlSignal cu = ControlSignal::constant(v, grid.steps);
      TrajectoryBundle ct = integrate_forward(model, cu, e0, grid, method);
      CostateBundle cc = integrate_adjoint_backward(model, cu, ct);
      BangCandidate cand;
      cand.value = v;
      cand.cost = terminal_cost(model, ct);
      cand.residual = pmp_residual(model, cu, ct, cc, grid_candidates);
      cand.extremal = cand.residual <= extremal_tol;
      rep.candidates.push_back(std::move(cand));
    }
    int best = -1;
    for (int i = 0; i < static_cast<int>(rep.candidates.size()); ++i) {
      const BangCandidate& c = rep.candidates[static_cast<size_t>(i)];
      if (c.extremal && (best < 0 || c.cost < rep.candidates[static_cast<size_t>(best)].cost))
        best = i;
    }
    if (best >= 0) {
      const BangCandidate& c = rep.candidates[static_cast<size_t>(best)];
      if (c.cost < rep.final_cost - 1e-12 * (1.0 + std::abs(rep.final_cost))) {
        u = ControlSignal::constant(c.value, grid.steps);
        traj = integrate_forward(model, u, e0, grid, method);
        costates = integrate_adjoint_backward(model, u, traj);
        rep.final_control = u;
        rep.final_cost = c.cost;
        rep.final_residual = c.residual;
        rep.reason = "bang-candidate";
        rep.converged = true;
      }
    }
  }

  rep.classification = classify_extremal(model, rep.final_control, traj, costates);
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rep;
}

ExtremalClass classify_extremal(const Model& model, const ControlSignal& u,
                                const TrajectoryBundle& traj, const CostateBundle& costates,
                                double tol) {
  if (model.control_dim != 1 || !model.control_affine || !model.has_control_derivatives())
    return ExtremalClass::unsupported;
  if (u.intervals() != traj.grid.steps || costates.nodes() != static_cast<int>(traj.states.size()))
    fail_invalid("classify_extremal: control/trajectory/costate mismatch");

  bool singular = false;
  for (int m = 0; m < traj.grid.steps; ++m) {
    const double sigma =
        hamiltonian_control_derivative(model, traj.grid.node(m), u.values[static_cast<size_t>(m)],
                                       traj.at(m), costates.p[static_cast<size_t>(m)],
                                       costates.q[static_cast<size_t>(m)])[0];
    if (std::abs(sigma) <= tol) {
      singular = true;
      continue;
    }
    const double face = sigma > 0.0 ? model.control_box.hi[0] : model.control_box.lo[0];
    if (std::abs(u.values[static_cast<size_t>(m)][0] - face) > 1e-6 * (1.0 + std::abs(face)))
      return ExtremalClass::non_extremal;
  }
  return singular ? ExtremalClass::singular : ExtremalClass::bang;
}

} // namespace nbc
