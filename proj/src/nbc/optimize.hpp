#pragma once

#include <optional>
#include <string>

#include "nbc/adjoint.hpp"

namespace nbc {

enum class OptimizerMethod { msa, projected_gradient };

OptimizerMethod optimizer_method_from_name(const std::string& name);
const char* optimizer_method_name(OptimizerMethod method);

struct OptimizerConfig {
  OptimizerMethod method = OptimizerMethod::msa;
  int max_iters = 50;
  double residual_tol = 1e-8;
  double cost_tol = 1e-10;
  double damping = 1.0;   // MSA relaxation u <- (1-damping) u + damping argmax
  int u_grid = 101;       // Hamiltonian maximization grid per control axis
  double armijo_alpha0 = 1.0;
  double armijo_shrink = 0.5;
  double armijo_c1 = 1e-4;
  double min_step = 1e-12;
  std::optional<Vec> initial; // starting control value, default box midpoint

  void validate(const Model& model) const;
};

struct IterateRecord {
  int iter = 0;
  double cost = 0.0;
  double residual = 0.0;
};

struct BangCandidate {
  Vec value;
  double cost = 0.0;
  double residual = 0.0;
  bool extremal = false;
};

enum class ExtremalClass { bang, singular, non_extremal, unsupported };
const char* extremal_class_name(ExtremalClass c);

struct OptimizationReport {
  OptimizerMethod method = OptimizerMethod::msa;
  std::vector<IterateRecord> iterations;
  std::string reason; // residual-tolerance | cost-stall | stalled | max-iterations | bang-candidate
  bool converged = false;
  ControlSignal final_control;
  double final_cost = 0.0;
  double final_residual = 0.0;
  std::vector<BangCandidate> candidates; // box-vertex controls compared by cost
  ExtremalClass classification = ExtremalClass::unsupported;
  bool degenerate_hamiltonian = false; // an argmax step hit an (up to tolerance) flat Hamiltonian
  double wall_time_s = 0.0;
};

// one forward-backward pass followed by the damped pointwise Hamiltonian
// maximization over the control grid (ties to the lexicographically smallest
// grid value); sets *degenerate when some node Hamiltonian is flat across the
// whole grid
ControlSignal msa_sweep(const Model& model, const ControlSignal& u, const ParticleMeasure& theta,
                        const TimeGrid& grid, const OptimizerConfig& config, Integrator method,
                        bool* degenerate = nullptr);

struct GradientStep {
  ControlSignal control;
  double step = 0.0;     // accepted Armijo step size (0 when stalled)
  bool accepted = false;
  double cost_before = 0.0;
  double cost_after = 0.0;
};

// projected gradient descent step with Armijo backtracking on the true cost
GradientStep projected_gradient_step(const Model& model, const ControlSignal& u,
                                     const ParticleMeasure& theta, const TimeGrid& grid,
                                     const OptimizerConfig& config, Integrator method);

OptimizationReport optimize(const Model& model, const ParticleMeasure& theta, const TimeGrid& grid,
                            const OptimizerConfig& config, Integrator method);

// switching-function classification for scalar affine-in-u models: sigma_m =
// dH/du at each node; bang if |sigma| > tol everywhere with u at the matching
// box face, singular if sigma vanishes somewhere (and u matches elsewhere),
// non-extremal otherwise
ExtremalClass classify_extremal(const Model& model, const ControlSignal& u,
                                const TrajectoryBundle& traj, const CostateBundle& costates,
                                double tol = 1e-6);

} // namespace nbc
