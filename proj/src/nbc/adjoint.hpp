#pragma once

#include "nbc/forward.hpp"

namespace nbc {

// node costates paired with a forward trajectory: p (N x n, rows are momenta
// of the position coordinates) and q (N, momenta of the mass coordinates)
struct CostateBundle {
  std::vector<Mat> p; // steps + 1 entries
  std::vector<Vec> q;

  int nodes() const { return static_cast<int>(p.size()); }
};

// transversality at the terminal node: p_k = -y_k grad cost, q_k = -flat cost
std::pair<Mat, Vec> terminal_costate(const Model& model, const LiftedEnsemble& terminal);

// backward sweep of the costate system matched to the forward scheme; forward
// node states are interpolated linearly at interior stage times
CostateBundle integrate_adjoint_backward(const Model& model, const ControlSignal& control,
                                         const TrajectoryBundle& traj);

// momenta as measures: psi_i = sum_k w_k p_{k,i} delta_{x_k} per state
// coordinate, xi = sum_k w_k y_k q_k delta_{x_k}
struct AdjointMeasures {
  std::vector<SignedParticleMeasure> psi;
  SignedParticleMeasure xi;
};

AdjointMeasures adjoint_measures_at(const TrajectoryBundle& traj, const CostateBundle& costates,
                                    int node);

// H = sum_k w_k (p_k . F + q_k y_k G), the particle form of the lifted
// Hamiltonian
double hamiltonian_from_costates(const Model& model, double t, const Vec& u,
                                 const LiftedEnsemble& state, const Mat& p, const Vec& q);

// the same value paired as sum_i <psi_i, F_i> + <xi, G>
double hamiltonian_from_adjoint_measures(const Model& model, double t, const Vec& u,
                                         const AdjointMeasures& adj, const ParticleMeasure& mu);

// d/du of the node Hamiltonian (row vector); requires control derivatives
RowVec hamiltonian_control_derivative(const Model& model, double t, const Vec& u,
                                      const LiftedEnsemble& state, const Mat& p, const Vec& q);

// gradient of the terminal cost with respect to each control interval value,
// evaluated at interval midpoints: dJ/du_m = -h dH/du
std::vector<RowVec> control_gradient(const Model& model, const ControlSignal& control,
                                     const TrajectoryBundle& traj, const CostateBundle& costates);

// axis-aligned grid over the control box, points_per_dim per axis (a single
// point lands on the midpoint), ordered lexicographically
std::vector<Vec> control_grid(const ControlBox& box, int points_per_dim);

// max over nodes of (max over candidates of H) - H(u_m); candidates are the
// grid values plus the applied control, so the residual is nonnegative and
// vanishes exactly at grid-maximizing controls
double pmp_residual(const Model& model, const ControlSignal& control, const TrajectoryBundle& traj,
                    const CostateBundle& costates, const std::vector<Vec>& candidates);

} // namespace nbc
