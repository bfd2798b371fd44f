#pragma once

#include <string>

#include "nbc/optimize.hpp"

namespace nbc {

// all writers emit '.'-decimal UTF-8 CSV with %.17g numbers, so values
// round-trip bit-exactly through read_*

std::string format_double(double v);

void write_measure_csv(const ParticleMeasure& m, const std::string& path);
ParticleMeasure read_measure_csv(const std::string& path);

// t,u_0..u_{m-1}: one row per control interval, t = interval start
void write_control_csv(const ControlSignal& u, const TimeGrid& grid, const std::string& path);
ControlSignal read_control_csv(const std::string& path);

// t,k,x_0..x_{n-1},y,w: one row per node and particle
void write_trajectory_csv(const TrajectoryBundle& traj, const std::string& path);

// t,mass,mean_0..mean_{n-1},second_moment (mean and second moment mass-normalized)
void write_moments_csv(const TrajectoryBundle& traj, const std::string& path);

// t,mass
void write_mass_csv(const TrajectoryBundle& traj, const std::string& path);

// t,k,p_0..p_{n-1},q
void write_costates_csv(const TrajectoryBundle& traj, const CostateBundle& costates,
                        const std::string& path);

// t,psi_1_total..psi_n_total,xi_total,hamiltonian,residual: per-node adjoint
// measure masses, applied-control Hamiltonian, and grid maximization defect
void write_adjoint_summary_csv(const Model& model, const ControlSignal& control,
                               const TrajectoryBundle& traj, const CostateBundle& costates,
                               int u_grid, const std::string& path);

// iterations [{iter, cost, residual}], candidates, classification, reason;
// excludes wall time so identical runs serialize identically
void write_report_json(const OptimizationReport& report, const std::string& path);

} // namespace nbc
