#pragma once

#include <Eigen/Dense>

namespace nbc {

// Exact minimum cost of the balanced transportation problem
//   min sum_ij c_ij f_ij   s.t.  sum_j f_ij = supply_i, sum_i f_ij = demand_j, f >= 0,
// solved with the transportation simplex (northwest-corner start, MODI pricing,
// Bland fallback against cycling). Supplies and demands must be nonnegative and
// balanced to within 1e-9 relative; the residual is absorbed into the largest
// demand entry so the solve is exactly balanced.
double transport_min_cost(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply,
                          const Eigen::VectorXd& demand);

} // namespace nbc
