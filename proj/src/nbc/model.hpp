#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nbc/measure.hpp"

namespace nbc {

// Compact box of admissible control values.
struct ControlBox {
  Vec lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Vec& u, double tol = 1e-12) const;
  Vec clip(const Vec& u) const;
  Vec midpoint() const { return 0.5 * (lo + hi); }
};

// Controlled nonlocal dynamics
//   drift  F(t, u, mu, x) in R^n   (velocity field)
//   source G(t, u, mu, x) in R     (mass growth rate)
// together with the terminal cost and every derivative the adjoint system
// needs. Measure-derivative callbacks take the perturbation location as the
// trailing argument x_prime: flat kernels evaluate
//   dF/dmu(t, u, mu, x, x_prime) = lim [F(t,u,mu+eps*delta_{x_prime},x)-F(t,u,mu,x)]/eps,
// and intrinsic kernels are their x_prime-gradients.
struct Model {
  std::string name;
  int dim = 1;         // state space dimension n
  int control_dim = 1; // control dimension m
  ControlBox control_box;
  double sublinear_bound = 1.0; // C with |F| <= C(1+mass), |G| <= C on the sampled sets
  bool control_affine = false;  // Hamiltonian affine in u (enables bang classification)

  std::function<Vec(double, const Vec&, const ParticleMeasure&, const Vec&)> drift;
  std::function<double(double, const Vec&, const ParticleMeasure&, const Vec&)> source;

  // state derivatives: Jacobian D_x F (n x n), gradient of G (row, 1 x n)
  std::function<Mat(double, const Vec&, const ParticleMeasure&, const Vec&)> drift_dx;
  std::function<RowVec(double, const Vec&, const ParticleMeasure&, const Vec&)> source_dx;

  // measure derivatives: flat kernels and their intrinsic (x_prime) gradients
  std::function<Vec(double, const Vec&, const ParticleMeasure&, const Vec&, const Vec&)> drift_dmu_flat;
  std::function<Mat(double, const Vec&, const ParticleMeasure&, const Vec&, const Vec&)> drift_dmu; // n x n
  std::function<double(double, const Vec&, const ParticleMeasure&, const Vec&, const Vec&)> source_dmu_flat;
  std::function<RowVec(double, const Vec&, const ParticleMeasure&, const Vec&, const Vec&)> source_dmu;

  // control derivatives (optional; required by gradient methods): D_u F (n x m), D_u G (1 x m)
  std::function<Mat(double, const Vec&, const ParticleMeasure&, const Vec&)> drift_du;
  std::function<RowVec(double, const Vec&, const ParticleMeasure&, const Vec&)> source_du;

  // terminal cost, its flat derivative and intrinsic gradient
  std::function<double(const ParticleMeasure&)> cost;
  std::function<double(const ParticleMeasure&, const Vec&)> cost_flat;
  std::function<RowVec(const ParticleMeasure&, const Vec&)> cost_grad;

  bool has_control_derivatives() const { return static_cast<bool>(drift_du) && static_cast<bool>(source_du); }
  void require_complete() const; // throws if a mandatory callback is missing
};

// min (1/2) int x^2 dmu_T subject to dx = u dt, dy = -u y dt, u in [-1, 1]
Model builtin_scalar_benchmark();

struct OpinionParams {
  int dim = 1;
  double attraction = 1.0;  // scale of the alignment kernel psi(z) = attraction*z*exp(-decay*|z|^2)
  double decay = 0.0;
  double exchange = 0.0;    // scale of the skew-symmetric mass exchange S(x,y) = exchange*sum(y-x)
  bool control_drift = false; // adds u to the velocity field (control_dim = dim)
  double control_lo = -1.0;
  double control_hi = 1.0;
};

// nonlocal alignment dynamics with optional skew-symmetric mass exchange and
// terminal cost (1/2) int |x|^2 dmu
Model builtin_opinion_dynamics(const OpinionParams& params = {});

// scalar functional of a measure with its claimed flat derivative kernel and
// (optionally) the intrinsic gradient
struct MeasureFunctional {
  std::function<double(const ParticleMeasure&)> value;
  std::function<double(const ParticleMeasure&, const Vec&)> flat;
  std::function<RowVec(const ParticleMeasure&, const Vec&)> grad;
};

struct DerivativeReport {
  std::vector<double> steps;      // probe step sizes t
  std::vector<double> quotients;  // difference quotients [Q(mu+t(nu-mu))-Q(mu)]/t
  double limit = 0.0;             // Richardson extrapolation of the quotients
  double reference = 0.0;         // claimed value int flat d(nu - mu)
  double discrepancy = 0.0;       // |limit - reference| / (1 + |reference|)
  bool passed = false;
};

// Verifies the flat-derivative limit of Q at mu along the segment toward nu.
DerivativeReport check_flat_derivative(const MeasureFunctional& Q, const ParticleMeasure& mu,
                                       const ParticleMeasure& nu, double tol = 1e-6);

struct LiftedDerivativeReport {
  double flat_discrepancy = 0.0;     // lifted flat derivative vs y * flat(beta(rho), x)
  double gradient_discrepancy = 0.0; // lifted gradient vs [y * grad, flat] by finite differences
  bool passed = false;
};

// Verifies that Q lifted through the barycentric projection, Q_hat(rho) =
// Q(beta(rho)), has flat derivative y * dQ/dmu(beta(rho), x) and gradient
// [y * grad_mu Q, dQ/dmu] at the atoms of e. Requires Q.grad.
LiftedDerivativeReport check_lifted_derivative(const MeasureFunctional& Q, const LiftedEnsemble& e,
                                               double tol = 1e-6);

struct AssumptionReport {
  double worst_growth_ratio = 0.0; // max over samples of |F|/(C(1+mass)) and |G|/C
  double lipschitz_x = 0.0;        // worst observed quotient |F(x)-F(x')| / |x-x'| (and G)
  double lipschitz_mu = 0.0;       // worst observed quotient over flat_norm(mu - mu')
  bool bounds_hold = false;        // worst_growth_ratio <= 1
  int samples = 0;
};

struct SampleBounds {
  double radius = 5.0;    // support points drawn from [-radius, radius]^n
  double mass_cap = 4.0;  // atom masses drawn from (0, mass_cap / atoms]
  int max_atoms = 8;
  int samples = 200;
  double horizon = 1.0;
  std::uint64_t seed = 1;
};

// Randomized audit of the sublinearity bounds |G| <= C, |F| <= C(1+mass) for
// the declared constant C, plus empirical local Lipschitz constants in x and
// in mu (flat metric), all inside the declared sampling box. Sampling can
// refute the bounds but never certify them.
AssumptionReport check_assumptions(const Model& model, const SampleBounds& bounds = {});

} // namespace nbc
