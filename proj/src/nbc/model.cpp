#include "nbc/model.hpp"

#include <cmath>
#include <random>

namespace nbc {

bool ControlBox::contains(const Vec& u, double tol) const {
  if (u.size() != lo.size()) return false;
  for (int i = 0; i < u.size(); ++i)
    if (u[i] < lo[i] - tol || u[i] > hi[i] + tol) return false;
  return true;
}

Vec ControlBox::clip(const Vec& u) const {
  return u.cwiseMax(lo).cwiseMin(hi);
}

void Model::require_complete() const {
  if (dim < 1 || control_dim < 1) fail_invalid("model: dimensions must be positive");
  if (control_box.lo.size() != control_dim || control_box.hi.size() != control_dim)
    fail_invalid("model: control box dimension mismatch");
  if ((control_box.hi - control_box.lo).minCoeff() < 0.0)
    fail_invalid("model: empty control box");
  if (!(drift && source && drift_dx && source_dx && drift_dmu_flat && drift_dmu &&
        source_dmu_flat && source_dmu && cost && cost_flat && cost_grad))
    fail_invalid("model: missing a required callback");
}

Model builtin_scalar_benchmark() {
  Model m;
  m.name = "scalar-benchmark";
  m.dim = 1;
  m.control_dim = 1;
  m.control_box = {Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)};
  m.sublinear_bound = 1.0;
  m.control_affine = true;

  m.drift = [](double, const Vec& u, const ParticleMeasure&, const Vec&) { return u; };
  m.source = [](double, const Vec& u, const ParticleMeasure&, const Vec&) { return -u[0]; };
  m.drift_dx = [](double, const Vec&, const ParticleMeasure&, const Vec&) { return Mat::Zero(1, 1); };
  m.source_dx = [](double, const Vec&, const ParticleMeasure&, const Vec&) { return RowVec::Zero(1); };
  m.drift_dmu_flat = [](double, const Vec&, const ParticleMeasure&, const Vec&, const Vec&) {
    return Vec::Zero(1);
  };
  m.drift_dmu = [](double, const Vec&, const ParticleMeasure&, const Vec&, const Vec&) {
    return Mat::Zero(1, 1);
  };
  m.source_dmu_flat = [](double, const Vec&, const ParticleMeasure&, const Vec&, const Vec&) {
    return 0.0;
  };
  m.source_dmu = [](double, const Vec&, const ParticleMeasure&, const Vec&, const Vec&) {
    return RowVec::Zero(1);
  };
  m.drift_du = [](double, const Vec&, const ParticleMeasure&, const Vec&) {
    return Mat::Identity(1, 1);
  };
  m.source_du = [](double, const Vec&, const ParticleMeasure&, const Vec&) {
    return RowVec::Constant(1, -1.0);
  };
  m.cost = [](const ParticleMeasure& mu) {
    double acc = 0.0;
    for (int k = 0; k < mu.size(); ++k) acc += mu.weight(k) * mu.point(k).squaredNorm();
    return 0.5 * acc;
  };
  m.cost_flat = [](const ParticleMeasure&, const Vec& x) { return 0.5 * x.squaredNorm(); };
  m.cost_grad = [](const ParticleMeasure&, const Vec& x) { return RowVec(x.transpose()); };
  return m;
}

Model builtin_opinion_dynamics(const OpinionParams& p) {
  if (p.dim < 1) fail_invalid("opinion model: dimension must be positive");
  if (p.control_hi < p.control_lo) fail_invalid("opinion model: empty control box");
  const int n = p.dim;
  const double a = p.attraction, b = p.decay, c = p.exchange;

  auto psi = [a, b](const Vec& z) -> Vec { return a * std::exp(-b * z.squaredNorm()) * z; };
  auto dpsi = [a, b, n](const Vec& z) -> Mat {
    double e = a * std::exp(-b * z.squaredNorm());
    return e * (Mat::Identity(n, n) - 2.0 * b * z * z.transpose());
  };

  Model m;
  m.name = "opinion-dynamics";
  m.dim = n;
  m.control_dim = p.control_drift ? n : 1;
  m.control_box = {Vec::Constant(m.control_dim, p.control_lo),
                   Vec::Constant(m.control_dim, p.control_hi)};
  m.control_affine = true;

  // covers the default sampling box (radius 5, mass cap 4) with slack
  const double box_reach = 2.0 * SampleBounds{}.radius * std::sqrt(static_cast<double>(n));
  const double psi_peak =
      b > 0.0 ? a * std::min(box_reach, std::exp(-0.5) / std::sqrt(2.0 * b)) : a * box_reach;
  const double ctrl_peak = p.control_drift ? std::max(std::abs(p.control_lo), std::abs(p.control_hi))
                                           : 0.0;
  m.sublinear_bound = std::max({1.0, psi_peak + ctrl_peak,
                                std::abs(c) * n * box_reach * (1.0 + SampleBounds{}.mass_cap)});

  const bool drifted = p.control_drift;
  m.drift = [psi, drifted](double, const Vec& u, const ParticleMeasure& mu, const Vec& x) {
    Vec f = Vec::Zero(x.size());
    for (int j = 0; j < mu.size(); ++j) f += mu.weight(j) * psi(Vec(mu.point(j)) - x);
    if (drifted) f += u;
    return f;
  };
  m.source = [c](double, const Vec&, const ParticleMeasure& mu, const Vec& x) {
    double g = 0.0;
    for (int j = 0; j < mu.size(); ++j) g += mu.weight(j) * (Vec(mu.point(j)) - x).sum();
    return c * g;
  };
  m.drift_dx = [dpsi, n](double, const Vec&, const ParticleMeasure& mu, const Vec& x) {
    Mat jac = Mat::Zero(n, n);
    for (int j = 0; j < mu.size(); ++j) jac -= mu.weight(j) * dpsi(Vec(mu.point(j)) - x);
    return jac;
  };
  m.source_dx = [c, n](double, const Vec&, const ParticleMeasure& mu, const Vec&) {
    return RowVec(-c * mu.total_mass() * RowVec::Ones(n));
  };
  m.drift_dmu_flat = [psi](double, const Vec&, const ParticleMeasure&, const Vec& x, const Vec& xp) {
    return psi(xp - x);
  };
  m.drift_dmu = [dpsi](double, const Vec&, const ParticleMeasure&, const Vec& x, const Vec& xp) {
    return dpsi(xp - x);
  };
  m.source_dmu_flat = [c](double, const Vec&, const ParticleMeasure&, const Vec& x, const Vec& xp) {
    return c * (xp - x).sum();
  };
  m.source_dmu = [c, n](double, const Vec&, const ParticleMeasure&, const Vec&, const Vec&) {
    return RowVec(c * RowVec::Ones(n));
  };
  if (drifted) {
    m.drift_du = [n](double, const Vec&, const ParticleMeasure&, const Vec&) {
      return Mat(Mat::Identity(n, n));
    };
    m.source_du = [n](double, const Vec&, const ParticleMeasure&, const Vec&) {
      return RowVec(RowVec::Zero(n));
    };
  }
  m.cost = [](const ParticleMeasure& mu) {
    double acc = 0.0;
    for (int k = 0; k < mu.size(); ++k) acc += mu.weight(k) * mu.point(k).squaredNorm();
    return 0.5 * acc;
  };
  m.cost_flat = [](const ParticleMeasure&, const Vec& x) { return 0.5 * x.squaredNorm(); };
  m.cost_grad = [](const ParticleMeasure&, const Vec& x) { return RowVec(x.transpose()); };
  return m;
}

namespace {

// quadratic extrapolation of (t_i, q_i) to t = 0
double extrapolate_to_zero(const std::vector<double>& t, const std::vector<double>& q) {
  const size_t n = t.size();
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double li = 1.0;
    for (size_t j = 0; j < n; ++j)
      if (j != i) li *= (0.0 - t[j]) / (t[i] - t[j]);
    acc += li * q[i];
  }
  return acc;
}

ParticleMeasure mixture(const ParticleMeasure& mu, const ParticleMeasure& nu, double t) {
  std::vector<double> pts = mu.points();
  pts.insert(pts.end(), nu.points().begin(), nu.points().end());
  std::vector<double> w;
  w.reserve(static_cast<size_t>(mu.size() + nu.size()));
  for (double x : mu.weights()) w.push_back((1.0 - t) * x);
  for (double x : nu.weights()) w.push_back(t * x);
  return {mu.dim(), std::move(pts), std::move(w)};
}

} // namespace

DerivativeReport check_flat_derivative(const MeasureFunctional& Q, const ParticleMeasure& mu,
                                       const ParticleMeasure& nu, double tol) {
  if (!Q.value || !Q.flat) fail_invalid("check_flat_derivative: functional incomplete");
  if (mu.dim() != nu.dim()) fail_invalid("check_flat_derivative: dimension mismatch");

  DerivativeReport rep;
  rep.steps = {1e-2, 5e-3, 2.5e-3};
  const double q0 = Q.value(mu);
  for (double t : rep.steps) rep.quotients.push_back((Q.value(mixture(mu, nu, t)) - q0) / t);
  rep.limit = extrapolate_to_zero(rep.steps, rep.quotients);

  double ref = 0.0;
  for (int k = 0; k < nu.size(); ++k) ref += nu.weight(k) * Q.flat(mu, Vec(nu.point(k)));
  for (int k = 0; k < mu.size(); ++k) ref -= mu.weight(k) * Q.flat(mu, Vec(mu.point(k)));
  rep.reference = ref;
  rep.discrepancy = std::abs(rep.limit - rep.reference) / (1.0 + std::abs(rep.reference));
  rep.passed = rep.discrepancy <= tol;
  return rep;
}

LiftedDerivativeReport check_lifted_derivative(const MeasureFunctional& Q, const LiftedEnsemble& e,
                                               double tol) {
  if (!Q.value || !Q.flat || !Q.grad) fail_invalid("check_lifted_derivative: functional incomplete");
  LiftedDerivativeReport rep;

  auto lifted_value = [&](const LiftedEnsemble& ens) { return Q.value(barycentric_projection(ens)); };
  const ParticleMeasure beta0 = barycentric_projection(e);
  const double v0 = lifted_value(e);

  // flat derivative along delta masses at existing atoms: the lifted kernel
  // must be y * flat(beta(rho), x) up to the usual additive constant
  std::vector<double> steps = {1e-2, 5e-3, 2.5e-3};
  double mean_rep = 0.0;
  for (int k = 0; k < e.size(); ++k)
    mean_rep += e.weight(k) * e.mass(k) * Q.flat(beta0, Vec(e.position(k)));
  for (int i = 0; i < e.size(); ++i) {
    std::vector<double> quotients;
    for (double t : steps) {
      std::vector<double> w(e.weights());
      for (double& x : w) x *= 1.0 - t;
      w[static_cast<size_t>(i)] += t;
      LiftedEnsemble mix(e.dim(), e.positions(), e.masses(), std::move(w));
      quotients.push_back((lifted_value(mix) - v0) / t);
    }
    double limit = extrapolate_to_zero(steps, quotients);
    double claimed = e.mass(i) * Q.flat(beta0, Vec(e.position(i))) - mean_rep;
    rep.flat_discrepancy = std::max(rep.flat_discrepancy,
                                    std::abs(limit - claimed) / (1.0 + std::abs(claimed)));
  }

  // gradient through atom perturbations: moving atom i changes the lifted value
  // at rate w_i * [y_i * grad(beta, x_i), flat(beta, x_i)]
  for (int i = 0; i < e.size(); ++i) {
    if (e.weight(i) == 0.0) continue;
    RowVec claimed_x = e.mass(i) * Q.grad(beta0, Vec(e.position(i)));
    for (int d = 0; d < e.dim(); ++d) {
      double h = 1e-6 * (1.0 + std::abs(e.position(i)[d]));
      std::vector<double> plus(e.positions()), minus(e.positions());
      plus[static_cast<size_t>(i) * e.dim() + d] += h;
      minus[static_cast<size_t>(i) * e.dim() + d] -= h;
      double fd = (lifted_value({e.dim(), plus, e.masses(), e.weights()}) -
                   lifted_value({e.dim(), minus, e.masses(), e.weights()})) /
                  (2.0 * h * e.weight(i));
      rep.gradient_discrepancy =
          std::max(rep.gradient_discrepancy,
                   std::abs(fd - claimed_x[d]) / (1.0 + std::abs(claimed_x[d])));
    }
    double claimed_y = Q.flat(beta0, Vec(e.position(i)));
    double h = 1e-6 * (1.0 + std::abs(e.mass(i)));
    std::vector<double> plus(e.masses()), minus(e.masses());
    plus[static_cast<size_t>(i)] += h;
    minus[static_cast<size_t>(i)] -= h;
    if (minus[static_cast<size_t>(i)] < 0.0) minus[static_cast<size_t>(i)] = 0.0;
    double dy = plus[static_cast<size_t>(i)] - minus[static_cast<size_t>(i)];
    double fd = (lifted_value({e.dim(), e.positions(), plus, e.weights()}) -
                 lifted_value({e.dim(), e.positions(), minus, e.weights()})) /
                (dy * e.weight(i));
    rep.gradient_discrepancy =
        std::max(rep.gradient_discrepancy, std::abs(fd - claimed_y) / (1.0 + std::abs(claimed_y)));
  }

  rep.passed = rep.flat_discrepancy <= tol && rep.gradient_discrepancy <= tol;
  return rep;
}

AssumptionReport check_assumptions(const Model& model, const SampleBounds& bounds) {
  model.require_complete();
  std::mt19937_64 rng(bounds.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = model.dim;

  auto sample_point = [&] {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = bounds.radius * (2.0 * unit(rng) - 1.0);
    return x;
  };
  auto sample_measure = [&] {
    int atoms = 1 + static_cast<int>(unit(rng) * bounds.max_atoms);
    std::vector<double> pts, w;
    for (int k = 0; k < atoms; ++k) {
      Vec x = sample_point();
      for (int i = 0; i < n; ++i) pts.push_back(x[i]);
      w.push_back(unit(rng) * bounds.mass_cap / atoms);
    }
    return ParticleMeasure(n, std::move(pts), std::move(w));
  };
  auto sample_control = [&] {
    Vec u(model.control_dim);
    for (int i = 0; i < model.control_dim; ++i)
      u[i] = model.control_box.lo[i] +
             unit(rng) * (model.control_box.hi[i] - model.control_box.lo[i]);
    return u;
  };

  AssumptionReport rep;
  rep.samples = bounds.samples;
  const double C = model.sublinear_bound;
  for (int s = 0; s < bounds.samples; ++s) {
    double t = unit(rng) * bounds.horizon;
    Vec u = sample_control();
    ParticleMeasure mu = sample_measure();
    Vec x = sample_point();

    double fmag = model.drift(t, u, mu, x).norm();
    double gmag = std::abs(model.source(t, u, mu, x));
    rep.worst_growth_ratio = std::max({rep.worst_growth_ratio,
                                       fmag / (C * (1.0 + mu.total_mass())), gmag / C});

    Vec x2 = sample_point();
    double dx = (x - x2).norm();
    if (dx > 1e-9) {
      double qf = (model.drift(t, u, mu, x) - model.drift(t, u, mu, x2)).norm() / dx;
      double qg = std::abs(model.source(t, u, mu, x) - model.source(t, u, mu, x2)) / dx;
      rep.lipschitz_x = std::max({rep.lipschitz_x, qf, qg});
    }

    ParticleMeasure mu2 = sample_measure();
    double dmu = flat_norm(measure_difference(mu, mu2));
    if (dmu > 1e-9) {
      double qf = (model.drift(t, u, mu, x) - model.drift(t, u, mu2, x)).norm() / dmu;
      double qg = std::abs(model.source(t, u, mu, x) - model.source(t, u, mu2, x)) / dmu;
      rep.lipschitz_mu = std::max({rep.lipschitz_mu, qf, qg});
    }
  }
  rep.bounds_hold = rep.worst_growth_ratio <= 1.0 + 1e-12;
  return rep;
}

} // namespace nbc
