#include "nbc/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace nbc {

namespace {

struct Sampler {
  std::mt19937_64 rng;
  explicit Sampler(std::uint64_t seed) : rng(seed) {}

  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }
  double sym() { return 2.0 * unit() - 1.0; }

  Vec point(int n, double radius) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = radius * sym();
    return x;
  }

  ParticleMeasure measure(int n, int min_atoms, int max_atoms, double radius, double mass_cap) {
    int atoms = min_atoms + static_cast<int>(unit() * (max_atoms - min_atoms + 1));
    atoms = std::min(atoms, max_atoms);
    std::vector<double> pts, w;
    for (int k = 0; k < atoms; ++k) {
      Vec x = point(n, radius);
      for (int i = 0; i < n; ++i) pts.push_back(x[i]);
      w.push_back((0.05 + 0.95 * unit()) * mass_cap / atoms);
    }
    return {n, std::move(pts), std::move(w)};
  }

  LiftedEnsemble ensemble(int n, int atoms, double radius, double mass_cap) {
    std::vector<double> pts, y, w;
    double wsum = 0.0;
    for (int k = 0; k < atoms; ++k) {
      Vec x = point(n, radius);
      for (int i = 0; i < n; ++i) pts.push_back(x[i]);
      y.push_back(unit() * mass_cap);
      w.push_back(0.05 + 0.95 * unit());
      wsum += w.back();
    }
    for (double& x : w) x /= wsum;
    return {n, std::move(pts), std::move(y), std::move(w)};
  }

  // strictly interior control value, margin 20% of the half-width per axis
  Vec interior_control(const ControlBox& box) {
    Vec u(box.dim());
    for (int i = 0; i < box.dim(); ++i) {
      double mid = 0.5 * (box.lo[i] + box.hi[i]);
      double half = 0.5 * (box.hi[i] - box.lo[i]);
      u[i] = mid + 0.6 * half * sym();
    }
    return u;
  }
};

double rel_err(double got, double want) {
  return std::abs(got - want) / (1.0 + std::abs(want));
}

double rel_err(const Mat& got, const Mat& want) {
  return (got - want).cwiseAbs().maxCoeff() / (1.0 + want.cwiseAbs().maxCoeff());
}

ParticleMeasure with_atom(const ParticleMeasure& mu, const Vec& x, double eps) {
  std::vector<double> pts = mu.points();
  for (int i = 0; i < x.size(); ++i) pts.push_back(x[i]);
  std::vector<double> w = mu.weights();
  w.push_back(eps);
  return {mu.dim(), std::move(pts), std::move(w)};
}

CheckItem item(const std::string& name, double worst, double tol, std::string detail = {}) {
  return {name, worst, tol, worst <= tol, std::move(detail)};
}

std::vector<CheckItem> suite_derivatives(const CheckSetup& setup) {
  const Model& model = *setup.model;
  model.require_complete();
  Sampler smp(setup.seed);
  const int n = model.dim;
  const int probes = 20;

  double worst_fx = 0.0, worst_gx = 0.0, worst_ff = 0.0, worst_fi = 0.0, worst_gf = 0.0,
         worst_gi = 0.0, worst_fu = 0.0, worst_gu = 0.0, worst_cf = 0.0, worst_cg = 0.0;

  for (int s = 0; s < probes; ++s) {
    const double t = setup.grid.horizon * smp.unit();
    const Vec u = smp.interior_control(model.control_box);
    const ParticleMeasure mu = smp.measure(n, 1, 6, 2.0, 2.0);
    const Vec x = smp.point(n, 2.0);
    const Vec xp = smp.point(n, 2.0);

    {
      Mat fd(n, n);
      for (int d = 0; d < n; ++d) {
        double h = 1e-6 * (1.0 + std::abs(x[d]));
        Vec xa = x, xb = x;
        xa[d] += h;
        xb[d] -= h;
        fd.col(d) = (model.drift(t, u, mu, xa) - model.drift(t, u, mu, xb)) / (2.0 * h);
      }
      worst_fx = std::max(worst_fx, rel_err(model.drift_dx(t, u, mu, x), fd));

      RowVec gd(n);
      for (int d = 0; d < n; ++d) {
        double h = 1e-6 * (1.0 + std::abs(x[d]));
        Vec xa = x, xb = x;
        xa[d] += h;
        xb[d] -= h;
        gd[d] = (model.source(t, u, mu, xa) - model.source(t, u, mu, xb)) / (2.0 * h);
      }
      worst_gx = std::max(worst_gx, rel_err(Mat(model.source_dx(t, u, mu, x)), Mat(gd)));
    }

    {
      const double eps = 1e-6;
      ParticleMeasure mup = with_atom(mu, xp, eps);
      Vec fd = (model.drift(t, u, mup, x) - model.drift(t, u, mu, x)) / eps;
      worst_ff = std::max(worst_ff, rel_err(Mat(model.drift_dmu_flat(t, u, mu, x, xp)), Mat(fd)));
      double gd = (model.source(t, u, mup, x) - model.source(t, u, mu, x)) / eps;
      worst_gf = std::max(worst_gf, rel_err(model.source_dmu_flat(t, u, mu, x, xp), gd));
    }

    {
      Mat fd(n, n);
      RowVec gd(n);
      for (int d = 0; d < n; ++d) {
        double h = 1e-6 * (1.0 + std::abs(xp[d]));
        Vec xa = xp, xb = xp;
        xa[d] += h;
        xb[d] -= h;
        fd.col(d) =
            (model.drift_dmu_flat(t, u, mu, x, xa) - model.drift_dmu_flat(t, u, mu, x, xb)) /
            (2.0 * h);
        gd[d] =
            (model.source_dmu_flat(t, u, mu, x, xa) - model.source_dmu_flat(t, u, mu, x, xb)) /
            (2.0 * h);
      }
      worst_fi = std::max(worst_fi, rel_err(model.drift_dmu(t, u, mu, x, xp), fd));
      worst_gi = std::max(worst_gi, rel_err(Mat(model.source_dmu(t, u, mu, x, xp)), Mat(gd)));
    }

    if (model.has_control_derivatives()) {
      Mat fd(n, model.control_dim);
      RowVec gd(model.control_dim);
      for (int d = 0; d < model.control_dim; ++d) {
        double h = 1e-6 * (1.0 + std::abs(u[d]));
        Vec ua = u, ub = u;
        ua[d] += h;
        ub[d] -= h;
        fd.col(d) = (model.drift(t, ua, mu, x) - model.drift(t, ub, mu, x)) / (2.0 * h);
        gd[d] = (model.source(t, ua, mu, x) - model.source(t, ub, mu, x)) / (2.0 * h);
      }
      worst_fu = std::max(worst_fu, rel_err(model.drift_du(t, u, mu, x), fd));
      worst_gu = std::max(worst_gu, rel_err(Mat(model.source_du(t, u, mu, x)), Mat(gd)));
    }

    {
      const double eps = 1e-6;
      double fd = (model.cost(with_atom(mu, x, eps)) - model.cost(mu)) / eps;
      worst_cf = std::max(worst_cf, rel_err(model.cost_flat(mu, x), fd));
      RowVec gd(n);
      for (int d = 0; d < n; ++d) {
        double h = 1e-6 * (1.0 + std::abs(x[d]));
        Vec xa = x, xb = x;
        xa[d] += h;
        xb[d] -= h;
        gd[d] = (model.cost_flat(mu, xa) - model.cost_flat(mu, xb)) / (2.0 * h);
      }
      worst_cg = std::max(worst_cg, rel_err(Mat(model.cost_grad(mu, x)), Mat(gd)));
    }
  }

  std::vector<CheckItem> items;
  items.push_back(item("drift-jacobian-x", worst_fx, 1e-5));
  items.push_back(item("source-gradient-x", worst_gx, 1e-5));
  items.push_back(item("drift-flat-kernel", worst_ff, 1e-5));
  items.push_back(item("drift-intrinsic-kernel", worst_fi, 1e-4));
  items.push_back(item("source-flat-kernel", worst_gf, 1e-5));
  items.push_back(item("source-intrinsic-kernel", worst_gi, 1e-4));
  if (model.has_control_derivatives()) {
    items.push_back(item("drift-control-derivative", worst_fu, 1e-5));
    items.push_back(item("source-control-derivative", worst_gu, 1e-5));
  }
  items.push_back(item("cost-flat-kernel", worst_cf, 1e-5));
  items.push_back(item("cost-intrinsic-gradient", worst_cg, 1e-4));

  // flat and lifted derivative limits of the cost and of the source functional
  MeasureFunctional cost_fn{model.cost,
                            [&model](const ParticleMeasure& m, const Vec& x) {
                              return model.cost_flat(m, x);
                            },
                            [&model](const ParticleMeasure& m, const Vec& x) {
                              return model.cost_grad(m, x);
                            }};
  const double t0 = 0.5 * setup.grid.horizon;
  const Vec u0 = smp.interior_control(model.control_box);
  const Vec xbar = smp.point(n, 1.5);
  MeasureFunctional source_fn{
      [&model, t0, u0, xbar](const ParticleMeasure& m) { return model.source(t0, u0, m, xbar); },
      [&model, t0, u0, xbar](const ParticleMeasure& m, const Vec& x) {
        return model.source_dmu_flat(t0, u0, m, xbar, x);
      },
      [&model, t0, u0, xbar](const ParticleMeasure& m, const Vec& x) {
        return model.source_dmu(t0, u0, m, xbar, x);
      }};

  const ParticleMeasure mu = smp.measure(n, 1, 6, 2.0, 2.0);
  const ParticleMeasure nu = smp.measure(n, 1, 6, 2.0, 2.0);
  const LiftedEnsemble ens = smp.ensemble(n, 6, 2.0, 2.0);

  DerivativeReport fr = check_flat_derivative(cost_fn, mu, nu);
  items.push_back(item("cost-flat-limit", fr.discrepancy, 1e-6));
  LiftedDerivativeReport lr = check_lifted_derivative(cost_fn, ens);
  items.push_back(item("cost-lifted-flat", lr.flat_discrepancy, 1e-6));
  items.push_back(item("cost-lifted-gradient", lr.gradient_discrepancy, 1e-6));

  fr = check_flat_derivative(source_fn, mu, nu);
  items.push_back(item("source-flat-limit", fr.discrepancy, 1e-6));
  lr = check_lifted_derivative(source_fn, ens);
  items.push_back(item("source-lifted-flat", lr.flat_discrepancy, 1e-6));
  items.push_back(item("source-lifted-gradient", lr.gradient_discrepancy, 1e-6));
  return items;
}

std::vector<CheckItem> suite_gradient(const CheckSetup& setup) {
  const Model& model = *setup.model;
  model.require_complete();
  if (!model.has_control_derivatives())
    return {item("control-gradient-fd", 1.0, 1e-4, "model lacks control derivatives")};

  Sampler smp(setup.seed);
  const ParticleMeasure theta =
      setup.theta ? *setup.theta : smp.measure(model.dim, 3, 6, 2.0, 2.0);
  const LiftedEnsemble e0 = discretize_initial(theta);
  const TimeGrid& grid = setup.grid;

  ControlSignal u;
  u.control_dim = model.control_dim;
  for (int m = 0; m < grid.steps; ++m) u.values.push_back(smp.interior_control(model.control_box));

  const TrajectoryBundle traj = integrate_forward(model, u, e0, grid, setup.method);
  const CostateBundle costates = integrate_adjoint_backward(model, u, traj);
  const std::vector<RowVec> g = control_gradient(model, u, traj, costates);

  auto cost_of = [&](const ControlSignal& c) {
    return terminal_cost(model, integrate_forward(model, c, e0, grid, setup.method));
  };

  const double delta = 1e-5;
  const int checks = std::min(grid.steps, 12);
  double worst = 0.0;
  for (int c = 0; c < checks; ++c) {
    int m = grid.steps == 1 ? 0 : c * (grid.steps - 1) / std::max(checks - 1, 1);
    for (int i = 0; i < model.control_dim; ++i) {
      ControlSignal up = u, dn = u;
      up.values[static_cast<size_t>(m)][i] += delta;
      dn.values[static_cast<size_t>(m)][i] -= delta;
      double fd = (cost_of(up) - cost_of(dn)) / (2.0 * delta);
      worst = std::max(worst, rel_err(g[static_cast<size_t>(m)][i], fd));
    }
  }
  return {item("control-gradient-fd", worst, 1e-4)};
}

std::vector<CheckItem> suite_weak_form(const CheckSetup& setup) {
  const Model& model = *setup.model;
  model.require_complete();
  Sampler smp(setup.seed);
  const ParticleMeasure theta =
      setup.theta ? *setup.theta : smp.measure(model.dim, 3, 6, 2.0, 2.0);
  const LiftedEnsemble e0 = discretize_initial(theta);

  const Vec uval = model.control_box.lo + 0.25 * (model.control_box.hi - model.control_box.lo);
  const TimeGrid coarse = setup.grid;
  const TimeGrid fine{coarse.horizon, 2 * coarse.steps};
  const TrajectoryBundle tc = integrate_forward(model, ControlSignal::constant(uval, coarse.steps),
                                                e0, coarse, setup.method);
  const TrajectoryBundle tf = integrate_forward(model, ControlSignal::constant(uval, fine.steps),
                                                e0, fine, setup.method);

  struct TestFn {
    const char* name;
    std::function<double(const Vec&)> phi;
    std::function<RowVec(const Vec&)> grad;
  };
  std::vector<TestFn> battery;
  battery.push_back({"const", [](const Vec&) { return 1.0; },
                     [&model](const Vec&) { return RowVec(RowVec::Zero(model.dim)); }});
  battery.push_back({"linear", [](const Vec& x) { return x[0]; },
                     [&model](const Vec&) {
                       RowVec g = RowVec::Zero(model.dim);
                       g[0] = 1.0;
                       return g;
                     }});
  battery.push_back({"quadratic", [](const Vec& x) { return x.squaredNorm(); },
                     [](const Vec& x) { return RowVec(2.0 * x.transpose()); }});

  std::vector<CheckItem> items;
  for (const TestFn& fn : battery) {
    auto rc = weak_form_residual(model, ControlSignal::constant(uval, coarse.steps), tc, fn.phi,
                                 fn.grad);
    auto rf = weak_form_residual(model, ControlSignal::constant(uval, fine.steps), tf, fn.phi,
                                 fn.grad);
    double mc = *std::max_element(rc.begin(), rc.end());
    double mf = *std::max_element(rf.begin(), rf.end());
    char detail[128];
    if (mc < 1e-13) {
      std::snprintf(detail, sizeof detail, "residual %.3e at rounding noise", mc);
      items.push_back(item(std::string("weak-form-order-") + fn.name, 0.0, 0.8, detail));
    } else {
      double ratio = mc / std::max(mf, 1e-300);
      std::snprintf(detail, sizeof detail, "residuals %.3e / %.3e, ratio %.3f", mc, mf, ratio);
      items.push_back(item(std::string("weak-form-order-") + fn.name, std::abs(ratio - 4.0), 0.8,
                           detail));
    }
  }
  return items;
}

std::vector<CheckItem> suite_hamiltonian(const CheckSetup& setup) {
  const Model& model = *setup.model;
  model.require_complete();
  Sampler smp(setup.seed);
  const ParticleMeasure theta =
      setup.theta ? *setup.theta : smp.measure(model.dim, 3, 6, 2.0, 2.0);
  const LiftedEnsemble e0 = discretize_initial(theta);
  const TimeGrid& grid = setup.grid;

  ControlSignal u;
  u.control_dim = model.control_dim;
  for (int m = 0; m < grid.steps; ++m) u.values.push_back(smp.interior_control(model.control_box));

  const TrajectoryBundle traj = integrate_forward(model, u, e0, grid, setup.method);
  const CostateBundle costates = integrate_adjoint_backward(model, u, traj);

  std::vector<Vec> probes = control_grid(model.control_box, setup.u_grid);
  if (probes.size() > 9) {
    std::vector<Vec> sub;
    for (size_t i = 0; i < probes.size(); i += probes.size() / 9) sub.push_back(probes[i]);
    probes = std::move(sub);
  }

  double worst = 0.0;
  for (int m = 0; m < grid.steps; ++m) {
    const LiftedEnsemble& state = traj.at(m);
    const AdjointMeasures adj = adjoint_measures_at(traj, costates, m);
    const ParticleMeasure mu = traj.measure_at(m);
    const double t = grid.node(m);
    std::vector<Vec> cands = probes;
    cands.push_back(u.values[static_cast<size_t>(m)]);
    for (const Vec& v : cands) {
      double h1 = hamiltonian_from_costates(model, t, v, state,
                                            costates.p[static_cast<size_t>(m)],
                                            costates.q[static_cast<size_t>(m)]);
      double h2 = hamiltonian_from_adjoint_measures(model, t, v, adj, mu);
      worst = std::max(worst, std::abs(h1 - h2) / (1.0 + std::abs(h1)));
    }
  }
  return {item("hamiltonian-two-forms", worst, 1e-12)};
}

std::vector<CheckItem> suite_lipschitz(const CheckSetup& setup) {
  const Model& model = *setup.model;
  Sampler smp(setup.seed);
  const int n = model.dim;

  std::vector<CheckItem> items;
  for (double b : {1.0, 2.0, 4.0}) {
    double worst = 0.0;
    for (int s = 0; s < 200; ++s) {
      LiftedEnsemble a = smp.ensemble(n, 2 + static_cast<int>(smp.unit() * 5), 2.0, b);
      LiftedEnsemble c = smp.ensemble(n, 2 + static_cast<int>(smp.unit() * 5), 2.0, b);
      double w2 = w2_distance(product_cloud(a), product_cloud(c));
      double flat = flat_norm(measure_difference(barycentric_projection(a),
                                                 barycentric_projection(c)));
      worst = std::max(worst, flat - 2.0 * b * w2);
    }
    char name[48];
    std::snprintf(name, sizeof name, "projection-lipschitz-b%g", b);
    items.push_back(item(name, worst, 1e-9));
  }
  return items;
}

} // namespace

std::vector<CheckItem> run_check_suite(const std::string& suite, const CheckSetup& setup) {
  if (!setup.model) fail_invalid("check suite: missing model");
  if (suite == "derivatives") return suite_derivatives(setup);
  if (suite == "gradient") return suite_gradient(setup);
  if (suite == "weak-form") return suite_weak_form(setup);
  if (suite == "hamiltonian-equivalence") return suite_hamiltonian(setup);
  if (suite == "lipschitz-beta") return suite_lipschitz(setup);
  fail_invalid("unknown check suite '" + suite + "'");
}

bool all_passed(const std::vector<CheckItem>& items) {
  return std::all_of(items.begin(), items.end(), [](const CheckItem& i) { return i.passed; });
}

std::string render_check_table(const std::vector<CheckItem>& items) {
  std::string out = "check                               worst        tol          status\n";
  char line[256];
  for (const CheckItem& i : items) {
    std::snprintf(line, sizeof line, "%-35s %-12.3e %-12.3e %s%s%s\n", i.name.c_str(), i.worst,
                  i.tol, i.passed ? "pass" : "FAIL", i.detail.empty() ? "" : "  ",
                  i.detail.c_str());
    out += line;
  }
  return out;
}

} // namespace nbc
