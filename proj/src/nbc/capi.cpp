#include "nbc.h"

#include <cstring>
#include <string>

#include "nbc/checks.hpp"
#include "nbc/csv.hpp"

using namespace nbc;

struct nbc_model {
  Model impl;
};
struct nbc_measure {
  ParticleMeasure impl;
};
struct nbc_control {
  ControlSignal impl;
};
struct nbc_trajectory {
  TrajectoryBundle impl;
};
struct nbc_costates {
  CostateBundle impl;
};
struct nbc_report {
  OptimizationReport impl;
  std::string reason;
  std::string classification;
};

namespace {

thread_local std::string g_last_error;

nbc_status to_status(const Error& e) {
  g_last_error = e.what();
  switch (e.kind()) {
    case ErrorKind::numerical_failure: return NBC_ERR_NUMERICAL;
    default: return NBC_ERR_INVALID;
  }
}

template <class Fn>
nbc_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    return to_status(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NBC_ERR_INVALID;
  }
}

nbc_status require(bool cond, const char* msg) {
  if (cond) return NBC_OK;
  g_last_error = msg;
  return NBC_ERR_INVALID;
}

} // namespace

extern "C" {

const char* nbc_version(void) { return "0.1.0"; }

const char* nbc_last_error(void) { return g_last_error.c_str(); }

void nbc_string_free(char* s) { delete[] s; }

nbc_status nbc_model_scalar_benchmark(nbc_model** out) {
  if (require(out != nullptr, "null output pointer")) return NBC_ERR_INVALID;
  return guarded([&] {
    *out = new nbc_model{builtin_scalar_benchmark()};
    return NBC_OK;
  });
}

nbc_status nbc_model_opinion(const nbc_opinion_params* params, nbc_model** out) {
  if (require(out != nullptr && params != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  return guarded([&] {
    OpinionParams p;
    p.dim = params->dim;
    p.attraction = params->attraction;
    p.decay = params->decay;
    p.exchange = params->exchange;
    p.control_drift = params->control_drift != 0;
    p.control_lo = params->control_lo;
    p.control_hi = params->control_hi;
    *out = new nbc_model{builtin_opinion_dynamics(p)};
    return NBC_OK;
  });
}

nbc_status nbc_model_dims(const nbc_model* model, int* dim, int* control_dim) {
  if (require(model != nullptr, "null model")) return NBC_ERR_INVALID;
  if (dim) *dim = model->impl.dim;
  if (control_dim) *control_dim = model->impl.control_dim;
  return NBC_OK;
}

nbc_status nbc_model_box(const nbc_model* model, double* lo, double* hi) {
  if (require(model != nullptr, "null model")) return NBC_ERR_INVALID;
  const ControlBox& box = model->impl.control_box;
  for (int i = 0; i < model->impl.control_dim; ++i) {
    if (lo) lo[i] = box.lo[i];
    if (hi) hi[i] = box.hi[i];
  }
  return NBC_OK;
}

void nbc_model_free(nbc_model* model) { delete model; }

nbc_status nbc_measure_create(int dim, int count, const double* points, const double* weights,
                              nbc_measure** out) {
  if (require(out != nullptr && points != nullptr && weights != nullptr && count >= 0,
              "null pointer argument"))
    return NBC_ERR_INVALID;
  return guarded([&] {
    std::vector<double> p(points, points + static_cast<size_t>(count) * (dim > 0 ? dim : 0));
    std::vector<double> w(weights, weights + count);
    *out = new nbc_measure{ParticleMeasure(dim, std::move(p), std::move(w))};
    return NBC_OK;
  });
}

nbc_status nbc_measure_dims(const nbc_measure* m, int* dim, int* count) {
  if (require(m != nullptr, "null measure")) return NBC_ERR_INVALID;
  if (dim) *dim = m->impl.dim();
  if (count) *count = m->impl.size();
  return NBC_OK;
}

nbc_status nbc_measure_total_mass(const nbc_measure* m, double* out) {
  if (require(m != nullptr && out != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  *out = m->impl.total_mass();
  return NBC_OK;
}

nbc_status nbc_measure_data(const nbc_measure* m, double* points, double* weights) {
  if (require(m != nullptr, "null measure")) return NBC_ERR_INVALID;
  if (points) std::memcpy(points, m->impl.points().data(), m->impl.points().size() * sizeof(double));
  if (weights)
    std::memcpy(weights, m->impl.weights().data(), m->impl.weights().size() * sizeof(double));
  return NBC_OK;
}

nbc_status nbc_measure_read_csv(const char* path, nbc_measure** out) {
  if (require(path != nullptr && out != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  return guarded([&] {
    *out = new nbc_measure{read_measure_csv(path)};
    return NBC_OK;
  });
}

nbc_status nbc_measure_write_csv(const nbc_measure* m, const char* path) {
  if (require(m != nullptr && path != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  return guarded([&] {
    write_measure_csv(m->impl, path);
    return NBC_OK;
  });
}

nbc_status nbc_measure_w2(const nbc_measure* a, const nbc_measure* b, double* out) {
  if (require(a != nullptr && b != nullptr && out != nullptr, "null pointer argument"))
    return NBC_ERR_INVALID;
  return guarded([&] {
    *out = w2_distance(a->impl, b->impl);
    return NBC_OK;
  });
}

nbc_status nbc_measure_flat_distance(const nbc_measure* a, const nbc_measure* b, double* out) {
  if (require(a != nullptr && b != nullptr && out != nullptr, "null pointer argument"))
    return NBC_ERR_INVALID;
  return guarded([&] {
    *out = flat_norm(measure_difference(a->impl, b->impl));
    return NBC_OK;
  });
}

void nbc_measure_free(nbc_measure* m) { delete m; }

nbc_status nbc_control_create(int control_dim, int intervals, const double* values,
                              nbc_control** out) {
  if (require(out != nullptr && values != nullptr && control_dim >= 1 && intervals >= 1,
              "bad control shape"))
    return NBC_ERR_INVALID;
  return guarded([&] {
    ControlSignal u;
    u.control_dim = control_dim;
    for (int m = 0; m < intervals; ++m) {
      Vec v(control_dim);
      for (int i = 0; i < control_dim; ++i)
        v[i] = values[static_cast<size_t>(m) * control_dim + i];
      u.values.push_back(std::move(v));
    }
    *out = new nbc_control{std::move(u)};
    return NBC_OK;
  });
}

nbc_status nbc_control_constant(int control_dim, int intervals, const double* value,
                                nbc_control** out) {
  if (require(out != nullptr && value != nullptr && control_dim >= 1 && intervals >= 1,
              "bad control shape"))
    return NBC_ERR_INVALID;
  return guarded([&] {
    Vec v(control_dim);
    for (int i = 0; i < control_dim; ++i) v[i] = value[i];
    *out = new nbc_control{ControlSignal::constant(v, intervals)};
    return NBC_OK;
  });
}

nbc_status nbc_control_dims(const nbc_control* u, int* control_dim, int* intervals) {
  if (require(u != nullptr, "null control")) return NBC_ERR_INVALID;
  if (control_dim) *control_dim = u->impl.control_dim;
  if (intervals) *intervals = u->impl.intervals();
  return NBC_OK;
}

nbc_status nbc_control_data(const nbc_control* u, double* values) {
  if (require(u != nullptr && values != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  for (int m = 0; m < u->impl.intervals(); ++m)
    for (int i = 0; i < u->impl.control_dim; ++i)
      values[static_cast<size_t>(m) * u->impl.control_dim + i] =
          u->impl.values[static_cast<size_t>(m)][i];
  return NBC_OK;
}

nbc_status nbc_control_read_csv(const char* path, nbc_control** out) {
  if (require(path != nullptr && out != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  return guarded([&] {
    *out = new nbc_control{read_control_csv(path)};
    return NBC_OK;
  });
}

nbc_status nbc_control_write_csv(const nbc_control* u, double horizon, const char* path) {
  if (require(u != nullptr && path != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  return guarded([&] {
    write_control_csv(u->impl, TimeGrid(horizon, u->impl.intervals()), path);
    return NBC_OK;
  });
}

void nbc_control_free(nbc_control* u) { delete u; }

nbc_status nbc_simulate(const nbc_model* model, const nbc_measure* theta, const nbc_control* u,
                        double horizon, int steps, const char* method, nbc_trajectory** out) {
  if (require(model != nullptr && theta != nullptr && u != nullptr && method != nullptr &&
                  out != nullptr,
              "null pointer argument"))
    return NBC_ERR_INVALID;
  return guarded([&] {
    TimeGrid grid(horizon, steps);
    LiftedEnsemble e0 = discretize_initial(theta->impl);
    *out = new nbc_trajectory{
        integrate_forward(model->impl, u->impl, e0, grid, integrator_from_name(method))};
    return NBC_OK;
  });
}

nbc_status nbc_trajectory_nodes(const nbc_trajectory* traj, int* out) {
  if (require(traj != nullptr && out != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  *out = static_cast<int>(traj->impl.states.size());
  return NBC_OK;
}

nbc_status nbc_trajectory_measure_at(const nbc_trajectory* traj, int node, nbc_measure** out) {
  if (require(traj != nullptr && out != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  return guarded([&] {
    *out = new nbc_measure{traj->impl.measure_at(node)};
    return NBC_OK;
  });
}

nbc_status nbc_trajectory_cost(const nbc_model* model, const nbc_trajectory* traj, double* out) {
  if (require(model != nullptr && traj != nullptr && out != nullptr, "null pointer argument"))
    return NBC_ERR_INVALID;
  return guarded([&] {
    *out = terminal_cost(model->impl, traj->impl);
    return NBC_OK;
  });
}

nbc_status nbc_trajectory_write_csv(const nbc_trajectory* traj, const char* path) {
  if (require(traj != nullptr && path != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  return guarded([&] {
    write_trajectory_csv(traj->impl, path);
    return NBC_OK;
  });
}

nbc_status nbc_trajectory_write_moments_csv(const nbc_trajectory* traj, const char* path) {
  if (require(traj != nullptr && path != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  return guarded([&] {
    write_moments_csv(traj->impl, path);
    return NBC_OK;
  });
}

nbc_status nbc_trajectory_write_mass_csv(const nbc_trajectory* traj, const char* path) {
  if (require(traj != nullptr && path != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  return guarded([&] {
    write_mass_csv(traj->impl, path);
    return NBC_OK;
  });
}

void nbc_trajectory_free(nbc_trajectory* traj) { delete traj; }

nbc_status nbc_adjoint_solve(const nbc_model* model, const nbc_control* u,
                             const nbc_trajectory* traj, nbc_costates** out) {
  if (require(model != nullptr && u != nullptr && traj != nullptr && out != nullptr,
              "null pointer argument"))
    return NBC_ERR_INVALID;
  return guarded([&] {
    *out = new nbc_costates{integrate_adjoint_backward(model->impl, u->impl, traj->impl)};
    return NBC_OK;
  });
}

nbc_status nbc_costates_write_csv(const nbc_trajectory* traj, const nbc_costates* c,
                                  const char* path) {
  if (require(traj != nullptr && c != nullptr && path != nullptr, "null pointer argument"))
    return NBC_ERR_INVALID;
  return guarded([&] {
    write_costates_csv(traj->impl, c->impl, path);
    return NBC_OK;
  });
}

nbc_status nbc_adjoint_summary_write_csv(const nbc_model* model, const nbc_control* u,
                                         const nbc_trajectory* traj, const nbc_costates* c,
                                         int u_grid, const char* path) {
  if (require(model != nullptr && u != nullptr && traj != nullptr && c != nullptr &&
                  path != nullptr,
              "null pointer argument"))
    return NBC_ERR_INVALID;
  return guarded([&] {
    write_adjoint_summary_csv(model->impl, u->impl, traj->impl, c->impl, u_grid, path);
    return NBC_OK;
  });
}

nbc_status nbc_pmp_residual(const nbc_model* model, const nbc_control* u,
                            const nbc_trajectory* traj, const nbc_costates* c, int u_grid,
                            double* out) {
  if (require(model != nullptr && u != nullptr && traj != nullptr && c != nullptr && out != nullptr,
              "null pointer argument"))
    return NBC_ERR_INVALID;
  return guarded([&] {
    *out = pmp_residual(model->impl, u->impl, traj->impl, c->impl,
                        control_grid(model->impl.control_box, u_grid));
    return NBC_OK;
  });
}

void nbc_costates_free(nbc_costates* c) { delete c; }

nbc_status nbc_optimize(const nbc_model* model, const nbc_measure* theta, double horizon,
                        int steps, const char* method, const nbc_opt_options* options,
                        nbc_report** out) {
  if (require(model != nullptr && theta != nullptr && method != nullptr && out != nullptr,
              "null pointer argument"))
    return NBC_ERR_INVALID;
  return guarded([&] {
    OptimizerConfig cfg;
    if (options) {
      if (options->method) cfg.method = optimizer_method_from_name(options->method);
      if (options->max_iters > 0) cfg.max_iters = options->max_iters;
      if (options->residual_tol > 0.0) cfg.residual_tol = options->residual_tol;
      if (options->cost_tol > 0.0) cfg.cost_tol = options->cost_tol;
      if (options->damping > 0.0) cfg.damping = options->damping;
      if (options->u_grid > 0) cfg.u_grid = options->u_grid;
      if (options->armijo_alpha0 > 0.0) cfg.armijo_alpha0 = options->armijo_alpha0;
      if (options->armijo_shrink > 0.0) cfg.armijo_shrink = options->armijo_shrink;
      if (options->armijo_c1 > 0.0) cfg.armijo_c1 = options->armijo_c1;
      if (options->min_step > 0.0) cfg.min_step = options->min_step;
      if (options->initial) {
        Vec v(model->impl.control_dim);
        for (int i = 0; i < model->impl.control_dim; ++i) v[i] = options->initial[i];
        cfg.initial = std::move(v);
      }
    }
    OptimizationReport rep =
        optimize(model->impl, theta->impl, TimeGrid(horizon, steps), cfg,
                 integrator_from_name(method));
    auto* r = new nbc_report{std::move(rep), {}, {}};
    r->reason = r->impl.reason;
    r->classification = extremal_class_name(r->impl.classification);
    *out = r;
    if (!r->impl.converged) {
      g_last_error = "optimizer did not converge within max_iters";
      return NBC_ERR_UNCONVERGED;
    }
    return NBC_OK;
  });
}

nbc_status nbc_report_final_cost(const nbc_report* r, double* out) {
  if (require(r != nullptr && out != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  *out = r->impl.final_cost;
  return NBC_OK;
}

nbc_status nbc_report_final_residual(const nbc_report* r, double* out) {
  if (require(r != nullptr && out != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  *out = r->impl.final_residual;
  return NBC_OK;
}

nbc_status nbc_report_converged(const nbc_report* r, int* out) {
  if (require(r != nullptr && out != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  *out = r->impl.converged ? 1 : 0;
  return NBC_OK;
}

const char* nbc_report_reason(const nbc_report* r) { return r ? r->reason.c_str() : ""; }

const char* nbc_report_classification(const nbc_report* r) {
  return r ? r->classification.c_str() : "";
}

nbc_status nbc_report_final_control(const nbc_report* r, nbc_control** out) {
  if (require(r != nullptr && out != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  *out = new nbc_control{r->impl.final_control};
  return NBC_OK;
}

nbc_status nbc_report_write_json(const nbc_report* r, const char* path) {
  if (require(r != nullptr && path != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  return guarded([&] {
    write_report_json(r->impl, path);
    return NBC_OK;
  });
}

nbc_status nbc_report_write_control_csv(const nbc_report* r, double horizon, const char* path) {
  if (require(r != nullptr && path != nullptr, "null pointer argument")) return NBC_ERR_INVALID;
  return guarded([&] {
    write_control_csv(r->impl.final_control,
                      TimeGrid(horizon, r->impl.final_control.intervals()), path);
    return NBC_OK;
  });
}

void nbc_report_free(nbc_report* r) { delete r; }

nbc_status nbc_check_run(const nbc_model* model, const nbc_measure* theta, double horizon,
                         int steps, const char* method, const char* suite, uint64_t seed,
                         int u_grid, char** table, int* all_passed) {
  if (require(model != nullptr && suite != nullptr && method != nullptr, "null pointer argument"))
    return NBC_ERR_INVALID;
  return guarded([&] {
    CheckSetup setup;
    setup.model = &model->impl;
    if (theta) setup.theta = theta->impl;
    setup.grid = TimeGrid(horizon, steps);
    setup.method = integrator_from_name(method);
    setup.seed = seed;
    setup.u_grid = u_grid > 0 ? u_grid : 101;
    std::vector<CheckItem> items = run_check_suite(suite, setup);
    if (table) {
      std::string text = render_check_table(items);
      char* buf = new char[text.size() + 1];
      std::memcpy(buf, text.c_str(), text.size() + 1);
      *table = buf;
    }
    if (all_passed) *all_passed = nbc::all_passed(items) ? 1 : 0;
    return NBC_OK;
  });
}

} // extern "C"
