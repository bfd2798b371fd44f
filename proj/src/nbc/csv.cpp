#include "nbc/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nbc {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail_io("cannot open '" + path + "' for writing");
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& path) {
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(b, e, v);
  while (ptr < e && (*ptr == ' ' || *ptr == '\t' || *ptr == '\r')) ++ptr;
  if (ec != std::errc() || ptr != e) fail_invalid("malformed number '" + s + "' in " + path);
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_io("cannot open '" + path + "' for reading");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) fail_invalid("empty csv file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split_line(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_line(line);
    if (fields.size() != table.header.size())
      fail_invalid("ragged csv row in " + path);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const std::string& f : fields) row.push_back(parse_double(f, path));
    table.rows.push_back(std::move(row));
  }
  return table;
}

} // namespace

void write_measure_csv(const ParticleMeasure& m, const std::string& path) {
  std::ofstream out = open_out(path);
  for (int i = 0; i < m.dim(); ++i) out << "x_" << i << ',';
  out << "weight\n";
  for (int k = 0; k < m.size(); ++k) {
    for (int i = 0; i < m.dim(); ++i)
      out << format_double(m.points()[static_cast<size_t>(k) * m.dim() + i]) << ',';
    out << format_double(m.weight(k)) << '\n';
  }
  if (!out) fail_io("failed writing '" + path + "'");
}

ParticleMeasure read_measure_csv(const std::string& path) {
  CsvTable table = read_table(path);
  const int cols = static_cast<int>(table.header.size());
  if (cols < 2 || table.header.back() != "weight")
    fail_invalid("measure csv " + path + ": expected header x_0,...,weight");
  for (int i = 0; i + 1 < cols; ++i)
    if (table.header[static_cast<size_t>(i)] != "x_" + std::to_string(i))
      fail_invalid("measure csv " + path + ": expected header x_0,...,weight");
  const int dim = cols - 1;
  std::vector<double> pts, w;
  for (const auto& row : table.rows) {
    for (int i = 0; i < dim; ++i) pts.push_back(row[static_cast<size_t>(i)]);
    w.push_back(row[static_cast<size_t>(dim)]);
  }
  return {dim, std::move(pts), std::move(w)};
}

void write_control_csv(const ControlSignal& u, const TimeGrid& grid, const std::string& path) {
  if (u.intervals() != grid.steps) fail_invalid("control csv: control does not match the grid");
  std::ofstream out = open_out(path);
  out << 't';
  for (int i = 0; i < u.control_dim; ++i) out << ",u_" << i;
  out << '\n';
  for (int m = 0; m < u.intervals(); ++m) {
    out << format_double(grid.node(m));
    for (int i = 0; i < u.control_dim; ++i)
      out << ',' << format_double(u.values[static_cast<size_t>(m)][i]);
    out << '\n';
  }
  if (!out) fail_io("failed writing '" + path + "'");
}

ControlSignal read_control_csv(const std::string& path) {
  CsvTable table = read_table(path);
  const int cols = static_cast<int>(table.header.size());
  if (cols < 2 || table.header.front() != "t")
    fail_invalid("control csv " + path + ": expected header t,u_0,...");
  for (int i = 1; i < cols; ++i)
    if (table.header[static_cast<size_t>(i)] != "u_" + std::to_string(i - 1))
      fail_invalid("control csv " + path + ": expected header t,u_0,...");
  if (table.rows.empty()) fail_invalid("control csv " + path + ": no intervals");
  ControlSignal u;
  u.control_dim = cols - 1;
  for (const auto& row : table.rows) {
    Vec v(u.control_dim);
    for (int i = 0; i < u.control_dim; ++i) v[i] = row[static_cast<size_t>(i) + 1];
    u.values.push_back(std::move(v));
  }
  return u;
}

void write_trajectory_csv(const TrajectoryBundle& traj, const std::string& path) {
  std::ofstream out = open_out(path);
  const int n = traj.states.front().dim();
  out << "t,k";
  for (int i = 0; i < n; ++i) out << ",x_" << i;
  out << ",y,w\n";
  for (int m = 0; m < static_cast<int>(traj.states.size()); ++m) {
    const LiftedEnsemble& e = traj.at(m);
    const std::string t = format_double(traj.grid.node(m));
    for (int k = 0; k < e.size(); ++k) {
      out << t << ',' << k;
      for (int i = 0; i < n; ++i)
        out << ',' << format_double(e.positions()[static_cast<size_t>(k) * n + i]);
      out << ',' << format_double(e.mass(k)) << ',' << format_double(e.weight(k)) << '\n';
    }
  }
  if (!out) fail_io("failed writing '" + path + "'");
}

void write_moments_csv(const TrajectoryBundle& traj, const std::string& path) {
  std::ofstream out = open_out(path);
  const int n = traj.states.front().dim();
  out << "t,mass";
  for (int i = 0; i < n; ++i) out << ",mean_" << i;
  out << ",second_moment\n";
  for (int m = 0; m < static_cast<int>(traj.states.size()); ++m) {
    const LiftedEnsemble& e = traj.at(m);
    double mass = 0.0;
    Vec mean = Vec::Zero(n);
    double second = 0.0;
    for (int k = 0; k < e.size(); ++k) {
      const double w = e.weight(k) * e.mass(k);
      mass += w;
      mean += w * e.position(k);
      second += w * e.position(k).squaredNorm();
    }
    if (mass > 0.0) {
      mean /= mass;
      second /= mass;
    }
    out << format_double(traj.grid.node(m)) << ',' << format_double(mass);
    for (int i = 0; i < n; ++i) out << ',' << format_double(mean[i]);
    out << ',' << format_double(second) << '\n';
  }
  if (!out) fail_io("failed writing '" + path + "'");
}

void write_mass_csv(const TrajectoryBundle& traj, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "t,mass\n";
  const std::vector<double> mass = mass_curve(traj);
  for (int m = 0; m < static_cast<int>(mass.size()); ++m)
    out << format_double(traj.grid.node(m)) << ',' << format_double(mass[static_cast<size_t>(m)])
        << '\n';
  if (!out) fail_io("failed writing '" + path + "'");
}

void write_costates_csv(const TrajectoryBundle& traj, const CostateBundle& costates,
                        const std::string& path) {
  if (costates.nodes() != static_cast<int>(traj.states.size()))
    fail_invalid("costate csv: costates do not match the trajectory");
  std::ofstream out = open_out(path);
  const int n = traj.states.front().dim();
  out << "t,k";
  for (int i = 0; i < n; ++i) out << ",p_" << i;
  out << ",q\n";
  for (int m = 0; m < costates.nodes(); ++m) {
    const std::string t = format_double(traj.grid.node(m));
    const Mat& p = costates.p[static_cast<size_t>(m)];
    const Vec& q = costates.q[static_cast<size_t>(m)];
    for (int k = 0; k < p.rows(); ++k) {
      out << t << ',' << k;
      for (int i = 0; i < n; ++i) out << ',' << format_double(p(k, i));
      out << ',' << format_double(q[k]) << '\n';
    }
  }
  if (!out) fail_io("failed writing '" + path + "'");
}

void write_adjoint_summary_csv(const Model& model, const ControlSignal& control,
                               const TrajectoryBundle& traj, const CostateBundle& costates,
                               int u_grid, const std::string& path) {
  std::ofstream out = open_out(path);
  const int n = traj.states.front().dim();
  out << 't';
  for (int i = 1; i <= n; ++i) out << ",psi_" << i << "_total";
  out << ",xi_total,hamiltonian,residual\n";

  const std::vector<Vec> grid = control_grid(model.control_box, u_grid);
  for (int m = 0; m < traj.grid.steps; ++m) {
    const AdjointMeasures adj = adjoint_measures_at(traj, costates, m);
    const LiftedEnsemble& state = traj.at(m);
    const Mat& p = costates.p[static_cast<size_t>(m)];
    const Vec& q = costates.q[static_cast<size_t>(m)];
    const double t = traj.grid.node(m);
    const Vec& u = control.values[static_cast<size_t>(m)];
    const double applied = hamiltonian_from_costates(model, t, u, state, p, q);
    double best = applied;
    for (const Vec& v : grid)
      best = std::max(best, hamiltonian_from_costates(model, t, v, state, p, q));

    out << format_double(t);
    for (int i = 0; i < n; ++i)
      out << ',' << format_double(adj.psi[static_cast<size_t>(i)].total_mass());
    out << ',' << format_double(adj.xi.total_mass()) << ',' << format_double(applied) << ','
        << format_double(best - applied) << '\n';
  }
  if (!out) fail_io("failed writing '" + path + "'");
}

void write_report_json(const OptimizationReport& report, const std::string& path) {
  nlohmann::json j;
  j["method"] = optimizer_method_name(report.method);
  j["reason"] = report.reason;
  j["converged"] = report.converged;
  j["final_cost"] = report.final_cost;
  j["final_residual"] = report.final_residual;
  j["classification"] = extremal_class_name(report.classification);
  j["degenerate_hamiltonian"] = report.degenerate_hamiltonian;
  j["iterations"] = nlohmann::json::array();
  for (const IterateRecord& r : report.iterations)
    j["iterations"].push_back({{"iter", r.iter}, {"cost", r.cost}, {"residual", r.residual}});
  j["candidates"] = nlohmann::json::array();
  for (const BangCandidate& c : report.candidates) {
    std::vector<double> v(c.value.data(), c.value.data() + c.value.size());
    j["candidates"].push_back(
        {{"value", v}, {"cost", c.cost}, {"residual", c.residual}, {"extremal", c.extremal}});
  }
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) fail_io("failed writing '" + path + "'");
}

} // namespace nbc
