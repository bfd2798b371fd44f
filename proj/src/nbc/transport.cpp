#include "nbc/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "nbc/error.hpp"
#include "nbc/measure.hpp"

namespace nbc {

namespace {

struct Cell {
  int r = 0, c = 0;
  double flow = 0.0;
};

} // namespace

double transport_min_cost(const Mat& cost, const Vec& supply, const Vec& demand) {
  const int na = static_cast<int>(supply.size());
  const int nb = static_cast<int>(demand.size());
  if (na < 1 || nb < 1) fail_invalid("transport: empty marginal");
  if (cost.rows() != na || cost.cols() != nb) fail_invalid("transport: cost shape mismatch");
  if (!cost.allFinite() || !supply.allFinite() || !demand.allFinite())
    fail_invalid("transport: non-finite input");
  if (supply.minCoeff() < 0.0 || demand.minCoeff() < 0.0)
    fail_invalid("transport: negative marginal entry");

  const double stot = supply.sum();
  double dtot = demand.sum();
  if (std::abs(stot - dtot) > 1e-9 * std::max({stot, dtot, 1.0}))
    fail_invalid("transport: unbalanced marginals");
  if (stot <= 0.0) return 0.0;

  // absorb the rounding residual so the northwest-corner chain closes exactly
  Vec d = demand;
  int jmax = 0;
  d.maxCoeff(&jmax);
  d[jmax] += stot - dtot;
  Vec s = supply;

  std::vector<Cell> basis;
  basis.reserve(static_cast<size_t>(na + nb - 1));
  {
    int i = 0, j = 0;
    while (true) {
      double f = std::max(std::min(s[i], d[j]), 0.0);
      basis.push_back({i, j, f});
      s[i] -= f;
      d[j] -= f;
      if (i == na - 1 && j == nb - 1) break;
      if (s[i] <= 0.0 && i < na - 1)
        ++i;
      else if (j < nb - 1)
        ++j;
      else
        ++i;
    }
  }

  const double cscale = 1.0 + cost.cwiseAbs().maxCoeff();
  const double enter_tol = 1e-12 * cscale;

  std::vector<char> in_basis(static_cast<size_t>(na) * nb, 0);
  for (const Cell& cell : basis) in_basis[static_cast<size_t>(cell.r) * nb + cell.c] = 1;

  std::vector<double> u(static_cast<size_t>(na)), v(static_cast<size_t>(nb));
  std::vector<char> useen(static_cast<size_t>(na)), vseen(static_cast<size_t>(nb));
  std::vector<std::vector<int>> row_cells(static_cast<size_t>(na)), col_cells(static_cast<size_t>(nb));
  std::vector<int> stack;

  const long max_pivots = 10000L + 20L * (na + nb) * std::max(na, nb);
  long degenerate_run = 0;
  bool bland = false;

  for (long pivot = 0;; ++pivot) {
    if (pivot > max_pivots) fail_numeric("transport: pivot limit exceeded");

    // potentials from the basis tree
    for (auto& rc : row_cells) rc.clear();
    for (auto& cc : col_cells) cc.clear();
    for (int b = 0; b < static_cast<int>(basis.size()); ++b) {
      row_cells[static_cast<size_t>(basis[static_cast<size_t>(b)].r)].push_back(b);
      col_cells[static_cast<size_t>(basis[static_cast<size_t>(b)].c)].push_back(b);
    }
    std::fill(useen.begin(), useen.end(), 0);
    std::fill(vseen.begin(), vseen.end(), 0);
    u[0] = 0.0;
    useen[0] = 1;
    stack.assign(1, 0); // node ids: rows 0..na-1, cols na..na+nb-1
    while (!stack.empty()) {
      int node = stack.back();
      stack.pop_back();
      if (node < na) {
        for (int b : row_cells[static_cast<size_t>(node)]) {
          int c = basis[static_cast<size_t>(b)].c;
          if (!vseen[static_cast<size_t>(c)]) {
            vseen[static_cast<size_t>(c)] = 1;
            v[static_cast<size_t>(c)] = cost(node, c) - u[static_cast<size_t>(node)];
            stack.push_back(na + c);
          }
        }
      } else {
        int c = node - na;
        for (int b : col_cells[static_cast<size_t>(c)]) {
          int r = basis[static_cast<size_t>(b)].r;
          if (!useen[static_cast<size_t>(r)]) {
            useen[static_cast<size_t>(r)] = 1;
            u[static_cast<size_t>(r)] = cost(r, c) - v[static_cast<size_t>(c)];
            stack.push_back(r);
          }
        }
      }
    }
    for (int r = 0; r < na; ++r)
      if (!useen[static_cast<size_t>(r)]) fail_numeric("transport: basis lost connectivity");
    for (int c = 0; c < nb; ++c)
      if (!vseen[static_cast<size_t>(c)]) fail_numeric("transport: basis lost connectivity");

    // entering cell: Dantzig (most negative reduced cost), Bland after long
    // degenerate runs; ties broken lexicographically either way
    int er = -1, ec = -1;
    double best = -enter_tol;
    for (int r = 0; r < na && (!bland || er < 0); ++r) {
      for (int c = 0; c < nb; ++c) {
        if (in_basis[static_cast<size_t>(r) * nb + c]) continue;
        double red = cost(r, c) - u[static_cast<size_t>(r)] - v[static_cast<size_t>(c)];
        if (red < best) {
          best = red;
          er = r;
          ec = c;
          if (bland) break;
        }
      }
    }
    if (er < 0) break; // optimal

    // unique tree path from row er to col ec
    std::vector<int> parent_edge(static_cast<size_t>(na + nb), -1);
    std::vector<int> parent_node(static_cast<size_t>(na + nb), -1);
    std::vector<char> seen(static_cast<size_t>(na + nb), 0);
    seen[static_cast<size_t>(er)] = 1;
    stack.assign(1, er);
    while (!stack.empty()) {
      int node = stack.back();
      stack.pop_back();
      if (node == na + ec) break;
      const auto& inc = node < na ? row_cells[static_cast<size_t>(node)]
                                  : col_cells[static_cast<size_t>(node - na)];
      for (int b : inc) {
        const Cell& cell = basis[static_cast<size_t>(b)];
        int other = node < na ? na + cell.c : cell.r;
        if (!seen[static_cast<size_t>(other)]) {
          seen[static_cast<size_t>(other)] = 1;
          parent_edge[static_cast<size_t>(other)] = b;
          parent_node[static_cast<size_t>(other)] = node;
          stack.push_back(other);
        }
      }
    }
    if (!seen[static_cast<size_t>(na + ec)]) fail_numeric("transport: basis lost connectivity");

    // walk back from col ec to row er; path cells alternate -,+,-,... after the
    // entering cell, which takes +theta
    std::vector<int> path;
    for (int node = na + ec; node != er; node = parent_node[static_cast<size_t>(node)])
      path.push_back(parent_edge[static_cast<size_t>(node)]);

    double theta = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < path.size(); k += 2)
      theta = std::min(theta, basis[static_cast<size_t>(path[k])].flow);
    int leave = -1;
    for (size_t k = 0; k < path.size(); k += 2) {
      const Cell& cell = basis[static_cast<size_t>(path[k])];
      if (cell.flow == theta) {
        if (leave < 0 || cell.r < basis[static_cast<size_t>(leave)].r ||
            (cell.r == basis[static_cast<size_t>(leave)].r && cell.c < basis[static_cast<size_t>(leave)].c))
          leave = path[k];
      }
    }
    if (leave < 0) fail_numeric("transport: unbounded pivot");

    for (size_t k = 0; k < path.size(); ++k) {
      double sgn = (k % 2 == 0) ? -1.0 : 1.0;
      basis[static_cast<size_t>(path[k])].flow += sgn * theta;
    }
    Cell& slot = basis[static_cast<size_t>(leave)];
    in_basis[static_cast<size_t>(slot.r) * nb + slot.c] = 0;
    slot = {er, ec, theta};
    in_basis[static_cast<size_t>(er) * nb + ec] = 1;

    degenerate_run = theta == 0.0 ? degenerate_run + 1 : 0;
    if (degenerate_run > 2L * (na + nb) + 16L) bland = true;
  }

  std::sort(basis.begin(), basis.end(), [](const Cell& a, const Cell& b) {
    return a.r != b.r ? a.r < b.r : a.c < b.c;
  });
  double total = 0.0;
  for (const Cell& cell : basis) total += cell.flow * cost(cell.r, cell.c);
  return total;
}

} // namespace nbc
