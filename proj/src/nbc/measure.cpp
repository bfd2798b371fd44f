#include "nbc/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nbc/transport.hpp"

namespace nbc {

namespace detail {

void require_cloud(int dim, const std::vector<double>& points, const std::vector<double>& weights,
                   bool nonneg, const char* what) {
  if (dim < 1) fail_invalid(std::string(what) + ": dimension must be positive");
  if (points.size() != weights.size() * static_cast<size_t>(dim))
    fail_invalid(std::string(what) + ": point/weight size mismatch");
  for (double x : points)
    if (!std::isfinite(x)) fail_invalid(std::string(what) + ": non-finite support point");
  for (double w : weights) {
    if (!std::isfinite(w)) fail_invalid(std::string(what) + ": non-finite weight");
    if (nonneg && w < 0.0) fail_invalid(std::string(what) + ": negative weight");
  }
}

} // namespace detail

LiftedEnsemble::LiftedEnsemble(int dim, std::vector<double> positions, std::vector<double> masses,
                               std::vector<double> weights)
    : dim_(dim), positions_(std::move(positions)), masses_(std::move(masses)),
      weights_(std::move(weights)) {
  detail::require_cloud(dim_, positions_, weights_, true, "ensemble");
  if (masses_.size() != weights_.size()) fail_invalid("ensemble: mass/weight size mismatch");
  for (double y : masses_) {
    if (!std::isfinite(y)) fail_invalid("ensemble: non-finite mass coordinate");
    if (y < 0.0) fail_invalid("ensemble: negative mass coordinate");
  }
  double wsum = 0.0;
  for (double w : weights_) wsum += w;
  if (std::abs(wsum - 1.0) > 1e-12) fail_invalid("ensemble: weights must sum to one");
}

ParticleMeasure barycentric_projection(const LiftedEnsemble& e) {
  std::vector<double> w(static_cast<size_t>(e.size()));
  for (int k = 0; k < e.size(); ++k) w[static_cast<size_t>(k)] = e.weight(k) * e.mass(k);
  return {e.dim(), e.positions(), std::move(w)};
}

ParticleMeasure product_cloud(const LiftedEnsemble& e) {
  const int n = e.dim();
  std::vector<double> pts(static_cast<size_t>(e.size()) * (n + 1));
  for (int k = 0; k < e.size(); ++k) {
    for (int i = 0; i < n; ++i)
      pts[static_cast<size_t>(k) * (n + 1) + i] = e.positions()[static_cast<size_t>(k) * n + i];
    pts[static_cast<size_t>(k) * (n + 1) + n] = e.mass(k);
  }
  return {n + 1, std::move(pts), e.weights()};
}

double support_radius(const ParticleMeasure& m) {
  double r = 0.0;
  for (int k = 0; k < m.size(); ++k)
    if (m.weight(k) != 0.0) r = std::max(r, m.point(k).norm());
  return r;
}

double support_radius(const LiftedEnsemble& e) {
  double r = 0.0;
  for (int k = 0; k < e.size(); ++k)
    if (e.weight(k) != 0.0)
      r = std::max(r, std::hypot(e.position(k).norm(), e.mass(k)));
  return r;
}

ParticleMeasure pushforward(const ParticleMeasure& m, const std::function<Vec(const Vec&)>& map) {
  if (m.size() == 0) return m;
  std::vector<double> pts;
  int out_dim = -1;
  for (int k = 0; k < m.size(); ++k) {
    Vec y = map(m.point(k));
    if (out_dim < 0) {
      out_dim = static_cast<int>(y.size());
      pts.reserve(static_cast<size_t>(m.size()) * out_dim);
    } else if (y.size() != out_dim) {
      fail_invalid("pushforward: map output dimension is not constant");
    }
    for (int i = 0; i < out_dim; ++i) pts.push_back(y[i]);
  }
  return {out_dim, std::move(pts), m.weights()};
}

SignedParticleMeasure measure_difference(const ParticleMeasure& a, const ParticleMeasure& b) {
  if (a.dim() != b.dim()) fail_invalid("measure_difference: dimension mismatch");
  std::vector<double> pts = a.points();
  pts.insert(pts.end(), b.points().begin(), b.points().end());
  std::vector<double> w = a.weights();
  for (double x : b.weights()) w.push_back(-x);
  return {a.dim(), std::move(pts), std::move(w)};
}

namespace {

// sorted-order union-find merge of coincident atoms; deterministic in the
// lexicographic order of the support, not the input order
std::pair<std::vector<double>, std::vector<double>> merge_cloud(int dim,
                                                                const std::vector<double>& points,
                                                                const std::vector<double>& weights,
                                                                double tol, bool drop_zero) {
  const int n = static_cast<int>(weights.size());
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto lex_less = [&](int a, int b) {
    for (int i = 0; i < dim; ++i) {
      double xa = points[static_cast<size_t>(a) * dim + i];
      double xb = points[static_cast<size_t>(b) * dim + i];
      if (xa != xb) return xa < xb;
    }
    return weights[static_cast<size_t>(a)] < weights[static_cast<size_t>(b)];
  };
  std::sort(order.begin(), order.end(), lex_less);

  std::vector<int> group(static_cast<size_t>(n), -1);
  std::vector<double> out_pts, out_w;
  int groups = 0;
  for (int a = 0; a < n; ++a) {
    int ka = order[static_cast<size_t>(a)];
    if (group[static_cast<size_t>(ka)] >= 0) continue;
    group[static_cast<size_t>(ka)] = groups;
    double wsum = weights[static_cast<size_t>(ka)];
    for (int b = a + 1; b < n; ++b) {
      int kb = order[static_cast<size_t>(b)];
      if (group[static_cast<size_t>(kb)] >= 0) continue;
      // sorted by the first coordinate, so we can stop once it drifts past tol
      if (points[static_cast<size_t>(kb) * dim] - points[static_cast<size_t>(ka) * dim] > tol) break;
      bool close = true;
      for (int i = 0; i < dim && close; ++i)
        close = std::abs(points[static_cast<size_t>(kb) * dim + i] -
                         points[static_cast<size_t>(ka) * dim + i]) <= tol;
      if (close) {
        group[static_cast<size_t>(kb)] = groups;
        wsum += weights[static_cast<size_t>(kb)];
      }
    }
    if (!(drop_zero && wsum == 0.0)) {
      for (int i = 0; i < dim; ++i) out_pts.push_back(points[static_cast<size_t>(ka) * dim + i]);
      out_w.push_back(wsum);
    }
    ++groups;
  }
  return {std::move(out_pts), std::move(out_w)};
}

} // namespace

SignedParticleMeasure merge_close(const SignedParticleMeasure& m, double tol) {
  auto [pts, w] = merge_cloud(m.dim(), m.points(), m.weights(), tol, true);
  return {m.dim(), std::move(pts), std::move(w)};
}

ParticleMeasure merge_close(const ParticleMeasure& m, double tol) {
  auto [pts, w] = merge_cloud(m.dim(), m.points(), m.weights(), tol, true);
  return {m.dim(), std::move(pts), std::move(w)};
}

namespace {

bool cloud_lex_less(const ParticleMeasure& a, const ParticleMeasure& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  if (a.points() != b.points()) return a.points() < b.points();
  return a.weights() < b.weights();
}

ParticleMeasure sort_cloud(const ParticleMeasure& m) {
  std::vector<int> order(static_cast<size_t>(m.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (int i = 0; i < m.dim(); ++i) {
      double xa = m.points()[static_cast<size_t>(a) * m.dim() + i];
      double xb = m.points()[static_cast<size_t>(b) * m.dim() + i];
      if (xa != xb) return xa < xb;
    }
    return m.weight(a) < m.weight(b);
  });
  std::vector<double> pts, w;
  pts.reserve(m.points().size());
  w.reserve(static_cast<size_t>(m.size()));
  for (int k : order) {
    for (int i = 0; i < m.dim(); ++i) pts.push_back(m.points()[static_cast<size_t>(k) * m.dim() + i]);
    w.push_back(m.weight(k));
  }
  return {m.dim(), std::move(pts), std::move(w)};
}

} // namespace

double w2_distance(const ParticleMeasure& a_in, const ParticleMeasure& b_in, int support_cap) {
  if (a_in.dim() != b_in.dim()) fail_invalid("w2_distance: dimension mismatch");
  ParticleMeasure a = sort_cloud(merge_close(a_in));
  ParticleMeasure b = sort_cloud(merge_close(b_in));
  const double ma = a.total_mass(), mb = b.total_mass();
  if (std::abs(ma - mb) > 1e-9 * std::max({ma, mb, 1.0}))
    fail_invalid("w2_distance: unbalanced masses");
  if (ma <= 0.0) return 0.0;
  if (a.size() > support_cap || b.size() > support_cap)
    fail_invalid("w2_distance: support too large for exact solver");
  if (cloud_lex_less(b, a)) std::swap(a, b);

  // uniform-weight 1D instances pair off by sorting
  if (a.dim() == 1 && a.size() == b.size()) {
    bool uniform = true;
    for (int k = 0; k < a.size() && uniform; ++k)
      uniform = a.weight(k) == a.weight(0) && b.weight(k) == a.weight(0);
    if (uniform) {
      double acc = 0.0;
      for (int k = 0; k < a.size(); ++k) {
        double dx = a.points()[static_cast<size_t>(k)] - b.points()[static_cast<size_t>(k)];
        acc += a.weight(k) * dx * dx;
      }
      return std::sqrt(acc);
    }
  }

  Mat cost(a.size(), b.size());
  for (int i = 0; i < a.size(); ++i)
    for (int j = 0; j < b.size(); ++j) cost(i, j) = (a.point(i) - b.point(j)).squaredNorm();
  Vec s = Eigen::Map<const Vec>(a.weights().data(), a.size());
  Vec d = Eigen::Map<const Vec>(b.weights().data(), b.size());
  return std::sqrt(std::max(transport_min_cost(cost, s, d), 0.0));
}

double flat_norm(const SignedParticleMeasure& m_in, int support_cap) {
  SignedParticleMeasure m = merge_close(m_in);
  if (m.size() == 0) return 0.0;
  if (m.size() > support_cap) fail_invalid("flat_norm: support too large for exact solver");

  std::vector<double> ppts, pw, npts, nw;
  for (int k = 0; k < m.size(); ++k) {
    if (m.weight(k) > 0.0) {
      for (int i = 0; i < m.dim(); ++i) ppts.push_back(m.points()[static_cast<size_t>(k) * m.dim() + i]);
      pw.push_back(m.weight(k));
    } else {
      for (int i = 0; i < m.dim(); ++i) npts.push_back(m.points()[static_cast<size_t>(k) * m.dim() + i]);
      nw.push_back(-m.weight(k));
    }
  }
  const int np = static_cast<int>(pw.size());
  const int nn = static_cast<int>(nw.size());
  double pmass = 0.0, nmass = 0.0;
  for (double w : pw) pmass += w;
  for (double w : nw) nmass += w;

  // sources: positive atoms plus a creator feeding the negative side; sinks:
  // negative atoms plus an annihilator absorbing the positive side; creation
  // and destruction cost 1, transport costs |x - y|, slack is free
  Mat cost(np + 1, nn + 1);
  for (int i = 0; i < np; ++i) {
    Eigen::Map<const Vec> xi(ppts.data() + static_cast<size_t>(i) * m.dim(), m.dim());
    for (int j = 0; j < nn; ++j) {
      Eigen::Map<const Vec> yj(npts.data() + static_cast<size_t>(j) * m.dim(), m.dim());
      cost(i, j) = (xi - yj).norm();
    }
    cost(i, nn) = 1.0;
  }
  for (int j = 0; j < nn; ++j) cost(np, j) = 1.0;
  cost(np, nn) = 0.0;

  Vec s(np + 1), d(nn + 1);
  for (int i = 0; i < np; ++i) s[i] = pw[static_cast<size_t>(i)];
  s[np] = nmass;
  for (int j = 0; j < nn; ++j) d[j] = nw[static_cast<size_t>(j)];
  d[nn] = pmass;
  return transport_min_cost(cost, s, d);
}

} // namespace nbc
