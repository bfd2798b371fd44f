#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "nbc/error.hpp"

namespace nbc {

using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using Mat = Eigen::MatrixXd;

// Hard cap on support sizes fed to the exact transportation solver.
inline constexpr int kTransportSupportCap = 200;

// Tolerance used when coalescing coincident support points before metrics.
inline constexpr double kMergeTol = 1e-12;

namespace detail {
void require_cloud(int dim, const std::vector<double>& points, const std::vector<double>& weights,
                   bool nonneg, const char* what);
}

// Finitely supported measure sum_k w_k delta_{x_k} on R^n with w_k >= 0.
class ParticleMeasure {
public:
  ParticleMeasure() = default;
  ParticleMeasure(int dim, std::vector<double> points, std::vector<double> weights)
      : dim_(dim), points_(std::move(points)), weights_(std::move(weights)) {
    detail::require_cloud(dim_, points_, weights_, true, "measure");
  }

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(weights_.size()); }
  Eigen::Map<const Vec> point(int k) const { return {points_.data() + static_cast<size_t>(k) * dim_, dim_}; }
  double weight(int k) const { return weights_[static_cast<size_t>(k)]; }
  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }

  double total_mass() const {
    double m = 0.0;
    for (double w : weights_) m += w;
    return m;
  }

  template <class Phi>
  double integrate(Phi&& phi) const {
    double acc = 0.0;
    for (int k = 0; k < size(); ++k) acc += weights_[static_cast<size_t>(k)] * phi(Vec(point(k)));
    return acc;
  }

private:
  int dim_ = 1;
  std::vector<double> points_;
  std::vector<double> weights_;
};

// Same support structure with weights of arbitrary sign (differences of measures).
class SignedParticleMeasure {
public:
  SignedParticleMeasure() = default;
  SignedParticleMeasure(int dim, std::vector<double> points, std::vector<double> weights)
      : dim_(dim), points_(std::move(points)), weights_(std::move(weights)) {
    detail::require_cloud(dim_, points_, weights_, false, "signed measure");
  }

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(weights_.size()); }
  Eigen::Map<const Vec> point(int k) const { return {points_.data() + static_cast<size_t>(k) * dim_, dim_}; }
  double weight(int k) const { return weights_[static_cast<size_t>(k)]; }
  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }

  double total_mass() const {
    double m = 0.0;
    for (double w : weights_) m += w;
    return m;
  }
  double total_variation() const {
    double m = 0.0;
    for (double w : weights_) m += std::abs(w);
    return m;
  }

  template <class Phi>
  double integrate(Phi&& phi) const {
    double acc = 0.0;
    for (int k = 0; k < size(); ++k) acc += weights_[static_cast<size_t>(k)] * phi(Vec(point(k)));
    return acc;
  }

private:
  int dim_ = 1;
  std::vector<double> points_;
  std::vector<double> weights_;
};

// Particle representation of a compactly supported probability on R^n x [0, inf):
// atoms (x_k, y_k) with probability weights w_k (sum w = 1, y_k >= 0).
// Projects to the state measure sum_k w_k y_k delta_{x_k}.
class LiftedEnsemble {
public:
  LiftedEnsemble() = default;
  LiftedEnsemble(int dim, std::vector<double> positions, std::vector<double> masses,
                 std::vector<double> weights);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(weights_.size()); }
  Eigen::Map<const Vec> position(int k) const {
    return {positions_.data() + static_cast<size_t>(k) * dim_, dim_};
  }
  double mass(int k) const { return masses_[static_cast<size_t>(k)]; }
  double weight(int k) const { return weights_[static_cast<size_t>(k)]; }
  const std::vector<double>& positions() const { return positions_; }
  const std::vector<double>& masses() const { return masses_; }
  const std::vector<double>& weights() const { return weights_; }

private:
  int dim_ = 1;
  std::vector<double> positions_;
  std::vector<double> masses_;
  std::vector<double> weights_;
};

// sum w_k y_k delta_{x_k}; weights nonnegative by construction.
ParticleMeasure barycentric_projection(const LiftedEnsemble& e);

// The ensemble viewed as a probability cloud on R^{n+1} (y appended as last coordinate).
ParticleMeasure product_cloud(const LiftedEnsemble& e);

// max_k |x_k| over atoms with nonzero weight (0 for the zero measure).
double support_radius(const ParticleMeasure& m);
double support_radius(const LiftedEnsemble& e);

// Image measure: same weights at mapped points.
ParticleMeasure pushforward(const ParticleMeasure& m, const std::function<Vec(const Vec&)>& map);

SignedParticleMeasure measure_difference(const ParticleMeasure& a, const ParticleMeasure& b);

// Coalesces support points that coincide within tol (max-norm) by summing weights.
// Atoms whose merged weight is exactly zero are dropped.
SignedParticleMeasure merge_close(const SignedParticleMeasure& m, double tol = kMergeTol);
ParticleMeasure merge_close(const ParticleMeasure& m, double tol = kMergeTol);

// Exact 2-Wasserstein distance between equal-mass measures (relative mass
// mismatch beyond 1e-9 is an error). Uniform-weight 1D instances are solved by
// sorting; everything else goes through the exact transportation simplex.
double w2_distance(const ParticleMeasure& a, const ParticleMeasure& b,
                   int support_cap = kTransportSupportCap);

// Exact flat norm (dual bounded-Lipschitz, Lipschitz and sup bounds both 1),
// computed as a balanced transportation problem where mass may be transported
// between the positive and negative parts or created/destroyed at unit cost.
double flat_norm(const SignedParticleMeasure& m, int support_cap = kTransportSupportCap);

} // namespace nbc
