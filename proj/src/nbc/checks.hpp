#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nbc/optimize.hpp"

namespace nbc {

struct CheckItem {
  std::string name;
  double worst = 0.0; // worst-case discrepancy observed
  double tol = 0.0;
  bool passed = false;
  std::string detail;
};

struct CheckSetup {
  const Model* model = nullptr;
  std::optional<ParticleMeasure> theta; // default: seeded random cloud
  TimeGrid grid{1.0, 50};
  Integrator method = Integrator::rk4;
  int u_grid = 101;
  std::uint64_t seed = 1;
};

inline const std::vector<std::string>& check_suite_names() {
  static const std::vector<std::string> names = {
      "derivatives", "gradient", "weak-form", "hamiltonian-equivalence", "lipschitz-beta"};
  return names;
}

// derivatives: every model callback against central finite differences of its
//   parent, plus the flat/lifted derivative limits of the cost and the source.
// gradient: control_gradient against central finite differences of the cost.
// weak-form: the distributional residual shrinks at second order in the step.
// hamiltonian-equivalence: particle and adjoint-measure Hamiltonians agree.
// lipschitz-beta: flat distance of projections bounded by 2b W2 of ensembles.
std::vector<CheckItem> run_check_suite(const std::string& suite, const CheckSetup& setup);

bool all_passed(const std::vector<CheckItem>& items);
std::string render_check_table(const std::vector<CheckItem>& items);

} // namespace nbc
