#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "schom/macro.hpp"

namespace schom {

struct OptimizeOptions {
  int max_iters = 4;
  double initial_step = 1.0;   // scaled by 1 / max|gradient|
  int max_halvings = 10;
  double objective_decrease_tol = 1e-4;  // relative
  double gradient_tol = 1e-6;            // projected-gradient norm
};

struct OptimizationIterate {
  double objective = 0.0;
  double compliance_term = 0.0;  // gamma-weighted smooth max of compliance
  double bone_term = 0.0;        // eta-weighted bone integral
  double gradient_norm = 0.0;
  double step = 0.0;
};

struct OptimizationHistory {
  std::vector<OptimizationIterate> iterates;
  bool line_search_exhausted = false;
  std::string stop_reason;
};

struct OptimizationResult {
  ScaffoldDesign design;
  double objective = 0.0;
  OptimizationHistory history;
};

/// Componentwise clamp to the design box.
Eigen::VectorXd project_design(const Eigen::VectorXd& rho, double lower, double upper);

double evaluate_objective(const MacroSim& sim, const ScaffoldDesign& design,
                          const ObjectiveSpec& objective);

/// Discrete adjoint gradient of evaluate_objective with respect to rho.
Eigen::VectorXd gradient(const MacroSim& sim, const ScaffoldDesign& design,
                         const ObjectiveSpec& objective);

/// Projected gradient descent with a backtracking line search.
OptimizationResult optimize(const MacroSim& sim, const ScaffoldDesign& design0,
                            const ObjectiveSpec& objective, const OptimizeOptions& opts = {});

}  // namespace schom
