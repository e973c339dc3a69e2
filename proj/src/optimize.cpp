#include "schom/optimize.hpp"

#include <cmath>

namespace schom {

Eigen::VectorXd project_design(const Eigen::VectorXd& rho, double lower, double upper) {
  return rho.cwiseMax(lower).cwiseMin(upper);
}

double evaluate_objective(const MacroSim& sim, const ScaffoldDesign& design,
                          const ObjectiveSpec& objective) {
  return sim.evaluate_objective(sim.simulate(design), objective);
}

Eigen::VectorXd gradient(const MacroSim& sim, const ScaffoldDesign& design,
                         const ObjectiveSpec& objective) {
  const Trajectory traj = sim.simulate(design);
  return sim.adjoint_gradient(design, traj, objective);
}

OptimizationResult optimize(const MacroSim& sim, const ScaffoldDesign& design0,
                            const ObjectiveSpec& objective, const OptimizeOptions& opts) {
  OptimizationResult result;
  result.design = design0;
  result.design.rho = project_design(design0.rho, design0.lower, design0.upper);

  Trajectory traj = sim.simulate(result.design);
  double value = sim.evaluate_objective(traj, objective);
  auto make_iterate = [&](const Trajectory& t, double obj, double pg_norm, double step) {
    const auto [comp, bone] = sim.objective_terms(t, objective);
    return OptimizationIterate{obj, comp, bone, pg_norm, step};
  };
  result.history.iterates.push_back(make_iterate(traj, value, 0.0, 0.0));

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    const Eigen::VectorXd g = sim.adjoint_gradient(result.design, traj, objective);
    const double ginf = g.lpNorm<Eigen::Infinity>();
    const Eigen::VectorXd projected_residual =
        result.design.rho -
        project_design(result.design.rho - g, result.design.lower, result.design.upper);
    const double pg_norm = projected_residual.norm();
    if (pg_norm < opts.gradient_tol) {
      result.history.stop_reason = "projected gradient below tolerance";
      result.history.iterates.back().gradient_norm = pg_norm;
      break;
    }

    double step = ginf > 0.0 ? opts.initial_step / ginf : opts.initial_step;
    ScaffoldDesign candidate = result.design;
    Trajectory candidate_traj;
    double candidate_value = value;
    bool accepted = false;
    for (int halving = 0; halving <= opts.max_halvings; ++halving) {
      candidate.rho = project_design(result.design.rho - step * g, result.design.lower,
                                     result.design.upper);
      candidate_traj = sim.simulate(candidate);
      candidate_value = sim.evaluate_objective(candidate_traj, objective);
      if (candidate_value < value) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      result.history.line_search_exhausted = true;
      result.history.stop_reason = "line search exhausted";
      break;
    }

    const double decrease = std::abs(value - candidate_value) /
                            std::max(std::abs(value), 1e-30);
    result.design = candidate;
    traj = std::move(candidate_traj);
    value = candidate_value;
    result.history.iterates.back().gradient_norm = pg_norm;
    result.history.iterates.push_back(make_iterate(traj, value, 0.0, step));
    if (decrease < opts.objective_decrease_tol) {
      result.history.stop_reason = "relative objective decrease below tolerance";
      break;
    }
  }
  if (result.history.stop_reason.empty()) result.history.stop_reason = "max iterations";
  result.objective = value;
  return result;
}

}  // namespace schom
