#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "schom/macro.hpp"

using namespace schom;

namespace {

MacroDomainConfig thin_domain(bool with_fixator) {
  MacroDomainConfig cfg;
  cfg.with_fixator = with_fixator;
  return cfg;
}

ScaffoldDesign uniform_design(const MacroDomain& dom, double rho, double k1 = 0.0) {
  ScaffoldDesign design;
  design.rho = Eigen::VectorXd::Constant(dom.defect_element_count(), rho);
  design.k1 = k1;
  return design;
}

Eigen::VectorXd zero_u(const MacroDomain& dom) {
  return Eigen::VectorXd::Zero(3 * dom.n_nodes);
}

/// Lumped nodal masses of the defect sub-mesh, rebuilt independently.
Eigen::VectorXd nodal_mass(const MacroDomain& dom) {
  Eigen::VectorXd m(dom.defect_node_count());
  const double cell = dom.h * dom.h * dom.h / 8.0;
  for (int dn = 0; dn < dom.defect_node_count(); ++dn)
    m[dn] = cell * static_cast<double>(dom.defect_node_elements[dn].size());
  return m;
}

}  // namespace

TEST_CASE("zero traction yields zero displacement and compliance") {
  MacroOptions opts;
  opts.mode = Mode::N;
  opts.axial_load = 0.0;
  opts.tangential_load = 0.0;
  const MacroDomain dom = MacroDomain::cylinder_with_fixator(thin_domain(true));
  const MacroSim sim(dom, {}, opts);
  const ScaffoldDesign design = uniform_design(dom, 0.3);
  const Eigen::VectorXd u = sim.solve_elasticity(design, sim.initial_state(), 0.0);
  CHECK(u.norm() < 1e-12);
  CHECK(sim.compliance(u) == 0.0);
}

TEST_CASE("elasticity is linear in the load; compliance is quadratic") {
  const MacroDomain dom = MacroDomain::cylinder_with_fixator(thin_domain(true));
  MacroOptions opts;
  opts.mode = Mode::N;
  MacroOptions doubled = opts;
  doubled.axial_load *= 2.0;
  doubled.tangential_load *= 2.0;

  const MacroSim sim(dom, {}, opts);
  const MacroSim sim2(dom, {}, doubled);
  const ScaffoldDesign design = uniform_design(dom, 0.3);
  const CellState state = sim.initial_state();

  const Eigen::VectorXd u = sim.solve_elasticity(design, state, 0.0);
  const Eigen::VectorXd u2 = sim2.solve_elasticity(design, state, 0.0);
  CHECK((u2 - 2.0 * u).norm() / u.norm() < 1e-9);
  CHECK(sim2.compliance(u2) == doctest::Approx(4.0 * sim.compliance(u)).epsilon(1e-9));
  CHECK(sim.compliance(u) > 0.0);  // the load does positive work
}

TEST_CASE("pure diffusion conserves mass on a closed box") {
  const MacroDomain dom = MacroDomain::box(4, 4, 4, 0.5);
  MacroOptions opts;
  opts.mode = Mode::N;
  opts.zero_reactions = true;
  opts.no_cell_dirichlet = true;
  opts.dt = 0.5;
  const MacroSim sim(dom, {}, opts);
  const ScaffoldDesign design = uniform_design(dom, 0.3);

  CellState state = sim.initial_state();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(0.0, 0.8);
  for (int i = 0; i < 4; ++i)
    for (int dn = 0; dn < dom.defect_node_count(); ++dn) state.c[i][dn] = dist(rng);

  const Eigen::VectorXd mass = nodal_mass(dom);
  const std::array<double, 4> before = {mass.dot(state.c[0]), mass.dot(state.c[1]),
                                        mass.dot(state.c[2]), mass.dot(state.c[3])};
  CellState next = state;
  for (int n = 0; n < 10; ++n) next = sim.step_cells(design, next, zero_u(dom), n * opts.dt);
  for (int i = 0; i < 4; ++i)
    CHECK(mass.dot(next.c[i]) == doctest::Approx(before[i]).epsilon(1e-8));
  // The immobile species do not move at all.
  CHECK((next.c[kCho] - state.c[kCho]).norm() == 0.0);
  CHECK((next.c[kOst] - state.c[kOst]).norm() == 0.0);
  // The mobile species do.
  CHECK((next.c[kPro] - state.c[kPro]).norm() > 1e-6);
}

TEST_CASE("1-D diffusion profile matches a fine Crank-Nicolson oracle") {
  // A 1x1xN column of elements with a z-only initial profile stays uniform in
  // the cross-section, so it must follow the 1-D heat equation with Neumann
  // ends. The oracle integrates that equation with a second-order scheme at a
  // much finer time step.
  const int nzel = 40;
  const double h = 0.25, diffusivity = 0.05, t_end = 5.0;
  const MacroDomain dom = MacroDomain::box(1, 1, nzel, h);
  MacroOptions opts;
  opts.mode = Mode::N;
  opts.zero_reactions = true;
  opts.no_cell_dirichlet = true;
  opts.dt = 0.1;
  Materials mat;
  mat.k_mig = diffusivity;
  const MacroSim sim(dom, mat, opts);
  const ScaffoldDesign design = uniform_design(dom, 0.0);  // pores only: D = k_mig

  auto profile = [&](int k) {
    const double z = k * h;
    return std::exp(-std::pow((z - 5.0) / 1.5, 2.0));
  };
  CellState state = sim.initial_state();
  for (int k = 0; k <= nzel; ++k)
    for (int node = 4 * k; node < 4 * k + 4; ++node) state.c[kPro][node] = profile(k);

  const int steps = static_cast<int>(std::round(t_end / opts.dt));
  for (int n = 0; n < steps; ++n) state = sim.step_cells(design, state, zero_u(dom), n * opts.dt);

  // Crank-Nicolson on the 1-D grid, Neumann by reflection.
  const int nn = nzel + 1;
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(nn, nn);
  for (int k = 0; k < nn; ++k) {
    if (k > 0) lap(k, k - 1) += 1.0;
    if (k < nn - 1) lap(k, k + 1) += 1.0;
    lap(k, k) -= (k == 0 || k == nn - 1) ? 1.0 : 2.0;
  }
  // Lumped end masses: the boundary row of the reflected operator is
  // 2(c1 - c0)/h^2 in the PDE limit; the finite element limit with half end
  // masses gives the same semidiscrete system.
  Eigen::VectorXd inv_mass = Eigen::VectorXd::Constant(nn, 1.0);
  inv_mass[0] = inv_mass[nn - 1] = 2.0;
  const Eigen::MatrixXd a = diffusivity / (h * h) * inv_mass.asDiagonal() * lap;

  Eigen::VectorXd c(nn);
  for (int k = 0; k < nn; ++k) c[k] = profile(k);
  const double dt_fine = 1e-3;
  const int fine_steps = static_cast<int>(std::round(t_end / dt_fine));
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(nn, nn);
  const Eigen::MatrixXd stepper =
      (id - 0.5 * dt_fine * a).partialPivLu().solve(id + 0.5 * dt_fine * a);
  for (int n = 0; n < fine_steps; ++n) c = stepper * c;

  double max_err = 0.0;
  for (int k = 0; k <= nzel; ++k) {
    // Cross-section stays uniform.
    for (int node = 4 * k + 1; node < 4 * k + 4; ++node)
      CHECK(state.c[kPro][node] == doctest::Approx(state.c[kPro][4 * k]).epsilon(1e-10));
    max_err = std::max(max_err, std::abs(state.c[kPro][4 * k] - c[k]));
  }
  CHECK(max_err < 5e-3);  // first-order in the coarse dt = 0.1
}

TEST_CASE("spatially uniform reactions follow the ODE (RK4 oracle)") {
  const MacroDomain dom = MacroDomain::box(1, 1, 1, 0.5);
  MacroOptions opts;
  opts.mode = Mode::N;
  opts.no_cell_dirichlet = true;
  opts.fixed_stimulus = 2.0;  // bone branch, frozen in time
  opts.dt = 0.01;
  const MacroSim sim(dom, {}, opts);
  const double rho = 0.3;
  const ScaffoldDesign design = uniform_design(dom, rho);

  const std::array<double, 4> c0 = {0.2, 0.1, 0.05, 0.1};
  CellState state = sim.initial_state();
  for (int i = 0; i < 4; ++i) state.c[i].setConstant(c0[i]);

  const int steps = 10;
  for (int n = 0; n < steps; ++n) state = sim.step_cells(design, state, zero_u(dom), n * opts.dt);

  // Independent ODE right-hand side from the rate constants at S = 2.
  const RateValues r = sim.rate_table()(2.0);
  const double cap = 1.0 - rho;
  auto rhs = [&](const std::array<double, 4>& c) {
    const double growth = 1.0 - (c[0] + c[1] + c[2] + c[3]) / cap;
    std::array<double, 4> out;
    for (int i = 0; i < 4; ++i) out[i] = r.prolif[i] * c[i] * growth - r.apo[i] * c[i];
    out[kPro] -= r.diff_pro * c[kPro];
    out[kFib] += r.mu_diff[0] * c[kPro];
    out[kCho] += r.mu_diff[1] * c[kPro];
    out[kOst] += r.mu_diff[2] * c[kPro];
    return out;
  };
  auto axpy = [](const std::array<double, 4>& c, double s, const std::array<double, 4>& d) {
    std::array<double, 4> out;
    for (int i = 0; i < 4; ++i) out[i] = c[i] + s * d[i];
    return out;
  };
  std::array<double, 4> c = c0;
  const double dt = 1e-4;
  for (int n = 0; n < static_cast<int>(std::round(steps * opts.dt / dt)); ++n) {
    const auto k1 = rhs(c);
    const auto k2 = rhs(axpy(c, 0.5 * dt, k1));
    const auto k3 = rhs(axpy(c, 0.5 * dt, k2));
    const auto k4 = rhs(axpy(c, dt, k3));
    for (int i = 0; i < 4; ++i) c[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  for (int i = 0; i < 4; ++i) {
    for (int dn = 0; dn < dom.defect_node_count(); ++dn)
      CHECK(state.c[i][dn] == doctest::Approx(state.c[i][0]).epsilon(1e-12));
    CHECK(state.c[i][0] == doctest::Approx(c[i]).epsilon(1e-3));
  }
}

TEST_CASE("axial stiffness of the healed column matches the series rod model") {
  // No fixator, fully ossified defect, axial load only: the column is a stack
  // of cross-sections in series, u = F sum_k h / (EA)_k with the areas counted
  // from the voxelized sections.
  MacroDomainConfig cfg = thin_domain(false);
  const MacroDomain dom = MacroDomain::cylinder_with_fixator(cfg);
  MacroOptions opts;
  opts.mode = Mode::N;
  opts.tangential_load = 0.0;
  Materials mat;
  const MacroSim sim(dom, mat, opts);

  const ScaffoldDesign design = uniform_design(dom, 0.0);
  CellState state = sim.initial_state();
  state.c[kOst].setConstant(1.0);  // defect is pure bone
  const Eigen::VectorXd u = sim.solve_elasticity(design, state, 0.0);

  // Per-layer axial stiffness from the element counts.
  const int nz = dom.nz;
  std::vector<double> ea(nz, 0.0);
  for (int e = 0; e < dom.elements(); ++e) {
    const int layer = dom.element_grid[e] / (dom.nx * dom.ny);
    double young = 0.0;
    switch (dom.element_region[e]) {
      case Region::cortical: young = mat.bone.youngs_modulus; break;
      case Region::marrow: young = mat.marrow.youngs_modulus; break;
      case Region::defect: young = mat.bone.youngs_modulus; break;  // c_ost = 1 everywhere
      default: break;
    }
    ea[layer] += young * dom.h * dom.h;
  }
  double rod_u = 0.0;
  for (int k = 0; k < nz; ++k) rod_u += opts.axial_load * dom.h / ea[k];

  // Mean axial displacement of the loaded face.
  double mean_uz = 0.0;
  int count = 0;
  for (const auto& face : dom.neumann_faces)
    for (int node : face) {
      mean_uz += u[3 * node + 2];
      ++count;
    }
  mean_uz /= count;
  CHECK(std::abs(-mean_uz - rod_u) / rod_u < 0.1);
  // The compliance equals the work of the resultant on that displacement.
  CHECK(sim.compliance(u) == doctest::Approx(-opts.axial_load * mean_uz).epsilon(0.05));
}

TEST_CASE("simulate returns a consistent trajectory") {
  MacroDomainConfig cfg = thin_domain(true);
  const MacroDomain dom = MacroDomain::cylinder_with_fixator(cfg);
  MacroOptions opts;
  opts.mode = Mode::N;
  opts.dt = 1.0;
  opts.T = 3.0;
  const MacroSim sim(dom, {}, opts);
  const ScaffoldDesign design = uniform_design(dom, 0.3, std::log(2.0) / 140.0);
  const Trajectory traj = sim.simulate(design);

  REQUIRE(traj.times.size() == 4);
  REQUIRE(traj.states.size() == 4);
  REQUIRE(traj.pre_clamp.size() == 3);
  REQUIRE(traj.displacements.size() == 4);
  REQUIRE(traj.compliance.size() == 4);
  CHECK(traj.times.back() == doctest::Approx(3.0));
  for (double c : traj.compliance) CHECK(c > 0.0);
  for (const CellState& s : traj.states)
    for (const auto& field : s.c) {
      CHECK(field.minCoeff() >= 0.0);
      CHECK(field.maxCoeff() <= 1.0);
    }
  // Progenitors infiltrate from the marrow boundary.
  CHECK(sim.defect_mean_fractions(traj.states.back())[kPro] >
        sim.defect_mean_fractions(traj.states.front())[kPro]);

  // Objective bookkeeping is consistent.
  ObjectiveSpec obj;
  obj.gamma = 2.0;
  obj.eta = 3.0;
  const auto [comp_term, bone_term] = sim.objective_terms(traj, obj);
  CHECK(sim.evaluate_objective(traj, obj) == doctest::Approx(comp_term - bone_term));
  CHECK(bone_term == doctest::Approx(3.0 * sim.defect_bone_integral(traj.states.back())));
  // The smooth max lies between the mean and the max of the selected values.
  const double c0 = traj.compliance.front(), cT = traj.compliance.back();
  CHECK(comp_term / obj.gamma <= std::max(c0, cT) * (1.0 + 1e-12));
  CHECK(comp_term / obj.gamma >= 0.5 * (c0 + cT) / std::pow(2.0, 1.0 / obj.p));
}

TEST_CASE("modes agree when the coefficient laws coincide") {
  // Zero load makes the elastic response trivial, and with identity correctors
  // on exact samples the three coupling modes evaluate identical coefficient
  // laws, so the trajectories must coincide.
  const MacroDomain dom = MacroDomain::cylinder_with_fixator(thin_domain(true));
  Materials mat;
  MacroOptions opts;
  opts.axial_load = 0.0;
  opts.tangential_load = 0.0;
  opts.dt = 1.0;
  opts.T = 10.0;

  const double rho = 0.3;
  const CoefficientTable table = analytic_table(
      {rho}, {0.0, 0.5, 1.0}, 4,
      [&](double r, double ost) -> Matrix6d {
        const Matrix6d pcl = mat.pcl.stiffness();
        return r * pcl + ost * mat.bone.stiffness() +
               mat.void_contrast * (1.0 - r - ost) * pcl;
      },
      [&](double r, double) -> Eigen::Matrix3d {
        return mat.k_mig * (1.0 - r) * Eigen::Matrix3d::Identity();
      });

  std::array<Trajectory, 3> runs;
  const Mode modes[3] = {Mode::N, Mode::ED, Mode::EDS};
  for (int m = 0; m < 3; ++m) {
    MacroOptions o = opts;
    o.mode = modes[m];
    const MacroSim sim(dom, mat, o, &table);
    runs[m] = sim.simulate(uniform_design(dom, rho));
  }
  for (int m = 1; m < 3; ++m) {
    for (int i = 0; i < 4; ++i)
      CHECK((runs[m].states.back().c[i] - runs[0].states.back().c[i]).lpNorm<Eigen::Infinity>() <
            1e-6);
    CHECK(std::abs(runs[m].compliance.back() - runs[0].compliance.back()) < 1e-12);
  }
  // The run is not degenerate: progenitors entered and differentiated.
  CHECK(runs[0].states.back().c[kPro].maxCoeff() > 1e-4);
}

TEST_CASE("modes ED and EDS require a table") {
  const MacroDomain dom = MacroDomain::box(1, 1, 1, 0.5);
  MacroOptions opts;
  opts.mode = Mode::ED;
  CHECK_THROWS_AS(MacroSim(dom, {}, opts), std::invalid_argument);
}
