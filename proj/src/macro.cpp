#include "schom/macro.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace schom {

namespace {

constexpr double kGeomTol = 1e-9;

std::array<double, 4> reaction(const RateValues& r, const double* c, double cap) {
  const double s = c[0] + c[1] + c[2] + c[3];
  const double growth = 1.0 - s / cap;
  std::array<double, 4> out;
  for (int i = 0; i < 4; ++i) out[i] = r.prolif[i] * c[i] * growth - r.apo[i] * c[i];
  out[kPro] -= r.diff_pro * c[kPro];
  out[kFib] += r.mu_diff[0] * c[kPro];
  out[kCho] += r.mu_diff[1] * c[kPro];
  out[kOst] += r.mu_diff[2] * c[kPro];
  return out;
}

Vector6d frobenius_voigt(const Eigen::Matrix3d& g) {
  Vector6d v;
  v << g(0, 0), g(1, 1), g(2, 2), g(1, 2), g(0, 2), g(0, 1);
  return v;
}

}  // namespace

MacroDomain MacroDomain::cylinder_with_fixator(const MacroDomainConfig& cfg) {
  MacroDomain dom;
  dom.h = cfg.h;
  const double bar_outer = cfg.radius + cfg.bar_gap + cfg.bar_thickness;
  const double xmin = -cfg.radius - cfg.h;
  const double xmax = (cfg.with_fixator ? bar_outer : cfg.radius) + cfg.h;
  const double half_y = std::max(cfg.radius, cfg.with_fixator ? cfg.bar_half_width : 0.0) + cfg.h;

  dom.nx = static_cast<int>(std::ceil((xmax - xmin) / cfg.h - kGeomTol));
  dom.ny = static_cast<int>(std::ceil(2.0 * half_y / cfg.h - kGeomTol));
  dom.nz = static_cast<int>(std::round(cfg.length / cfg.h));
  dom.origin = Eigen::Vector3d(xmin, -half_y, 0.0);

  auto classify = [&](const Eigen::Vector3d& c) {
    const double r = std::hypot(c.x(), c.y());
    const bool in_bone = r <= cfg.radius + kGeomTol;
    if (cfg.with_fixator) {
      const bool nail_band = std::abs(c.y()) <= cfg.nail_half_width &&
                             (in_bone || (c.x() >= cfg.radius && c.x() <= bar_outer + kGeomTol));
      if (nail_band)
        for (double z : cfg.nail_z)
          if (std::abs(c.z() - z) <= cfg.nail_half_length) return Region::nail;
      if (c.x() >= cfg.radius + cfg.bar_gap - kGeomTol && c.x() <= bar_outer + kGeomTol &&
          std::abs(c.y()) <= cfg.bar_half_width + kGeomTol && c.z() >= cfg.bar_z0 - kGeomTol &&
          c.z() <= cfg.bar_z1 + kGeomTol)
        return Region::fixator;
    }
    if (!in_bone) return Region::outside;
    if (c.z() >= cfg.defect_start - kGeomTol && c.z() <= cfg.defect_end + kGeomTol)
      return Region::defect;
    return r <= cfg.marrow_radius + kGeomTol ? Region::marrow : Region::cortical;
  };

  const int nnx = dom.nx + 1, nny = dom.ny + 1;
  auto grid_node = [&](int i, int j, int k) { return i + nnx * (j + nny * k); };

  std::vector<Region> grid_region(static_cast<std::size_t>(dom.nx) * dom.ny * dom.nz,
                                  Region::outside);
  for (int k = 0; k < dom.nz; ++k)
    for (int j = 0; j < dom.ny; ++j)
      for (int i = 0; i < dom.nx; ++i) {
        const Eigen::Vector3d c =
            dom.origin + cfg.h * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5);
        grid_region[i + dom.nx * (j + static_cast<std::size_t>(dom.ny) * k)] = classify(c);
      }

  std::vector<int> node_map(static_cast<std::size_t>(nnx) * nny * (dom.nz + 1), -1);
  for (int k = 0; k < dom.nz; ++k)
    for (int j = 0; j < dom.ny; ++j)
      for (int i = 0; i < dom.nx; ++i) {
        const Region reg = grid_region[i + dom.nx * (j + static_cast<std::size_t>(dom.ny) * k)];
        if (reg == Region::outside) continue;
        const int ge = i + dom.nx * (j + dom.ny * k);
        dom.element_region.push_back(reg);
        dom.element_grid.push_back(ge);
        dom.element_center.push_back(dom.origin +
                                     cfg.h * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5));
        std::array<int, 8> nodes;
        for (int l = 0; l < 8; ++l) {
          const int gi = grid_node(i + (l & 1), j + ((l >> 1) & 1), k + ((l >> 2) & 1));
          if (node_map[gi] < 0) {
            node_map[gi] = dom.n_nodes++;
            dom.node_position.push_back(
                dom.origin + cfg.h * Eigen::Vector3d(i + (l & 1), j + ((l >> 1) & 1),
                                                     k + ((l >> 2) & 1)));
          }
          nodes[l] = node_map[gi];
        }
        dom.element_nodes.push_back(nodes);

        if (k == 0)
          for (int l = 0; l < 4; ++l) dom.clamped_nodes.push_back(nodes[l]);
        if (k == dom.nz - 1 && reg == Region::cortical) {
          dom.neumann_faces.push_back({nodes[4], nodes[5], nodes[6], nodes[7]});
          dom.neumann_area += cfg.h * cfg.h;
        }
      }
  std::sort(dom.clamped_nodes.begin(), dom.clamped_nodes.end());
  dom.clamped_nodes.erase(std::unique(dom.clamped_nodes.begin(), dom.clamped_nodes.end()),
                          dom.clamped_nodes.end());

  // Defect sub-mesh and boundary adjacency.
  dom.defect_element_index.assign(dom.elements(), -1);
  dom.node_defect_index.assign(dom.n_nodes, -1);
  std::vector<char> touches_marrow(dom.n_nodes, 0), touches_cortical(dom.n_nodes, 0);
  for (int e = 0; e < dom.elements(); ++e) {
    const Region reg = dom.element_region[e];
    for (int node : dom.element_nodes[e]) {
      if (reg == Region::marrow) touches_marrow[node] = 1;
      if (reg == Region::cortical) touches_cortical[node] = 1;
    }
    if (reg != Region::defect) continue;
    dom.defect_element_index[e] = static_cast<int>(dom.defect_elements.size());
    dom.defect_elements.push_back(e);
    for (int node : dom.element_nodes[e])
      if (dom.node_defect_index[node] < 0) {
        dom.node_defect_index[node] = static_cast<int>(dom.defect_nodes.size());
        dom.defect_nodes.push_back(node);
      }
  }
  dom.defect_node_elements.resize(dom.defect_nodes.size());
  for (int de = 0; de < dom.defect_element_count(); ++de)
    for (int node : dom.element_nodes[dom.defect_elements[de]])
      dom.defect_node_elements[dom.node_defect_index[node]].push_back(de);

  // Periosteal nodes: the lateral free surface of the defect, where the
  // progenitor supply is prescribed alongside the exposed marrow.
  std::vector<char> periosteal(dom.n_nodes, 0);
  constexpr int kFaceNodes[4][4] = {
      {0, 2, 4, 6}, {1, 3, 5, 7}, {0, 1, 4, 5}, {2, 3, 6, 7}};  // -x, +x, -y, +y
  for (int e = 0; e < dom.elements(); ++e) {
    if (dom.element_region[e] != Region::defect) continue;
    const int ge = dom.element_grid[e];
    const int i = ge % dom.nx, j = (ge / dom.nx) % dom.ny, k = ge / (dom.nx * dom.ny);
    const int di[4] = {-1, 1, 0, 0}, dj[4] = {0, 0, -1, 1};
    for (int f = 0; f < 4; ++f) {
      const int ni = i + di[f], nj = j + dj[f];
      const bool open =
          ni < 0 || ni >= dom.nx || nj < 0 || nj >= dom.ny ||
          grid_region[ni + dom.nx * (nj + static_cast<std::size_t>(dom.ny) * k)] ==
              Region::outside;
      if (!open) continue;
      for (int l : kFaceNodes[f]) periosteal[dom.element_nodes[e][l]] = 1;
    }
  }

  for (int dn = 0; dn < dom.defect_node_count(); ++dn) {
    const int node = dom.defect_nodes[dn];
    if (touches_marrow[node] || periosteal[node])
      dom.pro_dirichlet.push_back(dn);
    else if (touches_cortical[node])
      dom.ost_dirichlet.push_back(dn);
  }
  return dom;
}

MacroDomain MacroDomain::box(int nx, int ny, int nz, double h) {
  MacroDomain dom;
  dom.nx = nx;
  dom.ny = ny;
  dom.nz = nz;
  dom.h = h;
  const int nnx = nx + 1, nny = ny + 1;
  dom.n_nodes = nnx * nny * (nz + 1);
  dom.node_position.resize(dom.n_nodes);
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i)
        dom.node_position[i + nnx * (j + nny * k)] = h * Eigen::Vector3d(i, j, k);

  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        dom.element_region.push_back(Region::defect);
        dom.element_grid.push_back(i + nx * (j + ny * k));
        dom.element_center.push_back(h * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5));
        std::array<int, 8> nodes;
        for (int l = 0; l < 8; ++l)
          nodes[l] = (i + (l & 1)) + nnx * ((j + ((l >> 1) & 1)) + nny * (k + ((l >> 2) & 1)));
        dom.element_nodes.push_back(nodes);
      }

  dom.defect_element_index.resize(dom.elements());
  dom.node_defect_index.resize(dom.n_nodes);
  for (int e = 0; e < dom.elements(); ++e) {
    dom.defect_element_index[e] = e;
    dom.defect_elements.push_back(e);
  }
  for (int n = 0; n < dom.n_nodes; ++n) {
    dom.node_defect_index[n] = n;
    dom.defect_nodes.push_back(n);
  }
  dom.defect_node_elements.resize(dom.n_nodes);
  for (int de = 0; de < dom.defect_element_count(); ++de)
    for (int node : dom.element_nodes[de]) dom.defect_node_elements[node].push_back(de);
  return dom;
}

namespace {

std::vector<int> elastic_dofs(const MacroDomain& dom) {
  std::vector<int> dofs;
  dofs.reserve(static_cast<std::size_t>(dom.elements()) * 24);
  for (int e = 0; e < dom.elements(); ++e)
    for (int node : dom.element_nodes[e])
      for (int d = 0; d < 3; ++d) dofs.push_back(3 * node + d);
  return dofs;
}

std::vector<int> diffusion_dofs(const MacroDomain& dom) {
  std::vector<int> dofs;
  dofs.reserve(static_cast<std::size_t>(dom.defect_element_count()) * 8);
  for (int e : dom.defect_elements)
    for (int node : dom.element_nodes[e]) dofs.push_back(dom.node_defect_index[node]);
  return dofs;
}

}  // namespace

MacroSim::MacroSim(const MacroDomain& domain, const Materials& materials,
                   const MacroOptions& options, const CoefficientTable* table)
    : dom_(domain),
      mat_(materials),
      opts_(options),
      table_(table),
      basis_(domain.h),
      rates_(options.sharpness),
      elastic_(3 * domain.n_nodes, elastic_dofs(domain), 24),
      diffusion_(domain.defect_node_count(), diffusion_dofs(domain), 8) {
  if ((opts_.mode == Mode::ED || opts_.mode == Mode::EDS) && table_ == nullptr)
    throw std::invalid_argument("modes ED and EDS need a coefficient table");

  fixed_ke_[static_cast<int>(Region::cortical)] = basis_.stiffness(mat_.bone.stiffness());
  fixed_ke_[static_cast<int>(Region::marrow)] = basis_.stiffness(mat_.marrow.stiffness());
  fixed_ke_[static_cast<int>(Region::fixator)] = basis_.stiffness(mat_.peek.stiffness());
  fixed_ke_[static_cast<int>(Region::nail)] = basis_.stiffness(mat_.titanium.stiffness());

  for (int node : dom_.clamped_nodes)
    for (int d = 0; d < 3; ++d) elastic_dirichlet_.push_back(3 * node + d);

  force_ = Eigen::VectorXd::Zero(3 * dom_.n_nodes);
  if (!dom_.neumann_faces.empty()) {
    const Eigen::Vector3d traction =
        Eigen::Vector3d(-opts_.tangential_load, opts_.tangential_load, -opts_.axial_load) /
        dom_.neumann_area;
    const double w = dom_.h * dom_.h / 4.0;
    for (const auto& face : dom_.neumann_faces)
      for (int node : face) force_.segment<3>(3 * node) += w * traction;
  }
  for (int d : elastic_dirichlet_) force_[d] = 0.0;

  node_mass_ = Eigen::VectorXd::Zero(dom_.defect_node_count());
  for (int dn = 0; dn < dom_.defect_node_count(); ++dn)
    node_mass_[dn] = basis_.lumped_mass() * dom_.defect_node_elements[dn].size();
}

CellState MacroSim::initial_state() const {
  CellState state;
  for (auto& field : state.c) field = Eigen::VectorXd::Zero(dom_.defect_node_count());
  impose_cell_dirichlet(state);
  return state;
}

void MacroSim::impose_cell_dirichlet(CellState& state) const {
  if (opts_.no_cell_dirichlet) return;
  for (int dn : dom_.pro_dirichlet) state.c[kPro][dn] = opts_.pro_boundary;
  for (int dn : dom_.ost_dirichlet) state.c[kOst][dn] = 1.0;
}

MacroSim::StiffnessLaw MacroSim::stiffness_law(double rho_eff, double ost,
                                               bool with_derivs) const {
  StiffnessLaw law;
  if (opts_.mode == Mode::N) {
    const Matrix6d pcl = mat_.pcl.stiffness();
    const Matrix6d bone = mat_.bone.stiffness();
    law.c = rho_eff * pcl + ost * bone + mat_.void_contrast * (1.0 - rho_eff - ost) * pcl;
    if (with_derivs) {
      law.d_rho = pcl - mat_.void_contrast * pcl;
      law.d_ost = bone - mat_.void_contrast * pcl;
    }
    return law;
  }
  const std::size_t idx = lookup_index(*table_, rho_eff, ost);
  law.c = table_->records[idx].stiffness;
  if (with_derivs) {
    law.d_rho.setZero();
    law.d_ost.setZero();
    const NeighborDiff nr = rho_neighbors(*table_, idx);
    if (nr.valid) law.d_rho = (nr.plus->stiffness - nr.minus->stiffness) / nr.h;
    const NeighborDiff no = ost_neighbors(*table_, idx);
    if (no.valid) law.d_ost = (no.plus->stiffness - no.minus->stiffness) / no.h;
  }
  return law;
}

MacroSim::DiffusivityLaw MacroSim::diffusivity_law(double rho_eff, double ost,
                                                   bool with_derivs) const {
  DiffusivityLaw law;
  law.d_rho.setZero();
  law.d_ost.setZero();
  if (opts_.mode == Mode::N) {
    law.d = mat_.k_mig * (1.0 - rho_eff) * Eigen::Matrix3d::Identity();
    if (with_derivs) law.d_rho = -mat_.k_mig * Eigen::Matrix3d::Identity();
    return law;
  }
  const std::size_t idx = lookup_index(*table_, rho_eff, ost);
  law.d = table_->records[idx].diffusivity;
  if (with_derivs) {
    const NeighborDiff nr = rho_neighbors(*table_, idx);
    if (nr.valid) law.d_rho = (nr.plus->diffusivity - nr.minus->diffusivity) / nr.h;
    const NeighborDiff no = ost_neighbors(*table_, idx);
    if (no.valid) law.d_ost = (no.plus->diffusivity - no.minus->diffusivity) / no.h;
  }
  return law;
}

MacroSim::ElementRates MacroSim::element_rates(double rho_eff, double ost,
                                               const Eigen::Matrix3d& eps,
                                               bool with_derivs) const {
  ElementRates out;
  out.d_eps.fill(Eigen::Matrix3d::Zero());
  out.d_rho.fill(0.0);
  out.d_ost.fill(0.0);

  if (opts_.fixed_stimulus >= 0.0) {
    out.r = rates_(opts_.fixed_stimulus);
    return out;
  }

  if (opts_.mode != Mode::EDS) {
    const double g = gamma_oct(eps);
    out.r = rates_(g);
    if (with_derivs && g > kStimulusSingular) {
      const RateValues d = rates_.derivative(g);
      const Eigen::Matrix3d dg = gamma_oct_gradient(eps);
      for (int r = 0; r < RateValues::kCount; ++r) out.d_eps[r] = d.flat(r) * dg;
    }
    return out;
  }

  const std::size_t idx = lookup_index(*table_, rho_eff, ost);
  const CorrectorField& g = table_->records[idx].corrector;
  out.r = hom_rates(g, eps, rates_);
  if (with_derivs) {
    out.d_eps = hom_rates_d_strain(g, eps, rates_);
    const NeighborDiff nr = rho_neighbors(*table_, idx);
    if (nr.valid)
      out.d_rho = hom_rates_d_density(g, nr.plus->corrector, nr.minus->corrector, nr.h, eps,
                                      rates_);
    const NeighborDiff no = ost_neighbors(*table_, idx);
    if (no.valid)
      out.d_ost = hom_rates_d_density(g, no.plus->corrector, no.minus->corrector, no.h, eps,
                                      rates_);
  }
  return out;
}

Eigen::VectorXd MacroSim::element_ost(const CellState& state) const {
  Eigen::VectorXd out(dom_.defect_element_count());
  for (int de = 0; de < dom_.defect_element_count(); ++de) {
    double s = 0.0;
    for (int node : dom_.element_nodes[dom_.defect_elements[de]])
      s += state.c[kOst][dom_.node_defect_index[node]];
    out[de] = s / 8.0;
  }
  return out;
}

Eigen::VectorXd MacroSim::node_rho(const Eigen::VectorXd& rho) const {
  Eigen::VectorXd out(dom_.defect_node_count());
  for (int dn = 0; dn < dom_.defect_node_count(); ++dn) {
    double s = 0.0;
    for (int de : dom_.defect_node_elements[dn]) s += rho[de];
    out[dn] = s / dom_.defect_node_elements[dn].size();
  }
  return out;
}

Eigen::Matrix<double, 24, 1> MacroSim::gather_displacement(int active_element,
                                                           const Eigen::VectorXd& u) const {
  Eigen::Matrix<double, 24, 1> ue;
  const auto& nodes = dom_.element_nodes[active_element];
  for (int l = 0; l < 8; ++l) ue.segment<3>(3 * l) = u.segment<3>(3 * nodes[l]);
  return ue;
}

Eigen::Matrix3d MacroSim::element_strain(int defect_element, const Eigen::VectorXd& u) const {
  const Vector6d eng =
      basis_.strain_matrix() * gather_displacement(dom_.defect_elements[defect_element], u);
  return from_voigt_strain(eng);
}

void MacroSim::assemble_elasticity(const ScaffoldDesign& design, const Eigen::VectorXd& ost_e,
                                   double sigma) const {
  elastic_.begin();
  for (int e = 0; e < dom_.elements(); ++e) {
    const Region reg = dom_.element_region[e];
    if (reg == Region::defect) {
      const int de = dom_.defect_element_index[e];
      const StiffnessLaw law = stiffness_law(sigma * design.rho[de], ost_e[de], false);
      elastic_.add(e, basis_.stiffness(law.c));
    } else {
      elastic_.add(e, fixed_ke_[static_cast<int>(reg)]);
    }
  }
}

Eigen::VectorXd MacroSim::solve_elastic_system(Eigen::VectorXd rhs) const {
  std::vector<double> zeros(elastic_dirichlet_.size(), 0.0);
  apply_dirichlet(elastic_.matrix(), rhs, elastic_dirichlet_, zeros);
  if (!elastic_analyzed_) {
    elastic_solver_.analyzePattern(elastic_.matrix());
    elastic_analyzed_ = true;
  }
  elastic_solver_.factorize(elastic_.matrix());
  if (elastic_solver_.info() != Eigen::Success)
    throw std::runtime_error("elastic system factorization failed (singular domain?)");
  return elastic_solver_.solve(rhs);
}

Eigen::VectorXd MacroSim::solve_elasticity(const ScaffoldDesign& design, const CellState& state,
                                           double time) const {
  assemble_elasticity(design, element_ost(state), design.decay(time));
  return solve_elastic_system(force_);
}

CellState MacroSim::step_cells(const ScaffoldDesign& design, const CellState& state,
                               const Eigen::VectorXd& u, double time,
                               CellState* pre_clamp) const {
  const double sigma = design.decay(time);
  const double dt = opts_.dt;
  const int nn = dom_.defect_node_count();
  const Eigen::VectorXd ost_e = element_ost(state);

  // Homogenized rates per element, averaged onto nodes.
  std::vector<RateValues> node_rates(nn);
  if (!opts_.zero_reactions) {
    std::vector<RateValues> elem_rates(dom_.defect_element_count());
    for (int de = 0; de < dom_.defect_element_count(); ++de)
      elem_rates[de] =
          element_rates(sigma * design.rho[de], ost_e[de], element_strain(de, u), false).r;
    for (int dn = 0; dn < nn; ++dn) {
      const auto& adj = dom_.defect_node_elements[dn];
      for (int de : adj)
        for (int r = 0; r < RateValues::kCount; ++r)
          node_rates[dn].flat(r) += elem_rates[de].flat(r) / adj.size();
    }
  }

  const Eigen::VectorXd rho_n = node_rho(design.rho);
  CellState y;
  for (int i = 0; i < 4; ++i) y.c[i] = state.c[i];
  if (!opts_.zero_reactions) {
    for (int dn = 0; dn < nn; ++dn) {
      const double cap = 1.0 - sigma * rho_n[dn];
      double c[4] = {state.c[0][dn], state.c[1][dn], state.c[2][dn], state.c[3][dn]};
      const auto r = reaction(node_rates[dn], c, cap);
      for (int i = 0; i < 4; ++i) y.c[i][dn] += dt * r[i];
    }
  }

  // Implicit diffusion for the mobile species (progenitors and fibroblasts
  // share the diffusion coefficient).
  diffusion_.begin();
  for (int de = 0; de < dom_.defect_element_count(); ++de) {
    const DiffusivityLaw law = diffusivity_law(sigma * design.rho[de], ost_e[de], false);
    diffusion_.add(de, dt * basis_.diffusion(law.d));
  }
  for (int dn = 0; dn < nn; ++dn) diffusion_.matrix().coeffRef(dn, dn) += node_mass_[dn];

  CellState next;
  for (int species : {kPro, kFib}) {
    Eigen::SparseMatrix<double> a = diffusion_.matrix();
    Eigen::VectorXd rhs = node_mass_.cwiseProduct(y.c[species]);
    if (species == kPro && !opts_.no_cell_dirichlet) {
      std::vector<double> values(dom_.pro_dirichlet.size(), opts_.pro_boundary);
      apply_dirichlet(a, rhs, dom_.pro_dirichlet, values);
    }
    if (!diffusion_analyzed_) {
      diffusion_solver_.analyzePattern(a);
      diffusion_analyzed_ = true;
    }
    diffusion_solver_.factorize(a);
    if (diffusion_solver_.info() != Eigen::Success)
      throw std::runtime_error("cell diffusion factorization failed");
    next.c[species] = diffusion_solver_.solve(rhs);
  }
  next.c[kCho] = y.c[kCho];
  next.c[kOst] = y.c[kOst];
  impose_cell_dirichlet(next);

  if (pre_clamp) *pre_clamp = next;
  for (auto& field : next.c) field = field.cwiseMax(0.0).cwiseMin(1.0);
  return next;
}

Trajectory MacroSim::simulate(const ScaffoldDesign& design, const CellState* initial) const {
  const int steps = static_cast<int>(std::round(opts_.T / opts_.dt));
  Trajectory traj;
  CellState state = initial ? *initial : initial_state();
  traj.states.push_back(state);
  traj.times.push_back(0.0);
  for (int n = 0; n < steps; ++n) {
    const double t = n * opts_.dt;
    Eigen::VectorXd u = solve_elasticity(design, state, t);
    traj.compliance.push_back(compliance(u));
    traj.displacements.push_back(std::move(u));
    CellState pre;
    state = step_cells(design, state, traj.displacements.back(), t, &pre);
    traj.pre_clamp.push_back(std::move(pre));
    traj.states.push_back(state);
    traj.times.push_back((n + 1) * opts_.dt);
  }
  Eigen::VectorXd u = solve_elasticity(design, state, steps * opts_.dt);
  traj.compliance.push_back(compliance(u));
  traj.displacements.push_back(std::move(u));
  return traj;
}

double MacroSim::defect_bone_integral(const CellState& state) const {
  return node_mass_.dot(state.c[kOst]);
}

std::array<double, 4> MacroSim::defect_mean_fractions(const CellState& state) const {
  const double total = node_mass_.sum();
  std::array<double, 4> out;
  for (int i = 0; i < 4; ++i) out[i] = node_mass_.dot(state.c[i]) / total;
  return out;
}

Eigen::VectorXd MacroSim::element_stimulus(const ScaffoldDesign& design, const CellState& state,
                                           const Eigen::VectorXd& u, double time) const {
  const double sigma = design.decay(time);
  const Eigen::VectorXd ost_e = element_ost(state);
  Eigen::VectorXd out(dom_.defect_element_count());
  for (int de = 0; de < dom_.defect_element_count(); ++de) {
    const Eigen::Matrix3d eps = element_strain(de, u);
    if (opts_.mode != Mode::EDS) {
      out[de] = gamma_oct(eps);
    } else {
      const CorrectorField& g =
          table_->records[lookup_index(*table_, sigma * design.rho[de], ost_e[de])].corrector;
      double acc = 0.0;
      for (std::size_t v = 0; v < g.voxels(); ++v) acc += gamma_oct(g.apply(v, eps));
      out[de] = acc / static_cast<double>(g.voxels());
    }
  }
  return out;
}

Eigen::VectorXd MacroSim::element_energy(const ScaffoldDesign& design, const CellState& state,
                                         const Eigen::VectorXd& u, double time) const {
  const double sigma = design.decay(time);
  const Eigen::VectorXd ost_e = element_ost(state);
  Eigen::VectorXd out(dom_.defect_element_count());
  for (int de = 0; de < dom_.defect_element_count(); ++de) {
    const StiffnessLaw law = stiffness_law(sigma * design.rho[de], ost_e[de], false);
    const Vector6d eng =
        basis_.strain_matrix() * gather_displacement(dom_.defect_elements[de], u);
    out[de] = 0.5 * eng.dot(law.c * eng);
  }
  return out;
}

namespace {

struct SmoothMax {
  std::vector<int> steps;       // indices into the compliance series
  std::vector<double> values;   // compliance at those steps
  double phi = 0.0;

  SmoothMax(const Trajectory& traj, const ObjectiveSpec& obj) {
    if (obj.at_initial) steps.push_back(0);
    if (obj.at_final) steps.push_back(static_cast<int>(traj.compliance.size()) - 1);
    for (int s : steps) values.push_back(traj.compliance[s]);
    if (values.empty()) return;
    double acc = 0.0;
    for (double v : values) acc += std::pow(std::abs(v), obj.p);
    phi = std::pow(acc / values.size(), 1.0 / obj.p);
  }

  double derivative(std::size_t k, const ObjectiveSpec& obj) const {
    if (phi <= 0.0) return 0.0;
    return std::pow(std::abs(values[k]) / phi, obj.p - 1.0) / values.size();
  }
};

}  // namespace

double MacroSim::evaluate_objective(const Trajectory& traj, const ObjectiveSpec& objective) const {
  const auto [compliance_term, bone_term] = objective_terms(traj, objective);
  return compliance_term - bone_term;
}

std::pair<double, double> MacroSim::objective_terms(const Trajectory& traj,
                                                    const ObjectiveSpec& objective) const {
  const SmoothMax sm(traj, objective);
  return {objective.gamma * sm.phi,
          objective.eta * defect_bone_integral(traj.states.back())};
}

Eigen::VectorXd MacroSim::adjoint_gradient(const ScaffoldDesign& design, const Trajectory& traj,
                                           const ObjectiveSpec& objective) const {
  const int steps = static_cast<int>(traj.pre_clamp.size());
  const int nn = dom_.defect_node_count();
  const int nel = dom_.defect_element_count();
  const double dt = opts_.dt;
  const SmoothMax sm(traj, objective);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(nel);
  std::array<Eigen::VectorXd, 4> lambda;
  for (auto& l : lambda) l = Eigen::VectorXd::Zero(nn);
  lambda[kOst] = -objective.eta * node_mass_;

  const Eigen::VectorXd rho_n = node_rho(design.rho);

  // Cotangent weights on the compliance entries.
  auto compliance_weight = [&](int step) {
    for (std::size_t k = 0; k < sm.steps.size(); ++k)
      if (sm.steps[k] == step) return objective.gamma * sm.derivative(k, objective);
    return 0.0;
  };

  // Adjoint elasticity solve at a step: cotangent psi on u flows into the
  // design (through dK/drho) and into the current state's c_ost (through
  // dK/dc_ost). compliance_cot adds the direct compliance pathway.
  auto elasticity_adjoint = [&](int step, Eigen::VectorXd psi, double compliance_cot) {
    psi += compliance_cot * force_;
    if (psi.isZero(0.0)) return;
    const double sigma = design.decay(traj.times[step]);
    const Eigen::VectorXd ost_e = element_ost(traj.states[step]);
    assemble_elasticity(design, ost_e, sigma);
    for (int d : elastic_dirichlet_) psi[d] = 0.0;
    const Eigen::VectorXd mu = solve_elastic_system(std::move(psi));
    const Eigen::VectorXd& u = traj.displacements[step];
    for (int de = 0; de < nel; ++de) {
      const int e = dom_.defect_elements[de];
      const StiffnessLaw law = stiffness_law(sigma * design.rho[de], ost_e[de], true);
      const auto ue = gather_displacement(e, u);
      const auto me = gather_displacement(e, mu);
      grad[de] -= sigma * me.dot(basis_.stiffness(law.d_rho) * ue);
      const double dost = me.dot(basis_.stiffness(law.d_ost) * ue) / 8.0;
      for (int node : dom_.element_nodes[e])
        lambda[kOst][dom_.node_defect_index[node]] -= dost;
    }
  };

  if (objective.at_final)
    elasticity_adjoint(steps, Eigen::VectorXd::Zero(3 * dom_.n_nodes),
                       compliance_weight(steps));

  for (int n = steps - 1; n >= 0; --n) {
    const double t = traj.times[n];
    const double sigma = design.decay(t);
    const CellState& state = traj.states[n];
    const CellState& pre = traj.pre_clamp[n];
    const Eigen::VectorXd& u = traj.displacements[n];
    const Eigen::VectorXd ost_e = element_ost(state);

    // 1. Clamp and Dirichlet masks kill the cotangent at saturated nodes.
    std::array<Eigen::VectorXd, 4> hat = lambda;
    for (int i = 0; i < 4; ++i)
      for (int dn = 0; dn < nn; ++dn)
        if (pre.c[i][dn] < 0.0 || pre.c[i][dn] > 1.0) hat[i][dn] = 0.0;
    if (!opts_.no_cell_dirichlet) {
      for (int dn : dom_.pro_dirichlet) hat[kPro][dn] = 0.0;
      for (int dn : dom_.ost_dirichlet) hat[kOst][dn] = 0.0;
    }

    std::array<Eigen::VectorXd, 4> next_lambda;
    for (auto& l : next_lambda) l = Eigen::VectorXd::Zero(nn);

    // 2. Adjoint of the implicit diffusion solve (pro and fib), including the
    // coefficient dependence of the operator on rho and c_ost.
    std::array<Eigen::VectorXd, 4> w;  // cotangent on the reacted state y
    diffusion_.begin();
    std::vector<DiffusivityLaw> dlaw(nel);
    for (int de = 0; de < nel; ++de) {
      dlaw[de] = diffusivity_law(sigma * design.rho[de], ost_e[de], true);
      diffusion_.add(de, dt * basis_.diffusion(dlaw[de].d));
    }
    for (int dn = 0; dn < nn; ++dn) diffusion_.matrix().coeffRef(dn, dn) += node_mass_[dn];

    for (int species : {kPro, kFib}) {
      Eigen::SparseMatrix<double> a = diffusion_.matrix();
      Eigen::VectorXd rhs_mask = hat[species];
      if (species == kPro && !opts_.no_cell_dirichlet) {
        std::vector<double> zeros(dom_.pro_dirichlet.size(), 0.0);
        apply_dirichlet(a, rhs_mask, dom_.pro_dirichlet, zeros);
      }
      diffusion_solver_.factorize(a);
      const Eigen::VectorXd mu = diffusion_solver_.solve(rhs_mask);
      w[species] = node_mass_.cwiseProduct(mu);

      // Operator dependence: -dt * mu^T (dK/dp) c_hat per element.
      auto gather8 = [&](const Eigen::VectorXd& v, int e) {
        Eigen::Matrix<double, 8, 1> out;
        const auto& nodes = dom_.element_nodes[e];
        for (int l = 0; l < 8; ++l) out[l] = v[dom_.node_defect_index[nodes[l]]];
        return out;
      };
      for (int de = 0; de < nel; ++de) {
        const int e = dom_.defect_elements[de];
        const auto mue = gather8(mu, e);
        const auto che = gather8(pre.c[species], e);
        grad[de] -= dt * sigma * mue.dot(basis_.diffusion(dlaw[de].d_rho) * che);
        const double dost = dt * mue.dot(basis_.diffusion(dlaw[de].d_ost) * che) / 8.0;
        for (int node : dom_.element_nodes[e])
          next_lambda[kOst][dom_.node_defect_index[node]] -= dost;
      }
    }
    w[kCho] = hat[kCho];
    w[kOst] = hat[kOst];

    // 3. Adjoint of the explicit reaction update y = c + dt R(c).
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(3 * dom_.n_nodes);
    if (opts_.zero_reactions) {
      for (int i = 0; i < 4; ++i) next_lambda[i] += w[i];
    } else {
      std::vector<ElementRates> er(nel);
      for (int de = 0; de < nel; ++de)
        er[de] = element_rates(sigma * design.rho[de], ost_e[de], element_strain(de, u), true);
      std::vector<RateValues> node_rates(nn);
      for (int dn = 0; dn < nn; ++dn) {
        const auto& adj = dom_.defect_node_elements[dn];
        for (int de : adj)
          for (int r = 0; r < RateValues::kCount; ++r)
            node_rates[dn].flat(r) += er[de].r.flat(r) / adj.size();
      }

      std::vector<RateValues> rate_cot(nn);  // cotangent on nodal rate values
      for (int dn = 0; dn < nn; ++dn) {
        const double cap = 1.0 - sigma * rho_n[dn];
        const double c[4] = {state.c[0][dn], state.c[1][dn], state.c[2][dn], state.c[3][dn]};
        const double s = c[0] + c[1] + c[2] + c[3];
        const double growth = 1.0 - s / cap;
        const RateValues& r = node_rates[dn];
        const double wi[4] = {w[0][dn], w[1][dn], w[2][dn], w[3][dn]};

        // dR_i/dc_j transposed.
        for (int j = 0; j < 4; ++j) {
          double acc = wi[j];  // identity part of y = c + dt R
          for (int i = 0; i < 4; ++i) {
            double d = -r.prolif[i] * c[i] / cap;
            if (i == j) d += r.prolif[i] * growth - r.apo[i];
            if (j == kPro) {
              if (i == kPro)
                d += -r.diff_pro;
              else
                d += r.mu_diff[i - 1];
            }
            acc += dt * wi[i] * d;
          }
          next_lambda[j][dn] += acc;
        }

        // dR_i/d(rate scalar) transposed.
        RateValues& q = rate_cot[dn];
        for (int i = 0; i < 4; ++i) {
          q.prolif[i] += dt * wi[i] * c[i] * growth;
          q.apo[i] += dt * wi[i] * (-c[i]);
        }
        q.diff_pro += dt * wi[kPro] * (-c[kPro]);
        for (int i = 0; i < 3; ++i) q.mu_diff[i] += dt * wi[i + 1] * c[kPro];

        // Capacity pathway: dR_i/dcap = prolif_i c_i s / cap^2, cap = 1 - sigma rho_node.
        double cap_cot = 0.0;
        for (int i = 0; i < 4; ++i) cap_cot += dt * wi[i] * r.prolif[i] * c[i] * s / (cap * cap);
        const auto& adj = dom_.defect_node_elements[dn];
        for (int de : adj) grad[de] += cap_cot * (-sigma / static_cast<double>(adj.size()));
      }

      // Average-onto-nodes transposed, then strain and density pathways.
      for (int de = 0; de < nel; ++de) {
        const int e = dom_.defect_elements[de];
        RateValues q;  // element cotangent
        for (int node : dom_.element_nodes[e]) {
          const int dn = dom_.node_defect_index[node];
          const double inv = 1.0 / dom_.defect_node_elements[dn].size();
          for (int r = 0; r < RateValues::kCount; ++r)
            q.flat(r) += rate_cot[dn].flat(r) * inv;
        }
        Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
        double drho = 0.0, dost = 0.0;
        for (int r = 0; r < RateValues::kCount; ++r) {
          g += q.flat(r) * er[de].d_eps[r];
          drho += q.flat(r) * er[de].d_rho[r];
          dost += q.flat(r) * er[de].d_ost[r];
        }
        grad[de] += sigma * drho;
        for (int node : dom_.element_nodes[e])
          next_lambda[kOst][dom_.node_defect_index[node]] += dost / 8.0;
        const Eigen::Matrix<double, 24, 1> fe =
            basis_.strain_matrix().transpose() * frobenius_voigt(g);
        const auto& nodes = dom_.element_nodes[e];
        for (int l = 0; l < 8; ++l) psi.segment<3>(3 * nodes[l]) += fe.segment<3>(3 * l);
      }
    }

    // 4. Adjoint elasticity at this step (rates pathway + selected compliance).
    // lambda becomes the cotangent on c^n first, because the operator's
    // c_ost dependence at step n belongs to the current state.
    lambda = next_lambda;
    elasticity_adjoint(n, std::move(psi), n == 0 ? compliance_weight(0) : 0.0);
  }
  return grad;
}

}  // namespace schom
