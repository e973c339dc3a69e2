#include "schom/fft_solver.hpp"

#include <cmath>
#include <complex>
#include <cstring>

#include <fftw3.h>

namespace schom {

namespace {

using Complex = std::complex<double>;

struct FftPlans {
  int n = 0;
  std::size_t voxels = 0;
  fftw_complex* buf = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;

  explicit FftPlans(int n_) : n(n_), voxels(static_cast<std::size_t>(n_) * n_ * n_) {
    buf = fftw_alloc_complex(voxels);
    fwd = fftw_plan_dft_3d(n, n, n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_3d(n, n, n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftPlans() {
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_free(buf);
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;

  void forward(std::vector<Complex>& a) const {
    fftw_execute_dft(fwd, reinterpret_cast<fftw_complex*>(a.data()),
                     reinterpret_cast<fftw_complex*>(a.data()));
  }
  void backward(std::vector<Complex>& a) const {
    fftw_execute_dft(bwd, reinterpret_cast<fftw_complex*>(a.data()),
                     reinterpret_cast<fftw_complex*>(a.data()));
    const double s = 1.0 / static_cast<double>(voxels);
    for (Complex& c : a) c *= s;
  }
};

// Staggered layout: displacements live on the voxel-corner lattice, strains
// and stresses at voxel centers. Each derivative averages the four corner
// differences across the cell, so every stencil is centered at the voxel and
// the discrete operators commute with the point symmetries of the lattice.
struct GridIndex {
  int n;
  std::size_t at(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * n + j) * n + i;
  }
};

// eps: 6 tensor components per voxel center from corner displacements,
// d_a u_b = (corner mean at s_a = 1 - corner mean at s_a = 0) / h, h = 1/n.
void strain_from_displacement(const GridIndex& g, const std::vector<double>& u,
                              std::vector<double>& eps) {
  const int n = g.n;
  const double scale = 0.25 * static_cast<double>(n);
  std::size_t v = 0;
  for (int k = 0; k < n; ++k) {
    const int kp = (k + 1) % n;
    for (int j = 0; j < n; ++j) {
      const int jp = (j + 1) % n;
      for (int i = 0; i < n; ++i, ++v) {
        const int ip = (i + 1) % n;
        const double* c000 = u.data() + 3 * g.at(i, j, k);
        const double* c100 = u.data() + 3 * g.at(ip, j, k);
        const double* c010 = u.data() + 3 * g.at(i, jp, k);
        const double* c110 = u.data() + 3 * g.at(ip, jp, k);
        const double* c001 = u.data() + 3 * g.at(i, j, kp);
        const double* c101 = u.data() + 3 * g.at(ip, j, kp);
        const double* c011 = u.data() + 3 * g.at(i, jp, kp);
        const double* c111 = u.data() + 3 * g.at(ip, jp, kp);
        double dx[3], dy[3], dz[3];
        for (int b = 0; b < 3; ++b) {
          dx[b] = ((c100[b] + c110[b] + c101[b] + c111[b]) -
                   (c000[b] + c010[b] + c001[b] + c011[b])) * scale;
          dy[b] = ((c010[b] + c110[b] + c011[b] + c111[b]) -
                   (c000[b] + c100[b] + c001[b] + c101[b])) * scale;
          dz[b] = ((c001[b] + c101[b] + c011[b] + c111[b]) -
                   (c000[b] + c100[b] + c010[b] + c110[b])) * scale;
        }
        double* e = eps.data() + 6 * v;
        e[0] = dx[0];
        e[1] = dy[1];
        e[2] = dz[2];
        e[3] = 0.5 * (dy[2] + dz[1]);
        e[4] = 0.5 * (dx[2] + dz[0]);
        e[5] = 0.5 * (dx[1] + dy[0]);
      }
    }
  }
}

// sig: 6 tensor stress components per voxel from eps via the phase stiffness.
void stress_from_strain(const StiffnessField& stiffness, const std::vector<double>& eps,
                        std::vector<double>& sig) {
  const std::size_t nv = eps.size() / 6;
  for (std::size_t v = 0; v < nv; ++v) {
    Vector6d e = Eigen::Map<const Vector6d>(eps.data() + 6 * v);
    e.tail<3>() *= 2.0;  // engineering shears
    Eigen::Map<Vector6d>(sig.data() + 6 * v) = stiffness.at(v) * e;
  }
}

// f_a(corner) = sum_b div_b sig_ab, the negative adjoint of the averaged
// gradient: each derivative averages the four voxel differences around the
// corner (voxel on the + side of the corner minus voxel on the - side).
void divergence(const GridIndex& g, const std::vector<double>& sig, std::vector<double>& f) {
  const int n = g.n;
  const double scale = 0.25 * static_cast<double>(n);
  std::size_t c = 0;
  for (int k = 0; k < n; ++k) {
    const int km = (k + n - 1) % n;
    for (int j = 0; j < n; ++j) {
      const int jm = (j + n - 1) % n;
      for (int i = 0; i < n; ++i, ++c) {
        const int im = (i + n - 1) % n;
        // Voxel s_xyz sits on the - side of the corner along each axis with
        // the corresponding bit set.
        const double* s000 = sig.data() + 6 * g.at(i, j, k);
        const double* s100 = sig.data() + 6 * g.at(im, j, k);
        const double* s010 = sig.data() + 6 * g.at(i, jm, k);
        const double* s110 = sig.data() + 6 * g.at(im, jm, k);
        const double* s001 = sig.data() + 6 * g.at(i, j, km);
        const double* s101 = sig.data() + 6 * g.at(im, j, km);
        const double* s011 = sig.data() + 6 * g.at(i, jm, km);
        const double* s111 = sig.data() + 6 * g.at(im, jm, km);
        const auto div_x = [&](int comp) {
          return ((s000[comp] + s010[comp] + s001[comp] + s011[comp]) -
                  (s100[comp] + s110[comp] + s101[comp] + s111[comp])) * scale;
        };
        const auto div_y = [&](int comp) {
          return ((s000[comp] + s100[comp] + s001[comp] + s101[comp]) -
                  (s010[comp] + s110[comp] + s011[comp] + s111[comp])) * scale;
        };
        const auto div_z = [&](int comp) {
          return ((s000[comp] + s100[comp] + s010[comp] + s110[comp]) -
                  (s001[comp] + s101[comp] + s011[comp] + s111[comp])) * scale;
        };
        f[3 * c + 0] = div_x(0) + div_y(5) + div_z(4);
        f[3 * c + 1] = div_x(5) + div_y(1) + div_z(3);
        f[3 * c + 2] = div_x(4) + div_y(3) + div_z(2);
      }
    }
  }
}

double norm2(const std::vector<double>& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct ReferenceMedium {
  double lambda0;
  double mu0;
};

ReferenceMedium reference_from_phases(const StiffnessField& stiffness) {
  const auto frac = stiffness.cell.fraction_by_phase();
  double lmin = 0, lmax = 0, mmin = 0, mmax = 0;
  bool first = true;
  for (int p = 0; p < 3; ++p) {
    if (frac[p] <= 0.0) continue;
    const Matrix6d& c = stiffness.phase_stiffness[p];
    const double lambda = c(0, 1);
    const double mu = c(3, 3);
    if (first) {
      lmin = lmax = lambda;
      mmin = mmax = mu;
      first = false;
    } else {
      lmin = std::min(lmin, lambda);
      lmax = std::max(lmax, lambda);
      mmin = std::min(mmin, mu);
      mmax = std::max(mmax, mu);
    }
  }
  return {0.5 * (lmin + lmax), 0.5 * (mmin + mmax)};
}

// Fourier symbol of the averaged-difference gradient (corner displacements
// to voxel-center derivatives): k_a = n/4 (e^{i t_a} - 1) prod_{b!=a}(1 + e^{i t_b}).
Eigen::Vector3cd gradient_symbol(int i, int j, int k, int n) {
  const auto phase = [n](int m) {
    const double theta = 2.0 * M_PI * m / n;
    return Complex(std::cos(theta), std::sin(theta));
  };
  const Complex ex = phase(i), ey = phase(j), ez = phase(k);
  const double s = 0.25 * static_cast<double>(n);
  Eigen::Vector3cd kk;
  kk << s * (ex - 1.0) * (1.0 + ey) * (1.0 + ez),
        s * (ey - 1.0) * (1.0 + ez) * (1.0 + ex),
        s * (ez - 1.0) * (1.0 + ex) * (1.0 + ey);
  return kk;
}

// Modes where the averaged gradient (numerically) vanishes: the mean mode and
// the modes with two or more Nyquist components. The smallest genuine |k|^2 is
// (2 pi)^2, so a fixed cutoff separates them at any resolution.
constexpr double kNullModeCutoff = 1e-8;

// Context shared by the six load cases of one cell: FFT plans and the
// factorized acoustic tensor of the reference medium per frequency.
class ElasticContext {
 public:
  ElasticContext(const StiffnessField& stiffness, const CellSolveOptions& opts)
      : stiffness_(stiffness),
        opts_(opts),
        n_(stiffness.cell.resolution()),
        grid_{stiffness.cell.resolution()},
        plans_(stiffness.cell.resolution()),
        ref_(reference_from_phases(stiffness)) {
    build_inverse_acoustic();
  }

  StrainField solve(const Eigen::Matrix3d& mean_strain, CellDiagnostics* diag) const {
    return opts_.scheme == FftScheme::cg ? solve_cg(mean_strain, diag)
                                         : solve_basic(mean_strain, diag);
  }

 private:
  void build_inverse_acoustic() {
    const std::size_t nv = plans_.voxels;
    ainv_.resize(9 * nv);
    std::size_t v = 0;
    for (int k = 0; k < n_; ++k)
      for (int j = 0; j < n_; ++j)
        for (int i = 0; i < n_; ++i, ++v) {
          const Eigen::Vector3cd kk = gradient_symbol(i, j, k, n_);
          const double k2 = kk.squaredNorm();
          if (k2 < kNullModeCutoff) {
            for (int c = 0; c < 9; ++c) ainv_[9 * v + c] = 0.0;
            continue;
          }
          Eigen::Matrix3cd a = ref_.mu0 * k2 * Eigen::Matrix3cd::Identity() +
                               ref_.lambda0 * kk.conjugate() * kk.transpose() +
                               ref_.mu0 * kk * kk.adjoint();
          Eigen::Matrix3cd inv = a.inverse();
          Eigen::Map<Eigen::Matrix3cd>(ainv_.data() + 9 * v) = inv;
        }
  }

  // w_hat = Ainv * d_hat per frequency; zero mean mode.
  void apply_green(std::vector<double>& field3) const {
    const std::size_t nv = plans_.voxels;
    std::array<std::vector<Complex>, 3> c;
    for (int a = 0; a < 3; ++a) {
      c[a].resize(nv);
      for (std::size_t v = 0; v < nv; ++v) c[a][v] = field3[3 * v + a];
      plans_.forward(c[a]);
    }
    for (std::size_t v = 0; v < nv; ++v) {
      const Eigen::Map<const Eigen::Matrix3cd> inv(ainv_.data() + 9 * v);
      Eigen::Vector3cd d(c[0][v], c[1][v], c[2][v]);
      const Eigen::Vector3cd w = inv * d;
      c[0][v] = w[0];
      c[1][v] = w[1];
      c[2][v] = w[2];
    }
    for (int a = 0; a < 3; ++a) {
      plans_.backward(c[a]);
      for (std::size_t v = 0; v < nv; ++v) field3[3 * v + a] = c[a][v].real();
    }
  }

  void apply_operator(const std::vector<double>& u, std::vector<double>& out,
                      std::vector<double>& eps_scratch, std::vector<double>& sig_scratch) const {
    strain_from_displacement(grid_, u, eps_scratch);
    stress_from_strain(stiffness_, eps_scratch, sig_scratch);
    divergence(grid_, sig_scratch, out);
    for (double& x : out) x = -x;
  }

  std::vector<double> rhs(const Eigen::Matrix3d& mean_strain) const {
    const std::size_t nv = plans_.voxels;
    std::vector<double> sig(6 * nv), b(3 * nv);
    const Vector6d e = voigt_strain(mean_strain);
    for (std::size_t v = 0; v < nv; ++v)
      Eigen::Map<Vector6d>(sig.data() + 6 * v) = stiffness_.at(v) * e;
    divergence(grid_, sig, b);
    return b;
  }

  StrainField make_strain(const Eigen::Matrix3d& mean_strain,
                          const std::vector<double>& u) const {
    const std::size_t nv = plans_.voxels;
    StrainField field;
    field.n = n_;
    field.data.resize(6 * nv);
    strain_from_displacement(grid_, u, field.data);
    const Vector6d e = voigt_tensor(mean_strain);
    for (std::size_t v = 0; v < nv; ++v)
      for (int c = 0; c < 6; ++c) field.data[6 * v + c] += e[c];
    return field;
  }

  StrainField solve_cg(const Eigen::Matrix3d& mean_strain, CellDiagnostics* diag) const {
    const std::size_t nv = plans_.voxels;
    CellDiagnostics local;
    std::vector<double> u(3 * nv, 0.0);
    std::vector<double> b = rhs(mean_strain);
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
      if (diag) *diag = local;
      return make_strain(mean_strain, u);
    }
    std::vector<double> r = b, z, p, q(3 * nv), eps(6 * nv), sig(6 * nv);
    z = r;
    apply_green(z);
    p = z;
    double rz = dot(r, z);
    bool converged = false;
    for (int it = 1; it <= opts_.max_iter; ++it) {
      apply_operator(p, q, eps, sig);
      const double pq = dot(p, q);
      const double alpha = rz / pq;
      for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      const double res = norm2(r) / bnorm;
      local.iterations = it;
      local.residual = res;
      local.history.push_back(res);
      if (res <= opts_.tol) {
        converged = true;
        break;
      }
      z = r;
      apply_green(z);
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
    }
    local.converged = converged;
    if (!converged)
      throw CellSolveError("elastic cell solve (cg) did not converge", local);
    if (diag) *diag = local;
    return make_strain(mean_strain, u);
  }

  StrainField solve_basic(const Eigen::Matrix3d& mean_strain, CellDiagnostics* diag) const {
    const std::size_t nv = plans_.voxels;
    CellDiagnostics local;
    const Matrix6d c0 = isotropic_stiffness(ref_.lambda0, ref_.mu0);
    std::vector<double> b = rhs(mean_strain);
    const double denom = norm2(b);

    StrainField eps = make_strain(mean_strain, std::vector<double>(3 * nv, 0.0));
    std::vector<double> sig(6 * nv), tau(6 * nv), f(3 * nv), w(3 * nv);
    if (denom == 0.0) {
      if (diag) *diag = local;
      return eps;
    }
    const Vector6d e_mean = voigt_tensor(mean_strain);
    bool converged = false;
    for (int it = 1; it <= opts_.max_iter; ++it) {
      stress_from_strain(stiffness_, eps.data, sig);
      divergence(grid_, sig, f);
      const double res = norm2(f) / denom;
      local.iterations = it;
      local.residual = res;
      local.history.push_back(res);
      if (res <= opts_.tol) {
        converged = true;
        break;
      }
      // Polarization tau = (C - C0) eps, then eps <- E + eps(Green(div tau)).
      for (std::size_t v = 0; v < nv; ++v) {
        Vector6d e = Eigen::Map<const Vector6d>(eps.data.data() + 6 * v);
        e.tail<3>() *= 2.0;
        Eigen::Map<Vector6d>(tau.data() + 6 * v) =
            Eigen::Map<const Vector6d>(sig.data() + 6 * v) - c0 * e;
      }
      divergence(grid_, tau, w);
      apply_green(w);
      strain_from_displacement(grid_, w, eps.data);
      for (std::size_t v = 0; v < nv; ++v)
        for (int c = 0; c < 6; ++c) eps.data[6 * v + c] += e_mean[c];
    }
    local.converged = converged;
    if (!converged)
      throw CellSolveError("elastic cell solve (basic) did not converge", local);
    if (diag) *diag = local;
    return eps;
  }

  const StiffnessField& stiffness_;
  CellSolveOptions opts_;
  int n_;
  GridIndex grid_;
  FftPlans plans_;
  ReferenceMedium ref_;
  std::vector<Complex> ainv_;
};

class DiffusionContext {
 public:
  DiffusionContext(const DiffusivityField& diffusivity, const CellSolveOptions& opts)
      : diffusivity_(diffusivity),
        opts_(opts),
        n_(diffusivity.cell.resolution()),
        grid_{diffusivity.cell.resolution()},
        plans_(diffusivity.cell.resolution()) {
    double dmin = diffusivity.phase_value[0], dmax = dmin;
    const auto frac = diffusivity.cell.fraction_by_phase();
    bool first = true;
    for (int p = 0; p < 3; ++p) {
      if (frac[p] <= 0.0) continue;
      const double d = diffusivity.phase_value[p];
      if (first) {
        dmin = dmax = d;
        first = false;
      } else {
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
      }
    }
    d0_ = 0.5 * (dmin + dmax);
  }

  GradientField solve(int direction, CellDiagnostics* diag) const {
    const std::size_t nv = plans_.voxels;
    CellDiagnostics local;
    std::vector<double> b(nv);
    // b = div(D(x) e_i) on the corner lattice for the unit gradient e_i.
    {
      std::vector<double> flux(3 * nv, 0.0);
      for (std::size_t v = 0; v < nv; ++v)
        flux[3 * v + direction] = diffusivity_.at(v);
      corner_divergence(flux, b);
    }
    const double bnorm = norm2(b);
    std::vector<double> w(nv, 0.0);
    if (bnorm > 0.0) {
      std::vector<double> r = b, z, p, q(nv), g(3 * nv);
      z = r;
      green(z);
      p = z;
      double rz = dot(r, z);
      bool converged = false;
      for (int it = 1; it <= opts_.max_iter; ++it) {
        apply_operator(p, q, g);
        const double alpha = rz / dot(p, q);
        for (std::size_t i = 0; i < nv; ++i) {
          w[i] += alpha * p[i];
          r[i] -= alpha * q[i];
        }
        const double res = norm2(r) / bnorm;
        local.iterations = it;
        local.residual = res;
        local.history.push_back(res);
        if (res <= opts_.tol) {
          converged = true;
          break;
        }
        z = r;
        green(z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < nv; ++i) p[i] = z[i] + beta * p[i];
      }
      local.converged = converged;
      if (!converged)
        throw CellSolveError("diffusion cell solve did not converge", local);
    }
    if (diag) *diag = local;

    GradientField field;
    field.n = n_;
    field.data.assign(3 * nv, 0.0);
    gradient(w, field.data);
    for (std::size_t v = 0; v < nv; ++v) field.data[3 * v + direction] += 1.0;
    return field;
  }

 private:
  // Scalar potential on the corner lattice to a gradient at voxel centers;
  // same averaged-difference stencil as the elastic strain.
  void gradient(const std::vector<double>& w, std::vector<double>& g) const {
    const int n = n_;
    const double scale = 0.25 * static_cast<double>(n);
    std::size_t v = 0;
    for (int k = 0; k < n; ++k) {
      const int kp = (k + 1) % n;
      for (int j = 0; j < n; ++j) {
        const int jp = (j + 1) % n;
        for (int i = 0; i < n; ++i, ++v) {
          const int ip = (i + 1) % n;
          const double c000 = w[grid_.at(i, j, k)], c100 = w[grid_.at(ip, j, k)];
          const double c010 = w[grid_.at(i, jp, k)], c110 = w[grid_.at(ip, jp, k)];
          const double c001 = w[grid_.at(i, j, kp)], c101 = w[grid_.at(ip, j, kp)];
          const double c011 = w[grid_.at(i, jp, kp)], c111 = w[grid_.at(ip, jp, kp)];
          g[3 * v + 0] = ((c100 + c110 + c101 + c111) - (c000 + c010 + c001 + c011)) * scale;
          g[3 * v + 1] = ((c010 + c110 + c011 + c111) - (c000 + c100 + c001 + c101)) * scale;
          g[3 * v + 2] = ((c001 + c101 + c011 + c111) - (c000 + c100 + c010 + c110)) * scale;
        }
      }
    }
  }

  // Divergence of a voxel-center flux at the corners (negative adjoint of
  // gradient()).
  void corner_divergence(const std::vector<double>& g, std::vector<double>& out) const {
    const int n = n_;
    const double scale = 0.25 * static_cast<double>(n);
    std::size_t c = 0;
    for (int k = 0; k < n; ++k) {
      const int km = (k + n - 1) % n;
      for (int j = 0; j < n; ++j) {
        const int jm = (j + n - 1) % n;
        for (int i = 0; i < n; ++i, ++c) {
          const int im = (i + n - 1) % n;
          const double* s000 = g.data() + 3 * grid_.at(i, j, k);
          const double* s100 = g.data() + 3 * grid_.at(im, j, k);
          const double* s010 = g.data() + 3 * grid_.at(i, jm, k);
          const double* s110 = g.data() + 3 * grid_.at(im, jm, k);
          const double* s001 = g.data() + 3 * grid_.at(i, j, km);
          const double* s101 = g.data() + 3 * grid_.at(im, j, km);
          const double* s011 = g.data() + 3 * grid_.at(i, jm, km);
          const double* s111 = g.data() + 3 * grid_.at(im, jm, km);
          out[c] = (((s000[0] + s010[0] + s001[0] + s011[0]) -
                     (s100[0] + s110[0] + s101[0] + s111[0])) +
                    ((s000[1] + s100[1] + s001[1] + s101[1]) -
                     (s010[1] + s110[1] + s011[1] + s111[1])) +
                    ((s000[2] + s100[2] + s010[2] + s110[2]) -
                     (s001[2] + s101[2] + s011[2] + s111[2]))) * scale;
        }
      }
    }
  }

  void apply_operator(const std::vector<double>& w, std::vector<double>& out,
                      std::vector<double>& g) const {
    const std::size_t nv = w.size();
    gradient(w, g);
    for (std::size_t v = 0; v < nv; ++v) {
      const double d = diffusivity_.at(v);
      g[3 * v + 0] *= d;
      g[3 * v + 1] *= d;
      g[3 * v + 2] *= d;
    }
    corner_divergence(g, out);
    for (double& x : out) x = -x;
  }

  void green(std::vector<double>& field) const {
    const std::size_t nv = plans_.voxels;
    std::vector<Complex> c(nv);
    for (std::size_t v = 0; v < nv; ++v) c[v] = field[v];
    plans_.forward(c);
    std::size_t v = 0;
    for (int k = 0; k < n_; ++k)
      for (int j = 0; j < n_; ++j)
        for (int i = 0; i < n_; ++i, ++v) {
          const double k2 = gradient_symbol(i, j, k, n_).squaredNorm();
          if (k2 < kNullModeCutoff) {
            c[v] = 0.0;
            continue;
          }
          c[v] /= d0_ * k2;
        }
    plans_.backward(c);
    for (std::size_t w2 = 0; w2 < nv; ++w2) field[w2] = c[w2].real();
  }

  const DiffusivityField& diffusivity_;
  CellSolveOptions opts_;
  int n_;
  GridIndex grid_;
  FftPlans plans_;
  double d0_ = 1.0;
};

}  // namespace

Vector6d StrainField::mean() const {
  Vector6d m = Vector6d::Zero();
  const std::size_t nv = voxels();
  for (std::size_t v = 0; v < nv; ++v) m += at(v);
  return m / static_cast<double>(nv);
}

CorrectorField CorrectorField::identity(int n) {
  CorrectorField field;
  field.n = n;
  const std::size_t nv = static_cast<std::size_t>(n) * n * n;
  field.data.assign(36 * nv, 0.0f);
  for (std::size_t v = 0; v < nv; ++v)
    for (int c = 0; c < 6; ++c)
      field.data[36 * v + 7 * c] = c < 3 ? 1.0f : 0.5f;
  return field;
}

StrainField solve_elastic_cell_mean(const StiffnessField& stiffness,
                                    const Eigen::Matrix3d& mean_strain,
                                    const CellSolveOptions& opts, CellDiagnostics* diag) {
  ElasticContext ctx(stiffness, opts);
  return ctx.solve(mean_strain, diag);
}

StrainField solve_elastic_cell(const StiffnessField& stiffness, int load_case,
                               const CellSolveOptions& opts, CellDiagnostics* diag) {
  return solve_elastic_cell_mean(stiffness, unit_strain(load_case), opts, diag);
}

ElasticCellSolution solve_elastic_cell_all(const StiffnessField& stiffness,
                                           const CellSolveOptions& opts) {
  ElasticContext ctx(stiffness, opts);
  ElasticCellSolution sol;
  for (int c = 0; c < 6; ++c)
    sol.load_case[c] = ctx.solve(unit_strain(c), &sol.diagnostics[c]);
  return sol;
}

Matrix6d homogenized_stiffness(const StiffnessField& stiffness,
                               const ElasticCellSolution& solution) {
  const std::size_t nv = solution.load_case[0].voxels();
  Matrix6d acc = Matrix6d::Zero();
  for (std::size_t v = 0; v < nv; ++v) {
    Matrix6d b;  // columns: engineering strain of each load case
    for (int c = 0; c < 6; ++c) {
      Vector6d e = solution.load_case[c].at(v);
      e.tail<3>() *= 2.0;
      b.col(c) = e;
    }
    acc += b.transpose() * (stiffness.at(v) * b);
  }
  return acc / static_cast<double>(nv);
}

CorrectorField assemble_corrector(const ElasticCellSolution& solution) {
  CorrectorField field;
  field.n = solution.load_case[0].n;
  const std::size_t nv = solution.load_case[0].voxels();
  field.data.resize(36 * nv);
  for (std::size_t v = 0; v < nv; ++v)
    for (int col = 0; col < 6; ++col) {
      const Vector6d e = solution.load_case[col].at(v);
      for (int row = 0; row < 6; ++row)
        field.data[36 * v + 6 * row + col] = static_cast<float>(e[row]);
    }
  return field;
}

GradientField solve_diffusion_cell(const DiffusivityField& diffusivity, int direction,
                                   const CellSolveOptions& opts, CellDiagnostics* diag) {
  DiffusionContext ctx(diffusivity, opts);
  return ctx.solve(direction, diag);
}

DiffusionCellSolution solve_diffusion_cell_all(const DiffusivityField& diffusivity,
                                               const CellSolveOptions& opts) {
  DiffusionContext ctx(diffusivity, opts);
  DiffusionCellSolution sol;
  for (int d = 0; d < 3; ++d)
    sol.load_case[d] = ctx.solve(d, &sol.diagnostics[d]);
  return sol;
}

Eigen::Matrix3d homogenized_diffusivity(const DiffusivityField& diffusivity,
                                        const DiffusionCellSolution& solution) {
  const std::size_t nv = solution.load_case[0].data.size() / 3;
  Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
  for (std::size_t v = 0; v < nv; ++v) {
    const double d = diffusivity.at(v);
    Eigen::Matrix3d g;
    for (int c = 0; c < 3; ++c) g.col(c) = solution.load_case[c].at(v);
    acc += d * g.transpose() * g;
  }
  return acc / static_cast<double>(nv);
}

}  // namespace schom
