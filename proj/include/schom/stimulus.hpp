#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "schom/fft_solver.hpp"

namespace schom {

/// Normalization constant of the octahedral shear strain stimulus.
constexpr double kStimulusNorm = 0.0375;

/// Cutoff below which the stimulus derivative is taken as zero.
constexpr double kStimulusSingular = 1e-12;

/// gamma_oct(eps) = 2/(3a) sqrt(3 tr(eps^2) - tr(eps)^2), a = 0.0375.
double gamma_oct(const Eigen::Matrix3d& eps);

/// Directional derivative D gamma_oct(eps0) deps; zero on the singular set.
double d_gamma_oct(const Eigen::Matrix3d& eps0, const Eigen::Matrix3d& deps);

/// Frobenius gradient of gamma_oct; zero on the singular set.
Eigen::Matrix3d gamma_oct_gradient(const Eigen::Matrix3d& eps0);

/// Smooth indicator approximations: sigmoid for [a, inf), mollifier for [a, b].
/// Sharpness scales per threshold as k = sharpness / threshold.
class Activation {
 public:
  static Activation sigmoid(double threshold, double sharpness = 40.0);
  static Activation mollifier(double lower, double upper, double sharpness = 40.0);

  double operator()(double s) const;
  double derivative(double s) const;

 private:
  Activation() = default;
  bool window_ = false;
  double a_ = 0.0, b_ = 0.0;
  double ka_ = 0.0, kb_ = 0.0;
  double peak_scale_ = 1.0;
};

/// The mechano-regulated rate functions of the four cell species, all as
/// pointwise functions of the stimulus S.
struct RateValues {
  std::array<double, 4> prolif{};   // pro, fib, cho, ost
  std::array<double, 4> apo{};
  double diff_pro = 0.0;            // loss rate of progenitors
  std::array<double, 3> mu_diff{};  // gains of fib, cho, ost

  static constexpr int kCount = 12;
  double flat(int r) const;
  double& flat(int r);
};

class RateTable {
 public:
  explicit RateTable(double sharpness = 40.0);

  RateValues operator()(double stimulus) const;
  RateValues derivative(double stimulus) const;

  const Activation& sigma_low() const { return sigma_low_; }

 private:
  Activation sigma_low_;   // sigma_{0.01}
  Activation sigma_high_;  // sigma_5
  Activation phi_mid_;     // phi_{3,5}
  Activation phi_bone_;    // phi_{0.01,3}
};

/// Cell-averaged stimulus integral mean_Y f(gamma_oct(G(y) : eps)).
double hom_stimulus(const CorrectorField& corrector, const Eigen::Matrix3d& eps,
                    const Activation& f);

/// Gradient of hom_stimulus with respect to the macroscopic strain.
Eigen::Matrix3d d_hom_stimulus_strain(const CorrectorField& corrector,
                                      const Eigen::Matrix3d& eps, const Activation& f);

/// Density sensitivity via table-neighbor central differences of the corrector.
double d_hom_stimulus_density(const CorrectorField& center, const CorrectorField& plus,
                              const CorrectorField& minus, double h,
                              const Eigen::Matrix3d& eps, const Activation& f);

/// All rate functions homogenized in one pass over the cell.
RateValues hom_rates(const CorrectorField& corrector, const Eigen::Matrix3d& eps,
                     const RateTable& rates);

struct RateSensitivity {
  std::array<Eigen::Matrix3d, RateValues::kCount> d_eps;
  std::array<double, RateValues::kCount> d_density;
};

/// Strain gradients of all homogenized rates.
std::array<Eigen::Matrix3d, RateValues::kCount> hom_rates_d_strain(
    const CorrectorField& corrector, const Eigen::Matrix3d& eps, const RateTable& rates);

/// Density derivatives of all homogenized rates from corrector differences.
std::array<double, RateValues::kCount> hom_rates_d_density(
    const CorrectorField& center, const CorrectorField& plus, const CorrectorField& minus,
    double h, const Eigen::Matrix3d& eps, const RateTable& rates);

/// Cotangents of the scalar stimulus map on (eps, rho, b).
struct StimulusGradients {
  Eigen::Matrix3d d_eps = Eigen::Matrix3d::Zero();
  double d_rho = 0.0;
  double d_ost = 0.0;
};

/// Adjoint action of a scalar-valued map: cotangent times the gradient.
inline StimulusGradients adjoint_actions(const StimulusGradients& primal, double cotangent) {
  return {cotangent * primal.d_eps, cotangent * primal.d_rho, cotangent * primal.d_ost};
}

/// Pairwise (tree) summation; exact for constant summands at power-of-two length.
double pairwise_mean(const std::vector<double>& values);

}  // namespace schom
