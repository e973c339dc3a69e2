#include "schom/stimulus.hpp"

#include <cmath>

namespace schom {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kMuFloor = 1e-12;

// Gradient of gamma_oct with respect to the local (micro) strain, and the
// engineering-strain pullback through the corrector matrix.
Vector6d pullback_gradient(const Matrix6f& g, const Eigen::Matrix3d& micro_strain,
                           double gamma) {
  const double a = kStimulusNorm;
  const double coef = 4.0 / (3.0 * a * a * gamma);
  const Eigen::Matrix3d dm =
      coef * (micro_strain - (micro_strain.trace() / 3.0) * Eigen::Matrix3d::Identity());
  Vector6d t = voigt_tensor(dm);
  t.tail<3>() *= 2.0;
  return g.cast<double>().transpose() * t;
}

Eigen::Matrix3d gradient_from_voigt(const Vector6d& g) {
  Eigen::Matrix3d m;
  m << g[0], g[5], g[4],
       g[5], g[1], g[3],
       g[4], g[3], g[2];
  return m;
}

}  // namespace

double gamma_oct(const Eigen::Matrix3d& eps) {
  const double tr = eps.trace();
  const double tr2 = (eps * eps).trace();
  const double arg = 3.0 * tr2 - tr * tr;
  return 2.0 / (3.0 * kStimulusNorm) * std::sqrt(std::max(0.0, arg));
}

double d_gamma_oct(const Eigen::Matrix3d& eps0, const Eigen::Matrix3d& deps) {
  const double g = gamma_oct(eps0);
  if (g <= kStimulusSingular) return 0.0;
  const double a = kStimulusNorm;
  return 4.0 / (3.0 * a * a * g) *
         ((eps0 * deps).trace() - eps0.trace() * deps.trace() / 3.0);
}

Eigen::Matrix3d gamma_oct_gradient(const Eigen::Matrix3d& eps0) {
  const double g = gamma_oct(eps0);
  if (g <= kStimulusSingular) return Eigen::Matrix3d::Zero();
  const double a = kStimulusNorm;
  return 4.0 / (3.0 * a * a * g) *
         (eps0 - (eps0.trace() / 3.0) * Eigen::Matrix3d::Identity());
}

Activation Activation::sigmoid(double threshold, double sharpness) {
  Activation f;
  f.window_ = false;
  f.a_ = threshold;
  f.ka_ = sharpness / threshold;
  return f;
}

Activation Activation::mollifier(double lower, double upper, double sharpness) {
  Activation f;
  f.window_ = true;
  f.a_ = lower;
  f.b_ = upper;
  f.ka_ = sharpness / lower;
  f.kb_ = sharpness / upper;
  // Normalize to peak one by dense sampling of the window.
  const double lo = lower - 10.0 / f.ka_;
  const double hi = upper + 10.0 / f.kb_;
  double peak = 0.0;
  const int samples = 4096;
  for (int i = 0; i <= samples; ++i) {
    const double s = lo + (hi - lo) * i / samples;
    const double v = stable_sigmoid(f.ka_ * (s - f.a_)) * (1.0 - stable_sigmoid(f.kb_ * (s - f.b_)));
    peak = std::max(peak, v);
  }
  f.peak_scale_ = peak > 0.0 ? 1.0 / peak : 1.0;
  return f;
}

double Activation::operator()(double s) const {
  const double lo = stable_sigmoid(ka_ * (s - a_));
  if (!window_) return lo;
  return peak_scale_ * lo * (1.0 - stable_sigmoid(kb_ * (s - b_)));
}

double Activation::derivative(double s) const {
  const double lo = stable_sigmoid(ka_ * (s - a_));
  const double dlo = ka_ * lo * (1.0 - lo);
  if (!window_) return dlo;
  const double hi = stable_sigmoid(kb_ * (s - b_));
  const double dhi = kb_ * hi * (1.0 - hi);
  return peak_scale_ * (dlo * (1.0 - hi) - lo * dhi);
}

double RateValues::flat(int r) const {
  if (r < 4) return prolif[r];
  if (r < 8) return apo[r - 4];
  if (r == 8) return diff_pro;
  return mu_diff[r - 9];
}

double& RateValues::flat(int r) {
  if (r < 4) return prolif[r];
  if (r < 8) return apo[r - 4];
  if (r == 8) return diff_pro;
  return mu_diff[r - 9];
}

RateTable::RateTable(double sharpness)
    : sigma_low_(Activation::sigmoid(0.01, sharpness)),
      sigma_high_(Activation::sigmoid(5.0, sharpness)),
      phi_mid_(Activation::mollifier(3.0, 5.0, sharpness)),
      phi_bone_(Activation::mollifier(0.01, 3.0, sharpness)) {}

RateValues RateTable::operator()(double s) const {
  const double slo = sigma_low_(s);
  const double shi = sigma_high_(s);
  const double pmid = phi_mid_(s);
  const double pbone = phi_bone_(s);

  RateValues v;
  v.prolif = {0.6 * slo, 0.55 * shi, 0.2 * pmid, 0.3 * pbone};
  v.apo = {-std::log(0.95) * (1.0 - slo), -std::log(0.95) * (1.0 - shi),
           -std::log(0.9) * (1.0 - pmid), -std::log(0.84) * (1.0 - pbone)};
  const double k_diff = -std::log(0.7) * slo;
  v.diff_pro = k_diff;
  const double wsum = shi + pmid + pbone + kMuFloor;
  v.mu_diff = {shi / wsum * k_diff, pmid / wsum * k_diff, pbone / wsum * k_diff};
  return v;
}

RateValues RateTable::derivative(double s) const {
  const double slo = sigma_low_(s), dslo = sigma_low_.derivative(s);
  const double shi = sigma_high_(s), dshi = sigma_high_.derivative(s);
  const double pmid = phi_mid_(s), dpmid = phi_mid_.derivative(s);
  const double pbone = phi_bone_(s), dpbone = phi_bone_.derivative(s);

  RateValues d;
  d.prolif = {0.6 * dslo, 0.55 * dshi, 0.2 * dpmid, 0.3 * dpbone};
  d.apo = {std::log(0.95) * dslo, std::log(0.95) * dshi, std::log(0.9) * dpmid,
           std::log(0.84) * dpbone};
  const double k_diff = -std::log(0.7) * slo;
  const double dk_diff = -std::log(0.7) * dslo;
  d.diff_pro = dk_diff;
  const double w[3] = {shi, pmid, pbone};
  const double dw[3] = {dshi, dpmid, dpbone};
  const double wsum = w[0] + w[1] + w[2] + kMuFloor;
  const double dwsum = dw[0] + dw[1] + dw[2];
  for (int i = 0; i < 3; ++i) {
    const double mu = w[i] / wsum;
    const double dmu = (dw[i] * wsum - w[i] * dwsum) / (wsum * wsum);
    d.mu_diff[i] = dmu * k_diff + mu * dk_diff;
  }
  return d;
}

double pairwise_mean(const std::vector<double>& values) {
  std::vector<double> acc = values;
  std::size_t len = acc.size();
  while (len > 1) {
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < half; ++i) acc[i] = acc[2 * i] + acc[2 * i + 1];
    if (len % 2 == 1) {
      acc[half] = acc[len - 1];
      len = half + 1;
    } else {
      len = half;
    }
  }
  return acc[0] / static_cast<double>(values.size());
}

double hom_stimulus(const CorrectorField& corrector, const Eigen::Matrix3d& eps,
                    const Activation& f) {
  const std::size_t nv = corrector.voxels();
  std::vector<double> values(nv);
  for (std::size_t v = 0; v < nv; ++v)
    values[v] = f(gamma_oct(corrector.apply(v, eps)));
  return pairwise_mean(values);
}

Eigen::Matrix3d d_hom_stimulus_strain(const CorrectorField& corrector,
                                      const Eigen::Matrix3d& eps, const Activation& f) {
  const std::size_t nv = corrector.voxels();
  Vector6d acc = Vector6d::Zero();
  for (std::size_t v = 0; v < nv; ++v) {
    const Eigen::Matrix3d micro = corrector.apply(v, eps);
    const double g = gamma_oct(micro);
    if (g <= kStimulusSingular) continue;
    acc += f.derivative(g) * pullback_gradient(corrector.at(v), micro, g);
  }
  return gradient_from_voigt(acc / static_cast<double>(nv));
}

double d_hom_stimulus_density(const CorrectorField& center, const CorrectorField& plus,
                              const CorrectorField& minus, double h,
                              const Eigen::Matrix3d& eps, const Activation& f) {
  const std::size_t nv = center.voxels();
  const Vector6d eng = voigt_strain(eps);
  double acc = 0.0;
  for (std::size_t v = 0; v < nv; ++v) {
    const Eigen::Matrix3d micro = center.apply(v, eps);
    const double g = gamma_oct(micro);
    if (g <= kStimulusSingular) continue;
    const Vector6d dmicro =
        ((plus.at(v) - minus.at(v)).cast<double>() / h) * eng;
    acc += f.derivative(g) * d_gamma_oct(micro, from_voigt_tensor(dmicro));
  }
  return acc / static_cast<double>(nv);
}

RateValues hom_rates(const CorrectorField& corrector, const Eigen::Matrix3d& eps,
                     const RateTable& rates) {
  const std::size_t nv = corrector.voxels();
  RateValues acc;
  for (std::size_t v = 0; v < nv; ++v) {
    const RateValues r = rates(gamma_oct(corrector.apply(v, eps)));
    for (int i = 0; i < RateValues::kCount; ++i) acc.flat(i) += r.flat(i);
  }
  for (int i = 0; i < RateValues::kCount; ++i) acc.flat(i) /= static_cast<double>(nv);
  return acc;
}

std::array<Eigen::Matrix3d, RateValues::kCount> hom_rates_d_strain(
    const CorrectorField& corrector, const Eigen::Matrix3d& eps, const RateTable& rates) {
  const std::size_t nv = corrector.voxels();
  std::array<Vector6d, RateValues::kCount> acc;
  acc.fill(Vector6d::Zero());
  for (std::size_t v = 0; v < nv; ++v) {
    const Eigen::Matrix3d micro = corrector.apply(v, eps);
    const double g = gamma_oct(micro);
    if (g <= kStimulusSingular) continue;
    const Vector6d pulled = pullback_gradient(corrector.at(v), micro, g);
    const RateValues d = rates.derivative(g);
    for (int r = 0; r < RateValues::kCount; ++r) acc[r] += d.flat(r) * pulled;
  }
  std::array<Eigen::Matrix3d, RateValues::kCount> out;
  for (int r = 0; r < RateValues::kCount; ++r)
    out[r] = gradient_from_voigt(acc[r] / static_cast<double>(nv));
  return out;
}

std::array<double, RateValues::kCount> hom_rates_d_density(
    const CorrectorField& center, const CorrectorField& plus, const CorrectorField& minus,
    double h, const Eigen::Matrix3d& eps, const RateTable& rates) {
  const std::size_t nv = center.voxels();
  const Vector6d eng = voigt_strain(eps);
  std::array<double, RateValues::kCount> acc{};
  for (std::size_t v = 0; v < nv; ++v) {
    const Eigen::Matrix3d micro = center.apply(v, eps);
    const double g = gamma_oct(micro);
    if (g <= kStimulusSingular) continue;
    const Vector6d dmicro = ((plus.at(v) - minus.at(v)).cast<double>() / h) * eng;
    const double inner = d_gamma_oct(micro, from_voigt_tensor(dmicro));
    const RateValues d = rates.derivative(g);
    for (int r = 0; r < RateValues::kCount; ++r) acc[r] += d.flat(r) * inner;
  }
  for (double& x : acc) x /= static_cast<double>(nv);
  return acc;
}

}  // namespace schom
