#include "convolve/ou_law.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "convolve/counter_rng.hpp"
#include "convolve/errors.hpp"

namespace convolve {

namespace {

using Mat = Eigen::Matrix3d;

Mat to_eigen(const Matrix3& m) {
  Mat out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out(i, j) = m[i][j];
  return out;
}

Matrix3 from_eigen(const Mat& m) {
  Matrix3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[i][j] = m(i, j);
  return out;
}

// e^w - 1 without cancellation for small |w|.
Complex expm1_complex(Complex w) {
  const double x = w.real();
  const double y = w.imag();
  const double s = std::sin(y / 2.0);
  return {std::expm1(x) * std::cos(y) - 2.0 * s * s, std::exp(x) * std::sin(y)};
}

// Symmetric square root V sqrt(D). Eigenvalues at rounding level are set to
// zero: their square roots would add spurious noise of order 1e-8 to
// degenerate laws such as mu = 0, where Re I equals dW exactly.
Mat psd_factor(const Mat& cov, double negative_tolerance, const char* what) {
  const Mat sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> solver(sym);
  Eigen::Vector3d values = solver.eigenvalues();
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * values.cwiseAbs().maxCoeff();
  for (int i = 0; i < 3; ++i) {
    if (values(i) < -negative_tolerance) {
      throw Error(std::string(what) + ": covariance is not positive semidefinite");
    }
    if (values(i) <= floor) values(i) = 0.0;
  }
  return solver.eigenvectors() * values.cwiseSqrt().asDiagonal();
}

Mat rotation(Complex e) {
  Mat l = Mat::Zero();
  l(0, 0) = e.real();
  l(0, 1) = -e.imag();
  l(1, 0) = e.imag();
  l(1, 1) = e.real();
  l(2, 2) = 1.0;
  return l;
}

}  // namespace

Complex integral_exp(Complex z, double h) {
  const Complex w = z * h;
  if (std::abs(w) <= 1e-6) {
    return h * (1.0 + w / 2.0 + w * w / 6.0 + w * w * w / 24.0 + w * w * w * w / 120.0);
  }
  return expm1_complex(w) / z;
}

OuStepLaw ou_step_cov(Complex mu, Complex g, double h) {
  if (!(h > 0.0)) throw DomainError("step length must be positive");
  OuStepLaw law;
  law.mu = mu;
  law.g = g;
  law.h = h;
  const double a = std::norm(g) * integral_exp(Complex(2.0 * mu.real(), 0.0), h).real();
  const Complex b = g * g * integral_exp(2.0 * mu, h);
  const Complex c = g * integral_exp(mu, h);
  Matrix3& s = law.cov;
  s[0][0] = 0.5 * (a + b.real());
  s[1][1] = 0.5 * (a - b.real());
  s[0][1] = s[1][0] = 0.5 * b.imag();
  s[0][2] = s[2][0] = c.real();
  s[1][2] = s[2][1] = c.imag();
  s[2][2] = h;
  const Mat cov = to_eigen(s);
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  law.factor = from_eigen(psd_factor(cov, 1e-12 * scale, "OU step law"));
  return law;
}

OuBridgeLaw ou_bridge(Complex mu, Complex g, double half_step) {
  const OuStepLaw child = ou_step_cov(mu, g, half_step);
  OuBridgeLaw bridge;
  bridge.half_decay = std::exp(mu * half_step);
  const Mat f = to_eigen(child.factor);
  const Mat l = rotation(bridge.half_decay);

  // Write the halves as X1 = F Z1, X2 = F Z2 with Z standard normal in R^6,
  // so the whole step is X = B Z with B = [L F, F]. Given X, Z is
  // B^+ X plus an independent standard normal projected on ker B. Working
  // with B instead of inverting cov(X) keeps nearly singular steps
  // (|mu| h small) accurate.
  Eigen::Matrix<double, 3, 6> b;
  b << l * f, f;
  Eigen::JacobiSVD<Eigen::Matrix<double, 3, 6>> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sigma = svd.singularValues();
  const Eigen::Matrix<double, 6, 6> v = svd.matrixV();
  Eigen::Matrix<double, 6, 3> pinv = Eigen::Matrix<double, 6, 3>::Zero();
  Eigen::Matrix<double, 6, 6> kernel = Eigen::Matrix<double, 6, 6>::Identity();
  for (int i = 0; i < 3; ++i) {
    if (sigma(i) > 1e-13 * sigma(0)) {
      pinv += v.col(i) * svd.matrixU().col(i).transpose() / sigma(i);
      kernel -= v.col(i) * v.col(i).transpose();
    }
  }
  Eigen::Matrix<double, 3, 6> first = Eigen::Matrix<double, 3, 6>::Zero();
  first.leftCols<3>() = f;
  bridge.gain = from_eigen(first * pinv);

  // Conditional covariance G G^T with G = [F, 0] P; G^T = Q R gives R^T as a factor.
  const Eigen::Matrix<double, 6, 3> gt = (first * kernel).transpose();
  Eigen::HouseholderQR<Eigen::Matrix<double, 6, 3>> qr(gt);
  const Mat r = qr.matrixQR().topRows<3>().triangularView<Eigen::Upper>();
  bridge.factor = from_eigen(r.transpose());
  return bridge;
}

ModeSampler::ModeSampler(Complex mu, Complex g, double horizon, int depth)
    : mu_(mu), g_(g), depth_(depth) {
  if (depth < 0 || depth > 30) throw DomainError("sampler depth must be in [0, 30]");
  // Laws are built for unit forcing; g multiplies the convolution at the end,
  // so paths are exactly linear in g.
  root_factor_ = ou_step_cov(mu, 1.0, horizon).factor;
  double step = horizon;
  for (int level = 0; level < depth; ++level) {
    step /= 2.0;
    splits_.push_back(ou_bridge(mu, 1.0, step));
  }
}

namespace {

inline void apply(const Matrix3& m, const double* x, double* out) {
  for (int i = 0; i < 3; ++i) out[i] = m[i][0] * x[0] + m[i][1] * x[1] + m[i][2] * x[2];
}

}  // namespace

void ModeSampler::sample(std::uint64_t key, std::span<StepValue> out) const {
  const std::size_t n = std::size_t{1} << depth_;
  if (out.size() != n) throw DimensionError("sampler output must hold 2^depth steps");
  // Work in (Re I, Im I, dW) triples for unit forcing. Stream 0 is the root; node ids in
  // heap order (level l, index i -> 2^l + i) number the splits.
  std::vector<std::array<double, 3>> x(n);
  {
    RandomStream rng(key, 0);
    const double z[3] = {rng.normal(), rng.normal(), rng.normal()};
    apply(root_factor_, z, x[0].data());
  }
  for (int level = 0; level < depth_; ++level) {
    const OuBridgeLaw& law = splits_[level];
    const double c = law.half_decay.real();
    const double s = law.half_decay.imag();
    const std::size_t parents = std::size_t{1} << level;
    for (std::size_t i = parents; i-- > 0;) {
      const std::array<double, 3> whole = x[i];
      RandomStream rng(key, parents + i);
      const double z[3] = {rng.normal(), rng.normal(), rng.normal()};
      double mean[3], noise[3];
      apply(law.gain, whole.data(), mean);
      apply(law.factor, z, noise);
      const std::array<double, 3> first{mean[0] + noise[0], mean[1] + noise[1], mean[2] + noise[2]};
      const std::array<double, 3> second{whole[0] - (c * first[0] - s * first[1]),
                                         whole[1] - (s * first[0] + c * first[1]),
                                         whole[2] - first[2]};
      x[2 * i] = first;
      x[2 * i + 1] = second;
    }
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = {g_ * Complex(x[i][0], x[i][1]), x[i][2]};
}

}  // namespace convolve
