#include "ppcov/kernels.hpp"

#include "ppcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace ppcov {

namespace {

constexpr double inv_sqrt_2pi = 0.3989422804014327; // 1/sqrt(2 pi)

double epan(double u)
{
  return std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
}

// 5-point Gauss-Legendre: exact for the polynomial integrands of the
// Epanechnikov self-convolutions (degree <= 8).
template<class F>
double gauss_legendre5(F&& f, double a, double b)
{
  static constexpr std::array<double, 5> nodes = { 0.0,
                                                   -0.5384693101056831,
                                                   0.5384693101056831,
                                                   -0.9061798459386640,
                                                   0.9061798459386640 };
  static constexpr std::array<double, 5> weights = { 0.5688888888888889,
                                                     0.4786286704993665,
                                                     0.4786286704993665,
                                                     0.2369268850561891,
                                                     0.2369268850561891 };
  if (b <= a) {
    return 0.0;
  }
  double half = 0.5 * (b - a);
  double mid = 0.5 * (a + b);
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    sum += weights[i] * f(mid + half * nodes[i]);
  }
  return half * sum;
}

template<class F>
double epan_convolution(F&& integrand, double u)
{
  double lo = std::max(-1.0, u - 1.0);
  double hi = std::min(1.0, u + 1.0);
  return gauss_legendre5(integrand, lo, hi);
}

double sample_sd(std::span<const double> v)
{
  double mean = 0.0;
  for (double x : v) {
    mean += x;
  }
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) {
    ss += (x - mean) * (x - mean);
  }
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// type-7 quantile of sorted data
double quantile_sorted(const std::vector<double>& sorted, double p)
{
  double pos = p * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace

KernelFamily parse_kernel_family(std::string_view name)
{
  if (name == "gaussian") {
    return KernelFamily::gaussian;
  }
  if (name == "epanechnikov" || name == "epanechnikov-product") {
    return KernelFamily::epanechnikov;
  }
  throw InputError("unknown kernel family '" + std::string(name) + "'");
}

std::string to_string(KernelFamily family)
{
  return family == KernelFamily::gaussian ? "gaussian" : "epanechnikov";
}

double Kernel1D::operator()(double u) const
{
  if (family_ == KernelFamily::gaussian) {
    return inv_sqrt_2pi * std::exp(-0.5 * u * u);
  }
  return epan(u);
}

double Kernel1D::roughness() const
{
  return family_ == KernelFamily::gaussian ? 0.5 / std::sqrt(std::numbers::pi)
                                           : 0.6;
}

double Kernel1D::second_moment() const
{
  return family_ == KernelFamily::gaussian ? 1.0 : 0.2;
}

double Kernel1D::effective_support() const
{
  // exp(-u^2/2) < 1e-17 beyond 8.9
  return family_ == KernelFamily::gaussian ? 9.0 : 1.0;
}

double Kernel1D::conv_kk(double u) const
{
  if (family_ == KernelFamily::gaussian) {
    return std::exp(-0.25 * u * u) / std::sqrt(4.0 * std::numbers::pi);
  }
  return epan_convolution([u](double v) { return epan(v) * epan(u - v); }, u);
}

double Kernel1D::conv_k2k(double u) const
{
  if (family_ == KernelFamily::gaussian) {
    // L^2 = N(0, 1/2) / (2 sqrt(pi)); convolving with N(0, 1) gives N(0, 3/2)
    return std::exp(-u * u / 3.0) /
           (2.0 * std::sqrt(std::numbers::pi) * std::sqrt(3.0 * std::numbers::pi));
  }
  return epan_convolution(
    [u](double v) { return epan(v) * epan(v) * epan(u - v); }, u);
}

double Kernel1D::conv_k2k2(double u) const
{
  if (family_ == KernelFamily::gaussian) {
    return inv_sqrt_2pi * std::exp(-0.5 * u * u) / (4.0 * std::numbers::pi);
  }
  return epan_convolution(
    [u](double v) {
      double a = epan(v);
      double b = epan(u - v);
      return a * a * b * b;
    },
    u);
}

BandwidthMatrix::BandwidthMatrix(double h11, double h12, double h22)
  : h11_(h11), h12_(h12), h22_(h22)
{
  if (!std::isfinite(h11) || !std::isfinite(h12) || !std::isfinite(h22) ||
      h11 <= 0.0 || h22 <= 0.0 || det() <= 0.0) {
    throw InputError("bandwidth matrix is not symmetric positive-definite");
  }
  double s = std::sqrt(det());
  inv_sqrt_det_ = 1.0 / s;
  // sqrt(H) = (H + s I) / t with t = sqrt(tr H + 2 s); invert that
  double t = std::sqrt(trace() + 2.0 * s);
  double a = h11_ + s;
  double d = h22_ + s;
  double det_shift = a * d - h12_ * h12_;
  inv_sqrt_ = { t * d / det_shift,
                -t * h12_ / det_shift,
                -t * h12_ / det_shift,
                t * a / det_shift };
}

double BandwidthMatrix::max_eigenvalue() const
{
  double half_tr = 0.5 * trace();
  double disc = std::sqrt(0.25 * (h11_ - h22_) * (h11_ - h22_) + h12_ * h12_);
  return half_tr + disc;
}

Vec2 BandwidthMatrix::apply_inv_sqrt(Vec2 v) const
{
  return { inv_sqrt_[0] * v[0] + inv_sqrt_[1] * v[1],
           inv_sqrt_[2] * v[0] + inv_sqrt_[3] * v[1] };
}

Bandwidth1D::Bandwidth1D(double b) : b_(b)
{
  if (!std::isfinite(b) || b <= 0.0) {
    throw InputError("bandwidth must be positive and finite");
  }
}

double eval_KH(const Kernel2D& K, const BandwidthMatrix& H, Vec2 v)
{
  return H.inv_sqrt_det() * K(H.apply_inv_sqrt(v));
}

KernelConstants kernel_constants(const Kernel2D& K)
{
  double r = K.factor().roughness();
  return { r * r, K.factor().second_moment() };
}

SelfConvolutions self_convolutions(const Kernel2D& K, Vec2 u)
{
  const Kernel1D& k = K.factor();
  return { k.conv_kk(u[0]) * k.conv_kk(u[1]),
           k.conv_k2k(u[0]) * k.conv_k2k(u[1]),
           k.conv_k2k2(u[0]) * k.conv_k2k2(u[1]) };
}

BandwidthMatrix select_H(std::span<const Point> points)
{
  if (points.size() < 2) {
    throw NumericError("cannot select H: fewer than two points");
  }
  std::vector<double> xs, ys;
  xs.reserve(points.size());
  ys.reserve(points.size());
  for (const Point& p : points) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  // summing in sorted order makes the result independent of point order
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double sx = sample_sd(xs);
  double sy = sample_sd(ys);
  // identical coordinates can leave a rounding-level sd behind
  if (xs.front() == xs.back() || ys.front() == ys.back() || !(sx > 0.0) || !(sy > 0.0)) {
    throw NumericError("cannot select H: zero coordinate spread");
  }
  double scale = std::pow(static_cast<double>(points.size()), -1.0 / 3.0);
  return BandwidthMatrix::diagonal(sx * sx * scale, sy * sy * scale);
}

Bandwidth1D select_b(std::span<const double> values)
{
  if (values.size() < 2) {
    throw NumericError("cannot select b: fewer than two values");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double s = sample_sd(sorted);
  double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = s;
  if (iqr > 0.0) {
    spread = std::min(s, iqr / 1.34);
  }
  if (sorted.front() == sorted.back() || !(spread > 0.0)) {
    throw NumericError("cannot select b: zero spread");
  }
  double n = static_cast<double>(values.size());
  return Bandwidth1D(1.06 * spread * std::pow(n, -0.2));
}

} // namespace ppcov
