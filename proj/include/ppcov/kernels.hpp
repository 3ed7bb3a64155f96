#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>

namespace ppcov {

struct Point
{
  double x = 0.0;
  double y = 0.0;
};

using Vec2 = std::array<double, 2>;

enum class KernelFamily
{
  gaussian,
  epanechnikov
};

KernelFamily parse_kernel_family(std::string_view name);
std::string to_string(KernelFamily family);

//! Univariate kernel L (also the factor of the product kernels in 2-d).
class Kernel1D
{
public:
  explicit Kernel1D(KernelFamily family = KernelFamily::gaussian)
    : family_(family)
  {}

  KernelFamily family() const { return family_; }

  double operator()(double u) const;

  //! L_b(u) = L(u / b) / b.
  double scaled(double u, double b) const { return (*this)(u / b) / b; }

  //! R(L) = \int L^2.
  double roughness() const;
  //! mu_2(L) = \int z^2 L(z) dz.
  double second_moment() const;
  //! |u| beyond which L is zero or below double precision relevance.
  double effective_support() const;

  // 1-d self-convolutions; the bivariate product kernels factor into these
  double conv_kk(double u) const;
  double conv_k2k(double u) const;
  double conv_k2k2(double u) const;

private:
  KernelFamily family_;
};

//! Symmetric positive-definite 2x2 bandwidth matrix H.
class BandwidthMatrix
{
public:
  //! Throws InputError unless [h11 h12; h12 h22] is positive definite.
  BandwidthMatrix(double h11, double h12, double h22);

  static BandwidthMatrix diagonal(double h11, double h22)
  {
    return BandwidthMatrix(h11, 0.0, h22);
  }
  static BandwidthMatrix isotropic(double h)
  {
    return BandwidthMatrix(h * h, 0.0, h * h);
  }

  double h11() const { return h11_; }
  double h12() const { return h12_; }
  double h22() const { return h22_; }
  double det() const { return h11_ * h22_ - h12_ * h12_; }
  double inv_sqrt_det() const { return inv_sqrt_det_; }
  bool is_diagonal() const { return h12_ == 0.0; }
  double trace() const { return h11_ + h22_; }
  double max_eigenvalue() const;

  //! H^{-1/2} v, using the symmetric inverse square root.
  Vec2 apply_inv_sqrt(Vec2 v) const;

  bool operator==(const BandwidthMatrix& other) const
  {
    return h11_ == other.h11_ && h12_ == other.h12_ && h22_ == other.h22_;
  }

private:
  double h11_, h12_, h22_;
  double inv_sqrt_det_;
  std::array<double, 4> inv_sqrt_; // row-major
};

class Bandwidth1D
{
public:
  //! Throws InputError unless b is finite and positive.
  explicit Bandwidth1D(double b);
  double value() const { return b_; }

private:
  double b_;
};

//! Bivariate product kernel K(u) = L(u1) L(u2) with L of the given family.
//! Both families satisfy \int u u^T K = mu_2(K) I_2.
class Kernel2D
{
public:
  explicit Kernel2D(KernelFamily family = KernelFamily::gaussian)
    : factor_(family)
  {}

  KernelFamily family() const { return factor_.family(); }
  const Kernel1D& factor() const { return factor_; }

  double operator()(Vec2 u) const { return factor_(u[0]) * factor_(u[1]); }

private:
  Kernel1D factor_;
};

//! K_H(v) = |H|^{-1/2} K(H^{-1/2} v).
double eval_KH(const Kernel2D& K, const BandwidthMatrix& H, Vec2 v);

struct KernelConstants
{
  double roughness;     // R(K)
  double second_moment; // mu_2(K)
};

KernelConstants kernel_constants(const Kernel2D& K);

struct SelfConvolutions
{
  double kk;   // (K o K)(u)
  double k2k;  // (K^2 o K)(u)
  double k2k2; // (K^2 o K^2)(u)
};

SelfConvolutions self_convolutions(const Kernel2D& K, Vec2 u);

//! Normal-reference rule H = diag(s_x^2, s_y^2) N^{-1/3}.
//! Throws NumericError("cannot select H") for N < 2 or zero spread.
BandwidthMatrix select_H(std::span<const Point> points);

//! Silverman's rule 1.06 min(s, IQR/1.34) n^{-1/5}.
//! Throws NumericError for n < 2 or zero spread.
Bandwidth1D select_b(std::span<const double> values);

} // namespace ppcov
