#pragma once

#include "ppcov/estimators.hpp"
#include "ppcov/geometry.hpp"
#include "ppcov/kernels.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ppcov {

//! T = \int_W (lambda_hat_{0,H}(x) - rho_hat_{0,b}(Z(x)))^2 dx on the shared mesh.
//! Throws InputError when the surfaces live on different meshes.
double statistic_T(const RelativeDensitySurface& spatial,
                   const RelativeDensitySurface& covariate);

//! Pilot intensity rho_hat_t(Z(x)) = f_hat_t(Z(x)) n / g*(Z(x)).
//! Throws InputError("cannot build pilot from empty pattern") for N = 0.
IntensitySurface pilot_intensity(const PointPattern& pattern,
                                 const SpatialCovariateDistribution& dist,
                                 const Kernel1D& L,
                                 Bandwidth1D t,
                                 const MeshPtr& mesh);

//! (1 + #{T*_j >= T}) / (B + 1).
double monte_carlo_p_value(double T, std::span<const double> T_star);

//! Settings shared by the observed statistic and its bootstrap replicates.
struct TestConfig
{
  Kernel2D K{ KernelFamily::gaussian };
  Kernel1D L{ KernelFamily::gaussian };
  std::optional<BandwidthMatrix> H; // fixed H; select_H on each pattern otherwise
  std::optional<Bandwidth1D> b;     // fixed b; select_b on each pattern otherwise
  std::optional<Bandwidth1D> t;     // pilot; select_b on the data otherwise
  std::size_t B = 500;
  std::uint64_t seed = 42;
  //! Re-run the selectors on every bootstrap pattern (when H / b are not fixed).
  bool reselect_bandwidths = true;
  EdgeCorrection edge = EdgeCorrection::window;
  unsigned jobs = 1;
};

//! The statistic together with the bandwidths it was computed with.
struct StatisticEvaluation
{
  double T;
  BandwidthMatrix H;
  Bandwidth1D b;
  RelativeDensitySurface spatial;
  RelativeDensitySurface covariate;
};

//! Selects (or takes the fixed) H and b and evaluates T. Requires N >= 2
//! unless both bandwidths are fixed; N >= 1 always.
StatisticEvaluation evaluate_statistic(const PointPattern& pattern,
                                       const MeshPtr& mesh,
                                       const SpatialCovariateDistribution& dist,
                                       const TestConfig& config);

struct TestResult
{
  double T = 0.0;
  std::size_t B = 0;
  std::vector<double> T_star;
  double p_value = 1.0;
  BandwidthMatrix H = BandwidthMatrix::isotropic(1.0);
  Bandwidth1D b{ 1.0 };
  Bandwidth1D t{ 1.0 };
  std::uint64_t seed = 0;
  std::size_t n = 0;
  //! replicates whose Poisson count was zero (T* = 0 by the 1{N != 0} factor)
  std::size_t empty_replicates = 0;
};

//! Smooth-bootstrap calibration of T: B patterns are drawn from the pilot
//! rho_hat_t(Z(x)) (Poisson count, then cell-multinomial locations with
//! uniform jitter), T* recomputed on each. Replicate j draws from the
//! stream derived from (seed, j), so results do not depend on `jobs`.
TestResult bootstrap_test(const PointPattern& pattern,
                          const MeshPtr& mesh,
                          const SpatialCovariateDistribution& dist,
                          const TestConfig& config);

//! One bootstrap test per pilot bandwidth; the observed T is shared.
std::vector<TestResult> bootstrap_scan(const PointPattern& pattern,
                                       const MeshPtr& mesh,
                                       const SpatialCovariateDistribution& dist,
                                       const TestConfig& config,
                                       std::span<const double> pilot_bandwidths);

//! Normal approximation of T under the null with m ~ n and A(m) ~ 1/n.
struct AsymptoticApprox
{
  double mu_T = 0.0;
  double sigma2_T = 0.0;
  double z_score = 0.0;
  double p_normal = 0.0;
  //! (1/n)|H|^{-1/2}R(K), (1/2)mu2 \int l tr(H D^2 l), (1/4)mu2^2 \int tr^2(H D^2 l)
  std::array<double, 3> mu_terms{};
  //! (1/n)|H|^{-1/2} \int\int l^2(x) l(y) (KoK)(H^{-1/2}(x-y)), 2(1/n)|H|^{-1/2} R(l) R(K)
  std::array<double, 2> sigma2_terms{};
};

//! Plug-in moments using the spatial surface as lambda_0. Diagnostic only;
//! the bootstrap is the calibration. Throws NumericError("degenerate
//! variance") if sigma^2 <= 0.
AsymptoticApprox asymptotic_moments(const RelativeDensitySurface& spatial,
                                    const Kernel2D& K,
                                    const BandwidthMatrix& H,
                                    std::size_t n,
                                    double T);

//! tr(H D^2 f) at every in-window cell (0 outside) from centred second
//! differences, one-sided where the mask cuts the stencil.
std::vector<double> hessian_trace(std::span<const double> values,
                                  const Mesh& mesh,
                                  const BandwidthMatrix& H);

//! Addends of T expanded as U-statistics over the points, without edge
//! correction:
//!   [0] N^-2 sum_i      \int K_H(x-X_i)^2
//!   [1] N^-2 sum_{i!=j} \int K_H(x-X_i) K_H(x-X_j)
//!   [2] N^-2 sum_i      \int w_i^2 L_b(Z(x)-Z_i)^2
//!   [3] N^-2 sum_{i!=j} \int w_i w_j L_b(Z(x)-Z_i) L_b(Z(x)-Z_j)
//!   [4] -2 N^-2 sum_i      \int K_H(x-X_i) w_i L_b(Z(x)-Z_i)
//!   [5] -2 N^-2 sum_{i!=j} \int K_H(x-X_i) w_j L_b(Z(x)-Z_j)
//! with w_i = 1/g*(Z_i). Every integral is evaluated independently on the
//! mesh, O(N^2 cells): intended as a cross-check for small patterns.
struct UStatisticTerms
{
  std::array<double, 6> addends{};
  double total = 0.0;
};

UStatisticTerms ustat_T_terms(const PointPattern& pattern,
                              const SpatialCovariateDistribution& dist,
                              const Kernel2D& K,
                              const BandwidthMatrix& H,
                              const Kernel1D& L,
                              Bandwidth1D b,
                              const Mesh& mesh);

double ustat_T_oracle(const PointPattern& pattern,
                      const SpatialCovariateDistribution& dist,
                      const Kernel2D& K,
                      const BandwidthMatrix& H,
                      const Kernel1D& L,
                      Bandwidth1D b,
                      const Mesh& mesh);

} // namespace ppcov
