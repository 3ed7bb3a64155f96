#pragma once

#include "ppcov/geometry.hpp"
#include "ppcov/kernels.hpp"

#include <vector>

namespace ppcov {

//! Gridded intensity (events per unit area) on a quadrature mesh.
struct IntensitySurface
{
  MeshPtr mesh;
  std::vector<double> values; // one per mesh cell, 0 outside W
};

//! Gridded relative density lambda_0 = lambda / m on a quadrature mesh.
struct RelativeDensitySurface
{
  MeshPtr mesh;
  std::vector<double> values; // one per mesh cell, 0 outside W
  std::size_t n = 0;          // N used for normalisation
  bool empty_pattern = false; // N = 0: identically zero by the 1{N != 0} factor
};

enum class EdgeCorrection
{
  window, // p_H(x) = \int_W K_H(x - y) dy
  none    // p_H = 1
};

//! p_H(x) by the mesh quadrature of K_H(x - .) over W.
//! Throws NumericError("bandwidth too large for window") when it is <= 1e-12.
double edge_correction(const Kernel2D& K, const BandwidthMatrix& H, const Mesh& mesh, Point x);

//! p_H at every mesh cell center (1 outside W). Product kernels with a
//! diagonal H use separable row/column filtering; other cases sum directly.
std::vector<double> edge_correction_surface(const Kernel2D& K,
                                            const BandwidthMatrix& H,
                                            const Mesh& mesh);

//! Diggle's estimator sum_i K_H(x - X_i) / p_H(x). Throws InputError on N = 0.
double diggle_intensity(const PointPattern& pattern,
                        const Kernel2D& K,
                        const BandwidthMatrix& H,
                        const Mesh& mesh,
                        Point x,
                        EdgeCorrection edge = EdgeCorrection::window);

//! lambda_hat_{0,H} = lambda_hat^D_H / N at every in-window cell center.
//! N = 0 gives the flagged zero surface.
RelativeDensitySurface relative_density_spatial(const PointPattern& pattern,
                                                const Kernel2D& K,
                                                const BandwidthMatrix& H,
                                                const MeshPtr& mesh,
                                                EdgeCorrection edge = EdgeCorrection::window);

//! Weighted (length-biased style) covariate density
//! f_hat_b(z) = g*(z) (1/N) sum_i L_b(z - Z_i) / g*(Z_i); 0 for N = 0.
double covariate_density(const PointPattern& pattern,
                         const SpatialCovariateDistribution& dist,
                         const Kernel1D& L,
                         Bandwidth1D b,
                         double z);

//! rho_hat_{0,b}(Z(x)) = f_hat_b(Z(x)) / g*(Z(x)) at every in-window cell
//! center (m estimated by n). N = 0 gives the flagged zero surface.
RelativeDensitySurface covariate_relative_density(const PointPattern& pattern,
                                                  const SpatialCovariateDistribution& dist,
                                                  const Kernel1D& L,
                                                  Bandwidth1D b,
                                                  const MeshPtr& mesh);

namespace detail {

//! out(r, c) = sum_{r', c'} ky[r - r'] kx[c - c'] in(r', c') on an ny x nx
//! raster, where kx / ky are indexed by offset + (n - 1).
std::vector<double> separable_filter(std::span<const double> image,
                                     std::size_t ny,
                                     std::size_t nx,
                                     std::span<const double> ky,
                                     std::span<const double> kx);

} // namespace detail

} // namespace ppcov
