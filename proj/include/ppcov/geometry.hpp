#pragma once

#include "ppcov/kernels.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace ppcov {

//! Placement of a regular raster. Row 0 is the southernmost row; ESRI ASCII
//! files list the northern row first and are flipped on read/write.
struct RasterGeometry
{
  std::size_t nrows = 0;
  std::size_t ncols = 0;
  double x_origin = 0.0; // lower-left corner
  double y_origin = 0.0;
  double cellsize = 1.0;

  std::size_t size() const { return nrows * ncols; }
  std::size_t index(std::size_t row, std::size_t col) const
  {
    return row * ncols + col;
  }
  double xmax() const { return x_origin + static_cast<double>(ncols) * cellsize; }
  double ymax() const { return y_origin + static_cast<double>(nrows) * cellsize; }
  Point center(std::size_t row, std::size_t col) const
  {
    return { x_origin + (static_cast<double>(col) + 0.5) * cellsize,
             y_origin + (static_cast<double>(row) + 0.5) * cellsize };
  }
  //! Cell containing p (half-open cells, the far edges belong to the last
  //! cell); nullopt outside the extent.
  std::optional<std::size_t> locate(Point p) const;
  bool same_as(const RasterGeometry& other) const;
  //! Throws InputError on non-positive dimensions or cell size.
  void validate() const;
};

//! Raster of the covariate Z with per-cell nodata flags.
class CovariateGrid
{
public:
  CovariateGrid(RasterGeometry geometry,
                std::vector<double> values,
                std::vector<std::uint8_t> nodata = {});

  //! Samples fn at every cell center.
  static CovariateGrid from_function(RasterGeometry geometry,
                                     const std::function<double(Point)>& fn);

  const RasterGeometry& geometry() const { return geometry_; }
  double value(std::size_t row, std::size_t col) const
  {
    return values_[geometry_.index(row, col)];
  }
  bool is_nodata(std::size_t row, std::size_t col) const
  {
    return nodata_[geometry_.index(row, col)] != 0;
  }
  std::span<const double> values() const { return values_; }
  std::span<const std::uint8_t> nodata() const { return nodata_; }

  //! Same grid with all coordinates shifted by (dx, dy).
  CovariateGrid translated(double dx, double dy) const;

private:
  RasterGeometry geometry_;
  std::vector<double> values_;
  std::vector<std::uint8_t> nodata_;
};

//! Boolean raster marking cells inside W.
struct RasterMask
{
  RasterGeometry geometry;
  std::vector<std::uint8_t> inside;
};

//! Rectangle with an optional validity mask.
class ObservationWindow
{
public:
  static ObservationWindow rectangle(double xmin, double xmax, double ymin, double ymax);
  //! Extent of the grid, no mask.
  static ObservationWindow from_grid(const CovariateGrid& grid);
  //! Extent of the grid restricted to the mask; mask and grid must share
  //! dimensions, origin and cell size.
  static ObservationWindow masked(const CovariateGrid& grid, RasterMask mask);

  double xmin() const { return xmin_; }
  double xmax() const { return xmax_; }
  double ymin() const { return ymin_; }
  double ymax() const { return ymax_; }
  const std::optional<RasterMask>& mask() const { return mask_; }

  bool contains(Point p) const;
  ObservationWindow translated(double dx, double dy) const;

private:
  ObservationWindow(double xmin, double xmax, double ymin, double ymax);

  double xmin_, xmax_, ymin_, ymax_;
  std::optional<RasterMask> mask_;
};

//! |W|: rectangle area, or count of mask cells times the cell area.
//! Throws InputError("window has zero area") for an empty mask.
double window_area(const ObservationWindow& window);

//! Bilinear interpolation of Z among the valid cell centers around p.
//! Nodata corners are dropped and the remaining weights renormalised; if
//! all four are nodata the nearest valid cell center is used. Beyond the
//! outermost ring of centers the stencil extrapolates linearly, so linear
//! fields are reproduced everywhere in the window.
double covariate_at(const CovariateGrid& grid, const ObservationWindow& window, Point p);

//! Quadrature mesh shared by every integral over W. Cells are (nearly)
//! square, `cells_longest_axis` across the longer side of the window
//! rectangle; a cell belongs to W when its center does. Each in-window cell
//! caches Z at its center, and cells sharing a covariate value share a level
//! index so functions of Z(x) need one evaluation per distinct value.
class Mesh
{
public:
  Mesh(CovariateGrid grid, ObservationWindow window, std::size_t cells_longest_axis = 256);

  const CovariateGrid& grid() const { return grid_; }
  const ObservationWindow& window() const { return window_; }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return nx_ * ny_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  double cell_area() const { return dx_ * dy_; }
  std::size_t index(std::size_t row, std::size_t col) const { return row * nx_ + col; }
  Point center(std::size_t row, std::size_t col) const
  {
    return { window_.xmin() + (static_cast<double>(col) + 0.5) * dx_,
             window_.ymin() + (static_cast<double>(row) + 0.5) * dy_ };
  }
  Point center(std::size_t cell) const { return center(cell / nx_, cell % nx_); }

  bool inside(std::size_t cell) const { return inside_[cell] != 0; }
  std::span<const std::uint8_t> inside_flags() const { return inside_; }
  std::size_t inside_count() const { return inside_count_; }
  bool is_full_rectangle() const { return inside_count_ == size(); }
  //! Discrete |W|: in-window cell count times the cell area.
  double area() const { return static_cast<double>(inside_count_) * cell_area(); }

  //! Z at each cell center (0 for cells outside W).
  std::span<const double> covariate() const { return covariate_; }
  //! Sorted distinct covariate values over in-window cells.
  std::span<const double> levels() const { return levels_; }
  //! Level index per cell (unused for cells outside W).
  std::span<const std::uint32_t> level_of_cell() const { return level_of_cell_; }

  //! Mesh cell containing p, or nullopt outside the rectangle.
  std::optional<std::size_t> locate(Point p) const;

  double covariate_at(Point p) const { return ppcov::covariate_at(grid_, window_, p); }

  bool same_layout(const Mesh& other) const;

private:
  CovariateGrid grid_;
  ObservationWindow window_;
  std::size_t nx_ = 0, ny_ = 0;
  double dx_ = 0.0, dy_ = 0.0;
  std::vector<std::uint8_t> inside_;
  std::size_t inside_count_ = 0;
  std::vector<double> covariate_;
  std::vector<double> levels_;
  std::vector<std::uint32_t> level_of_cell_;
};

using MeshPtr = std::shared_ptr<const Mesh>;

MeshPtr make_mesh(CovariateGrid grid, ObservationWindow window, std::size_t cells_longest_axis = 256);

//! Midpoint rule: sum of in-window cell values times the cell area.
//! Throws InputError on a size mismatch or an empty window.
double quadrature(std::span<const double> values, const Mesh& mesh);

//! Event locations with their cached covariate values.
class PointPattern
{
public:
  PointPattern() = default;
  //! Validates every point against the mesh window and caches Z(X_i).
  PointPattern(std::vector<Point> points, const Mesh& mesh);
  //! Trusted constructor for points already known to be inside W.
  static PointPattern from_parts(std::vector<Point> points, std::vector<double> z_values);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  std::span<const Point> points() const { return points_; }
  std::span<const double> z_values() const { return z_values_; }

  //! Each point repeated `times` times (order: the whole pattern, then again).
  PointPattern replicated(std::size_t times) const;

private:
  std::vector<Point> points_;
  std::vector<double> z_values_;
};

//! Spatial distribution of Z over W: the area-weighted CDF G, the density g
//! (weighted Gaussian KDE of cell-center values) and g* = |W| g tabulated
//! on an evenly spaced z grid and clipped below at 1e-6 max(g*).
class SpatialCovariateDistribution
{
public:
  //! Direct construction from tables: `z_grid` evenly spaced and increasing,
  //! `gstar_values` (before clipping) on it, and the exact CDF given by
  //! sorted `levels` with cumulative fractions `cumulative`.
  SpatialCovariateDistribution(std::vector<double> z_grid,
                               std::vector<double> gstar_values,
                               std::vector<double> levels,
                               std::vector<double> cumulative,
                               double window_area);

  //! Uniformly distributed covariate on [zmin, zmax] over a window of the
  //! given area: g* is the constant area / (zmax - zmin) everywhere.
  static SpatialCovariateDistribution uniform(double zmin, double zmax, double area);

  double G(double z) const;
  double g(double z) const { return gstar(z) / window_area_; }
  //! g*(z), linearly interpolated and clipped to the floor.
  double gstar(double z) const;

  std::span<const double> z_grid() const { return z_grid_; }
  std::span<const double> G_values() const { return G_values_; }
  std::span<const double> gstar_values() const { return gstar_values_; }
  double gstar_floor() const { return floor_; }
  double window_area() const { return window_area_; }

private:
  std::vector<double> z_grid_;
  std::vector<double> gstar_values_;
  std::vector<double> G_values_;
  std::vector<double> levels_;
  std::vector<double> cumulative_;
  double floor_ = 0.0;
  double window_area_ = 1.0;
  double z0_ = 0.0, dz_ = 1.0;
};

//! Builds G, g, g* from the mesh's in-window cell-center covariate values.
//! Throws NumericError("degenerate covariate") with fewer than two distinct
//! values.
SpatialCovariateDistribution build_spatial_distribution(const Mesh& mesh, Bandwidth1D smoothing);

//! Same, with the normal-reference (Silverman) smoothing bandwidth on the
//! cell-center values.
SpatialCovariateDistribution build_spatial_distribution(const Mesh& mesh);

} // namespace ppcov
