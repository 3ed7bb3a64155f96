#include "ppcov/geometry.hpp"

#include "ppcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace ppcov {

// ---------------------------------------------------------------------------
// RasterGeometry

std::optional<std::size_t> RasterGeometry::locate(Point p) const
{
  if (!(p.x >= x_origin && p.x <= xmax() && p.y >= y_origin && p.y <= ymax())) {
    return std::nullopt;
  }
  auto col = static_cast<std::size_t>((p.x - x_origin) / cellsize);
  auto row = static_cast<std::size_t>((p.y - y_origin) / cellsize);
  col = std::min(col, ncols - 1);
  row = std::min(row, nrows - 1);
  return index(row, col);
}

bool RasterGeometry::same_as(const RasterGeometry& other) const
{
  return nrows == other.nrows && ncols == other.ncols &&
         x_origin == other.x_origin && y_origin == other.y_origin &&
         cellsize == other.cellsize;
}

void RasterGeometry::validate() const
{
  if (nrows == 0 || ncols == 0) {
    throw InputError("raster must have positive nrows and ncols");
  }
  if (!(cellsize > 0.0) || !std::isfinite(cellsize)) {
    throw InputError("raster cellsize must be positive");
  }
  if (!std::isfinite(x_origin) || !std::isfinite(y_origin)) {
    throw InputError("raster origin must be finite");
  }
}

// ---------------------------------------------------------------------------
// CovariateGrid

CovariateGrid::CovariateGrid(RasterGeometry geometry,
                             std::vector<double> values,
                             std::vector<std::uint8_t> nodata)
  : geometry_(geometry), values_(std::move(values)), nodata_(std::move(nodata))
{
  geometry_.validate();
  if (values_.size() != geometry_.size()) {
    throw InputError("covariate grid has " + std::to_string(values_.size()) +
                     " values, expected " + std::to_string(geometry_.size()));
  }
  if (nodata_.empty()) {
    nodata_.assign(values_.size(), 0);
  }
  if (nodata_.size() != values_.size()) {
    throw InputError("nodata flags do not match the grid size");
  }
  bool any_valid = false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (nodata_[i]) {
      continue;
    }
    if (!std::isfinite(values_[i])) {
      throw InputError("covariate grid holds a non-finite value");
    }
    any_valid = true;
  }
  if (!any_valid) {
    throw InputError("covariate grid has no valid cells");
  }
}

CovariateGrid CovariateGrid::from_function(RasterGeometry geometry,
                                           const std::function<double(Point)>& fn)
{
  geometry.validate();
  std::vector<double> values(geometry.size());
  for (std::size_t r = 0; r < geometry.nrows; ++r) {
    for (std::size_t c = 0; c < geometry.ncols; ++c) {
      values[geometry.index(r, c)] = fn(geometry.center(r, c));
    }
  }
  return CovariateGrid(geometry, std::move(values));
}

CovariateGrid CovariateGrid::translated(double dx, double dy) const
{
  RasterGeometry g = geometry_;
  g.x_origin += dx;
  g.y_origin += dy;
  return CovariateGrid(g, values_, nodata_);
}

// ---------------------------------------------------------------------------
// ObservationWindow

ObservationWindow::ObservationWindow(double xmin, double xmax, double ymin, double ymax)
  : xmin_(xmin), xmax_(xmax), ymin_(ymin), ymax_(ymax)
{
  if (!(xmax > xmin) || !(ymax > ymin) || !std::isfinite(xmin) ||
      !std::isfinite(xmax) || !std::isfinite(ymin) || !std::isfinite(ymax)) {
    throw InputError("window requires xmax > xmin and ymax > ymin");
  }
}

ObservationWindow ObservationWindow::rectangle(double xmin, double xmax, double ymin, double ymax)
{
  return ObservationWindow(xmin, xmax, ymin, ymax);
}

ObservationWindow ObservationWindow::from_grid(const CovariateGrid& grid)
{
  const RasterGeometry& g = grid.geometry();
  return ObservationWindow(g.x_origin, g.xmax(), g.y_origin, g.ymax());
}

ObservationWindow ObservationWindow::masked(const CovariateGrid& grid, RasterMask mask)
{
  if (!mask.geometry.same_as(grid.geometry())) {
    throw InputError("mask dimensions, origin or cell size differ from the covariate grid");
  }
  if (mask.inside.size() != mask.geometry.size()) {
    throw InputError("mask flags do not match the mask size");
  }
  ObservationWindow w = from_grid(grid);
  w.mask_ = std::move(mask);
  return w;
}

bool ObservationWindow::contains(Point p) const
{
  if (!(p.x >= xmin_ && p.x <= xmax_ && p.y >= ymin_ && p.y <= ymax_)) {
    return false;
  }
  if (!mask_) {
    return true;
  }
  auto cell = mask_->geometry.locate(p);
  return cell && mask_->inside[*cell] != 0;
}

ObservationWindow ObservationWindow::translated(double dx, double dy) const
{
  ObservationWindow w(xmin_ + dx, xmax_ + dx, ymin_ + dy, ymax_ + dy);
  if (mask_) {
    RasterMask m = *mask_;
    m.geometry.x_origin += dx;
    m.geometry.y_origin += dy;
    w.mask_ = std::move(m);
  }
  return w;
}

double window_area(const ObservationWindow& window)
{
  if (!window.mask()) {
    return (window.xmax() - window.xmin()) * (window.ymax() - window.ymin());
  }
  const RasterMask& m = *window.mask();
  auto count = static_cast<std::size_t>(
    std::count_if(m.inside.begin(), m.inside.end(), [](std::uint8_t f) { return f != 0; }));
  if (count == 0) {
    throw InputError("window has zero area");
  }
  return static_cast<double>(count) * m.geometry.cellsize * m.geometry.cellsize;
}

// ---------------------------------------------------------------------------
// covariate_at

namespace {

double nearest_valid(const CovariateGrid& grid, Point p)
{
  const RasterGeometry& g = grid.geometry();
  auto col_f = std::clamp((p.x - g.x_origin) / g.cellsize, 0.0, static_cast<double>(g.ncols) - 1.0);
  auto row_f = std::clamp((p.y - g.y_origin) / g.cellsize, 0.0, static_cast<double>(g.nrows) - 1.0);
  auto c0 = static_cast<long>(col_f);
  auto r0 = static_cast<long>(row_f);
  long max_ring = static_cast<long>(std::max(g.nrows, g.ncols));

  double best = std::numeric_limits<double>::infinity();
  double best_value = 0.0;
  for (long ring = 0; ring <= max_ring; ++ring) {
    // every cell in this ring is at least (ring - 1) cells away from p
    double lower = static_cast<double>(std::max(0L, ring - 1)) * g.cellsize;
    if (lower * lower > best) {
      break;
    }
    for (long dr = -ring; dr <= ring; ++dr) {
      for (long dc = -ring; dc <= ring; ++dc) {
        if (std::max(std::abs(dr), std::abs(dc)) != ring) {
          continue;
        }
        long r = r0 + dr;
        long c = c0 + dc;
        if (r < 0 || c < 0 || r >= static_cast<long>(g.nrows) || c >= static_cast<long>(g.ncols)) {
          continue;
        }
        auto ur = static_cast<std::size_t>(r);
        auto uc = static_cast<std::size_t>(c);
        if (grid.is_nodata(ur, uc)) {
          continue;
        }
        Point ctr = g.center(ur, uc);
        double d2 = (ctr.x - p.x) * (ctr.x - p.x) + (ctr.y - p.y) * (ctr.y - p.y);
        if (d2 < best) {
          best = d2;
          best_value = grid.value(ur, uc);
        }
      }
    }
  }
  if (!std::isfinite(best)) {
    throw NumericError("no valid covariate cell near the point");
  }
  return best_value;
}

// lower stencil index and fractional offset along one axis
std::pair<std::size_t, double> stencil(double f, std::size_t n)
{
  if (n == 1) {
    return { 0, 0.0 };
  }
  double lo = std::clamp(std::floor(f), 0.0, static_cast<double>(n) - 2.0);
  return { static_cast<std::size_t>(lo), f - lo };
}

} // namespace

double covariate_at(const CovariateGrid& grid, const ObservationWindow& window, Point p)
{
  if (!window.contains(p)) {
    throw InputError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                     ") lies outside the window");
  }
  const RasterGeometry& g = grid.geometry();
  double fx = (p.x - g.x_origin) / g.cellsize - 0.5;
  double fy = (p.y - g.y_origin) / g.cellsize - 0.5;
  auto [c0, tx] = stencil(fx, g.ncols);
  auto [r0, ty] = stencil(fy, g.nrows);
  std::size_t c1 = std::min(c0 + 1, g.ncols - 1);
  std::size_t r1 = std::min(r0 + 1, g.nrows - 1);

  const std::array<std::size_t, 4> rows = { r0, r0, r1, r1 };
  const std::array<std::size_t, 4> cols = { c0, c1, c0, c1 };
  std::array<bool, 4> valid{};
  bool all_valid = true;
  for (std::size_t k = 0; k < 4; ++k) {
    valid[k] = !grid.is_nodata(rows[k], cols[k]);
    all_valid = all_valid && valid[k];
  }

  if (!all_valid) {
    // no extrapolation with missing corners: keep the weights convex
    tx = std::clamp(tx, 0.0, 1.0);
    ty = std::clamp(ty, 0.0, 1.0);
  }
  const std::array<double, 4> weights = { (1.0 - tx) * (1.0 - ty),
                                          tx * (1.0 - ty),
                                          (1.0 - tx) * ty,
                                          tx * ty };
  double total = 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    if (valid[k]) {
      total += weights[k];
      acc += weights[k] * grid.value(rows[k], cols[k]);
    }
  }
  if (all_valid) {
    return acc;
  }
  if (total > 0.0) {
    return acc / total;
  }
  return nearest_valid(grid, p);
}

// ---------------------------------------------------------------------------
// Mesh

Mesh::Mesh(CovariateGrid grid, ObservationWindow window, std::size_t cells_longest_axis)
  : grid_(std::move(grid)), window_(std::move(window))
{
  if (cells_longest_axis == 0) {
    throw InputError("mesh needs at least one cell per axis");
  }
  double width = window_.xmax() - window_.xmin();
  double height = window_.ymax() - window_.ymin();
  auto n = static_cast<double>(cells_longest_axis);
  if (width >= height) {
    nx_ = cells_longest_axis;
    ny_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(n * height / width)));
  } else {
    ny_ = cells_longest_axis;
    nx_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(n * width / height)));
  }
  dx_ = width / static_cast<double>(nx_);
  dy_ = height / static_cast<double>(ny_);

  inside_.assign(size(), 0);
  covariate_.assign(size(), 0.0);
  for (std::size_t cell = 0; cell < size(); ++cell) {
    Point c = center(cell);
    if (window_.contains(c)) {
      inside_[cell] = 1;
      covariate_[cell] = ppcov::covariate_at(grid_, window_, c);
      ++inside_count_;
    }
  }
  if (inside_count_ == 0) {
    throw InputError("window has zero area on the quadrature mesh");
  }

  levels_.reserve(inside_count_);
  for (std::size_t cell = 0; cell < size(); ++cell) {
    if (inside_[cell]) {
      levels_.push_back(covariate_[cell]);
    }
  }
  std::sort(levels_.begin(), levels_.end());
  levels_.erase(std::unique(levels_.begin(), levels_.end()), levels_.end());
  level_of_cell_.assign(size(), 0);
  for (std::size_t cell = 0; cell < size(); ++cell) {
    if (inside_[cell]) {
      auto it = std::lower_bound(levels_.begin(), levels_.end(), covariate_[cell]);
      level_of_cell_[cell] = static_cast<std::uint32_t>(it - levels_.begin());
    }
  }
}

std::optional<std::size_t> Mesh::locate(Point p) const
{
  if (!(p.x >= window_.xmin() && p.x <= window_.xmax() && p.y >= window_.ymin() &&
        p.y <= window_.ymax())) {
    return std::nullopt;
  }
  auto col = std::min(static_cast<std::size_t>((p.x - window_.xmin()) / dx_), nx_ - 1);
  auto row = std::min(static_cast<std::size_t>((p.y - window_.ymin()) / dy_), ny_ - 1);
  return index(row, col);
}

bool Mesh::same_layout(const Mesh& other) const
{
  return nx_ == other.nx_ && ny_ == other.ny_ && dx_ == other.dx_ && dy_ == other.dy_ &&
         window_.xmin() == other.window_.xmin() && window_.ymin() == other.window_.ymin() &&
         inside_ == other.inside_;
}

MeshPtr make_mesh(CovariateGrid grid, ObservationWindow window, std::size_t cells_longest_axis)
{
  return std::make_shared<const Mesh>(std::move(grid), std::move(window), cells_longest_axis);
}

double quadrature(std::span<const double> values, const Mesh& mesh)
{
  if (values.size() != mesh.size()) {
    throw InputError("quadrature: " + std::to_string(values.size()) +
                     " values for a mesh of " + std::to_string(mesh.size()) + " cells");
  }
  if (mesh.inside_count() == 0) {
    throw InputError("quadrature over a window of zero area");
  }
  double sum = 0.0;
  for (std::size_t cell = 0; cell < values.size(); ++cell) {
    if (mesh.inside(cell)) {
      sum += values[cell];
    }
  }
  return sum * mesh.cell_area();
}

// ---------------------------------------------------------------------------
// PointPattern

PointPattern::PointPattern(std::vector<Point> points, const Mesh& mesh)
  : points_(std::move(points))
{
  z_values_.reserve(points_.size());
  for (const Point& p : points_) {
    if (!mesh.window().contains(p)) {
      throw InputError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                       ") lies outside the window");
    }
    z_values_.push_back(mesh.covariate_at(p));
  }
}

PointPattern PointPattern::from_parts(std::vector<Point> points, std::vector<double> z_values)
{
  if (points.size() != z_values.size()) {
    throw InputError("point and covariate counts differ");
  }
  PointPattern out;
  out.points_ = std::move(points);
  out.z_values_ = std::move(z_values);
  return out;
}

PointPattern PointPattern::replicated(std::size_t times) const
{
  PointPattern out;
  for (std::size_t k = 0; k < times; ++k) {
    out.points_.insert(out.points_.end(), points_.begin(), points_.end());
    out.z_values_.insert(out.z_values_.end(), z_values_.begin(), z_values_.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// SpatialCovariateDistribution

SpatialCovariateDistribution::SpatialCovariateDistribution(std::vector<double> z_grid,
                                                           std::vector<double> gstar_values,
                                                           std::vector<double> levels,
                                                           std::vector<double> cumulative,
                                                           double window_area)
  : z_grid_(std::move(z_grid))
  , gstar_values_(std::move(gstar_values))
  , levels_(std::move(levels))
  , cumulative_(std::move(cumulative))
  , window_area_(window_area)
{
  if (z_grid_.size() < 2 || z_grid_.size() != gstar_values_.size()) {
    throw InputError("g* table needs at least two abscissae and matching values");
  }
  if (levels_.empty() || levels_.size() != cumulative_.size()) {
    throw InputError("CDF table is empty or inconsistent");
  }
  if (!(window_area_ > 0.0)) {
    throw InputError("window area must be positive");
  }
  z0_ = z_grid_.front();
  dz_ = (z_grid_.back() - z0_) / static_cast<double>(z_grid_.size() - 1);
  if (!(dz_ > 0.0)) {
    throw InputError("g* abscissae must be increasing");
  }
  double peak = *std::max_element(gstar_values_.begin(), gstar_values_.end());
  if (!(peak > 0.0)) {
    throw NumericError("g* vanishes everywhere");
  }
  floor_ = 1e-6 * peak;
  for (double& v : gstar_values_) {
    v = std::max(v, floor_);
  }
  G_values_.reserve(z_grid_.size());
  for (double z : z_grid_) {
    G_values_.push_back(G(z));
  }
}

SpatialCovariateDistribution SpatialCovariateDistribution::uniform(double zmin, double zmax, double area)
{
  if (!(zmax > zmin)) {
    throw InputError("uniform covariate needs zmax > zmin");
  }
  double width = zmax - zmin;
  std::vector<double> z_grid = { zmin - 10.0 * width, zmax + 10.0 * width };
  std::vector<double> gstar(2, area / width);
  constexpr std::size_t n_levels = 1024;
  std::vector<double> levels(n_levels), cumulative(n_levels);
  for (std::size_t i = 0; i < n_levels; ++i) {
    levels[i] = zmin + (static_cast<double>(i) + 0.5) * width / n_levels;
    cumulative[i] = static_cast<double>(i + 1) / n_levels;
  }
  return SpatialCovariateDistribution(std::move(z_grid), std::move(gstar), std::move(levels),
                                      std::move(cumulative), area);
}

double SpatialCovariateDistribution::G(double z) const
{
  auto it = std::upper_bound(levels_.begin(), levels_.end(), z);
  if (it == levels_.begin()) {
    return 0.0;
  }
  return cumulative_[static_cast<std::size_t>(it - levels_.begin()) - 1];
}

double SpatialCovariateDistribution::gstar(double z) const
{
  double f = (z - z0_) / dz_;
  if (!(f >= 0.0) || f > static_cast<double>(z_grid_.size() - 1)) {
    return floor_;
  }
  auto i = std::min(static_cast<std::size_t>(f), z_grid_.size() - 2);
  double t = f - static_cast<double>(i);
  double v = (1.0 - t) * gstar_values_[i] + t * gstar_values_[i + 1];
  return std::max(v, floor_);
}

SpatialCovariateDistribution build_spatial_distribution(const Mesh& mesh, Bandwidth1D smoothing)
{
  std::span<const double> levels = mesh.levels();
  if (levels.size() < 2) {
    throw NumericError("degenerate covariate: fewer than two distinct values in the window");
  }
  // cell counts per level; all cells carry the same area
  std::vector<double> counts(levels.size(), 0.0);
  for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
    if (mesh.inside(cell)) {
      counts[mesh.level_of_cell()[cell]] += 1.0;
    }
  }
  const double total = static_cast<double>(mesh.inside_count());
  std::vector<double> cumulative(levels.size());
  double running = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    running += counts[i];
    cumulative[i] = running / total;
  }
  cumulative.back() = 1.0;

  // binned Gaussian KDE on an evenly spaced grid covering the tails
  const double s = smoothing.value();
  const double zlo = levels.front() - 6.0 * s;
  const double zhi = levels.back() + 6.0 * s;
  auto wanted = static_cast<std::size_t>(std::ceil((zhi - zlo) / (s / 8.0))) + 1;
  const std::size_t m = std::clamp<std::size_t>(wanted, 512, std::size_t{ 1 } << 16);
  const double dz = (zhi - zlo) / static_cast<double>(m - 1);

  std::vector<double> bins(m, 0.0);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    double f = (levels[i] - zlo) / dz;
    auto j = std::min(static_cast<std::size_t>(f), m - 2);
    double t = f - static_cast<double>(j);
    bins[j] += (1.0 - t) * counts[i];
    bins[j + 1] += t * counts[i];
  }

  const Kernel1D gauss(KernelFamily::gaussian);
  auto reach = static_cast<std::ptrdiff_t>(std::ceil(gauss.effective_support() * s / dz));
  std::vector<double> weights(static_cast<std::size_t>(2 * reach + 1));
  for (std::ptrdiff_t k = -reach; k <= reach; ++k) {
    weights[static_cast<std::size_t>(k + reach)] =
      gauss.scaled(static_cast<double>(k) * dz, s);
  }

  const double area = mesh.area();
  std::vector<double> z_grid(m), gstar(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    z_grid[j] = zlo + static_cast<double>(j) * dz;
    auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(j) - reach);
    auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(m) - 1,
                                       static_cast<std::ptrdiff_t>(j) + reach);
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      acc += bins[static_cast<std::size_t>(k)] *
             weights[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(j) - k + reach)];
    }
    gstar[j] = area * acc / total;
  }

  return SpatialCovariateDistribution(std::move(z_grid),
                                      std::move(gstar),
                                      std::vector<double>(levels.begin(), levels.end()),
                                      std::move(cumulative),
                                      area);
}

SpatialCovariateDistribution build_spatial_distribution(const Mesh& mesh)
{
  std::vector<double> values;
  values.reserve(mesh.inside_count());
  for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
    if (mesh.inside(cell)) {
      values.push_back(mesh.covariate()[cell]);
    }
  }
  if (mesh.levels().size() < 2) {
    throw NumericError("degenerate covariate: fewer than two distinct values in the window");
  }
  return build_spatial_distribution(mesh, select_b(values));
}

} // namespace ppcov
