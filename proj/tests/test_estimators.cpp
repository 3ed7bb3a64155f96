#include "catch_amalgamated.hpp"

#include "ppcov/errors.hpp"
#include "ppcov/estimators.hpp"
#include "ppcov/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace ppcov;
using Catch::Approx;

namespace {

MeshPtr unit_mesh(std::size_t n, std::size_t raster = 64)
{
  RasterGeometry g;
  g.nrows = raster;
  g.ncols = raster;
  g.cellsize = 1.0 / static_cast<double>(raster);
  auto grid = CovariateGrid::from_function(g, [](Point p) { return p.x; });
  return make_mesh(grid, ObservationWindow::from_grid(grid), n);
}

MeshPtr half_masked_mesh(std::size_t n)
{
  RasterGeometry g;
  g.nrows = 32;
  g.ncols = 32;
  g.cellsize = 1.0 / 32.0;
  auto grid = CovariateGrid::from_function(g, [](Point p) { return p.x + p.y; });
  RasterMask mask{ g, std::vector<std::uint8_t>(g.size(), 0) };
  for (std::size_t r = 0; r < 32; ++r) {
    for (std::size_t c = 0; c < 32; ++c) {
      // L-shaped window
      mask.inside[g.index(r, c)] = (r < 16 || c < 16) ? 1 : 0;
    }
  }
  return make_mesh(grid, ObservationWindow::masked(grid, mask), n);
}

PointPattern random_pattern(const Mesh& mesh, std::size_t n, std::uint64_t seed)
{
  StreamRng rng(seed);
  std::vector<Point> pts;
  while (pts.size() < n) {
    Point p{ mesh.window().xmin() + rng.uniform() * (mesh.window().xmax() - mesh.window().xmin()),
             mesh.window().ymin() + rng.uniform() * (mesh.window().ymax() - mesh.window().ymin()) };
    if (mesh.window().contains(p)) {
      pts.push_back(p);
    }
  }
  return PointPattern(pts, mesh);
}

double Phi(double x)
{
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Exact Gaussian kernel mass over the unit square for H = diag(h1^2, h2^2).
double gaussian_square_mass(Point x, double h1, double h2)
{
  return (Phi((1.0 - x.x) / h1) - Phi(-x.x / h1)) * (Phi((1.0 - x.y) / h2) - Phi(-x.y / h2));
}

} // namespace

TEST_CASE("edge correction at center, edge and corner", "[estimators]")
{
  auto mesh = unit_mesh(256);
  Kernel2D K;
  auto H = BandwidthMatrix::isotropic(0.1);
  CHECK(edge_correction(K, H, *mesh, { 0.5, 0.5 }) == Approx(1.0).margin(1e-4));
  auto small = BandwidthMatrix::isotropic(0.02);
  CHECK(edge_correction(K, small, *mesh, { 0.0, 0.0 }) == Approx(0.25).margin(0.01));
  CHECK(edge_correction(K, small, *mesh, { 0.5, 0.0 }) == Approx(0.5).margin(0.01));
}

TEST_CASE("edge correction surface matches the closed form", "[estimators]")
{
  auto mesh = unit_mesh(128);
  Kernel2D K;
  auto H = BandwidthMatrix::diagonal(0.15 * 0.15, 0.08 * 0.08);
  auto p = edge_correction_surface(K, H, *mesh);
  double worst = 0.0;
  for (std::size_t cell = 0; cell < mesh->size(); ++cell) {
    double exact = gaussian_square_mass(mesh->center(cell), 0.15, 0.08);
    worst = std::max(worst, std::abs(p[cell] - exact));
  }
  CHECK(worst < 2e-4);
}

TEST_CASE("separable and direct edge corrections agree", "[estimators]")
{
  Kernel2D K;
  auto H = BandwidthMatrix::diagonal(0.01, 0.004);
  for (const MeshPtr& mesh : { unit_mesh(48), half_masked_mesh(48) }) {
    auto fast = edge_correction_surface(K, H, *mesh);
    for (std::size_t cell = 0; cell < mesh->size(); cell += 7) {
      if (mesh->inside(cell)) {
        CHECK(fast[cell] == Approx(edge_correction(K, H, *mesh, mesh->center(cell))).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("edge correction rejects a vanishing kernel mass", "[estimators]")
{
  auto mesh = unit_mesh(32);
  Kernel2D epan(KernelFamily::epanechnikov);
  auto tiny = BandwidthMatrix::isotropic(1e-4);
  // compact kernel centered on a mesh node sees no cell center
  CHECK_THROWS_AS(edge_correction(epan, tiny, *mesh, { 0.5, 0.5 }), NumericError);
}

TEST_CASE("diggle intensity at a single point", "[estimators]")
{
  auto mesh = unit_mesh(256);
  PointPattern one({ { 0.5, 0.5 } }, *mesh);
  Kernel2D K;
  auto H = BandwidthMatrix::isotropic(0.1);
  double value = diggle_intensity(one, K, H, *mesh, { 0.5, 0.5 });
  CHECK(value == Approx(1.0 / (2.0 * std::numbers::pi * 0.01)).epsilon(0.002));

  Kernel2D epan(KernelFamily::epanechnikov);
  PointPattern corner({ { 0.05, 0.05 } }, *mesh);
  CHECK(diggle_intensity(corner, epan, BandwidthMatrix::isotropic(0.05), *mesh, { 0.9, 0.9 }) == 0.0);

  CHECK_THROWS_AS(diggle_intensity(PointPattern(), K, H, *mesh, { 0.5, 0.5 }), InputError);
}

TEST_CASE("doubling the pattern doubles the Diggle estimate", "[estimators]")
{
  auto mesh = unit_mesh(64);
  auto pattern = random_pattern(*mesh, 25, 11);
  auto doubled = pattern.replicated(2);
  Kernel2D K;
  auto H = BandwidthMatrix(0.01, 0.003, 0.02);
  for (Point x : { Point{ 0.1, 0.2 }, Point{ 0.6, 0.9 }, Point{ 0.99, 0.01 } }) {
    CHECK(diggle_intensity(doubled, K, H, *mesh, x) ==
          Approx(2.0 * diggle_intensity(pattern, K, H, *mesh, x)).epsilon(1e-13));
  }
}

TEST_CASE("spatial relative density equals Diggle over N", "[estimators]")
{
  Kernel2D K;
  for (const MeshPtr& mesh : { unit_mesh(40), half_masked_mesh(40) }) {
    auto pattern = random_pattern(*mesh, 30, 5);
    for (const BandwidthMatrix& H : { BandwidthMatrix::diagonal(0.008, 0.012), BandwidthMatrix(0.01, 0.004, 0.01) }) {
      auto surface = relative_density_spatial(pattern, K, H, mesh);
      for (std::size_t cell = 0; cell < mesh->size(); cell += 5) {
        if (!mesh->inside(cell)) {
          CHECK(surface.values[cell] == 0.0);
          continue;
        }
        double expected = diggle_intensity(pattern, K, H, *mesh, mesh->center(cell)) / 30.0;
        CHECK(surface.values[cell] == Approx(expected).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("spatial relative density: mass, duplication, translation", "[estimators]")
{
  auto mesh = unit_mesh(128);
  Kernel2D K;
  PointPattern one({ { 0.3, 0.6 } }, *mesh);
  auto H = BandwidthMatrix::isotropic(0.05);
  auto s1 = relative_density_spatial(one, K, H, mesh);
  CHECK(quadrature(s1.values, *mesh) == Approx(1.0).margin(0.02));

  // near the border the corrected surface recovers mass the kernel loses outside W
  PointPattern edge({ { 0.02, 0.5 } }, *mesh);
  double kept = 0.5 * std::erfc(-0.02 / 0.05 / std::sqrt(2.0));
  double corrected = quadrature(relative_density_spatial(edge, K, H, mesh).values, *mesh);
  double plain = quadrature(relative_density_spatial(edge, K, H, mesh, EdgeCorrection::none).values, *mesh);
  CHECK(plain == Approx(kept).margin(1e-3));
  CHECK(corrected > plain);

  auto pattern = random_pattern(*mesh, 40, 17);
  auto base = relative_density_spatial(pattern, K, H, mesh);
  auto tripled = relative_density_spatial(pattern.replicated(3), K, H, mesh);
  for (std::size_t cell = 0; cell < mesh->size(); ++cell) {
    REQUIRE(tripled.values[cell] == Approx(base.values[cell]).epsilon(1e-12));
    REQUIRE(base.values[cell] >= 0.0);
  }

  // translate pattern, grid and window together
  const double dx = 12.5, dy = -3.25;
  auto moved_grid = mesh->grid().translated(dx, dy);
  auto moved_mesh = make_mesh(moved_grid, mesh->window().translated(dx, dy), 128);
  std::vector<Point> moved_pts;
  for (Point p : pattern.points()) {
    moved_pts.push_back({ p.x + dx, p.y + dy });
  }
  PointPattern moved(moved_pts, *moved_mesh);
  auto shifted = relative_density_spatial(moved, K, H, moved_mesh);
  for (std::size_t cell = 0; cell < mesh->size(); ++cell) {
    REQUIRE(shifted.values[cell] == Approx(base.values[cell]).epsilon(1e-9).margin(1e-12));
  }
}

TEST_CASE("empty pattern gives flagged zero surfaces", "[estimators]")
{
  auto mesh = unit_mesh(16);
  auto dist = SpatialCovariateDistribution::uniform(0.0, 1.0, 1.0);
  PointPattern empty;
  auto s = relative_density_spatial(empty, Kernel2D{}, BandwidthMatrix::isotropic(0.1), mesh);
  auto c = covariate_relative_density(empty, dist, Kernel1D{}, Bandwidth1D(0.1), mesh);
  CHECK(s.empty_pattern);
  CHECK(c.empty_pattern);
  for (double v : s.values) {
    CHECK(v == 0.0);
  }
  for (double v : c.values) {
    CHECK(v == 0.0);
  }
  CHECK(covariate_density(empty, dist, Kernel1D{}, Bandwidth1D(0.1), 0.5) == 0.0);
}

TEST_CASE("covariate density with g* = 1", "[estimators]")
{
  auto mesh = unit_mesh(64);
  auto dist = SpatialCovariateDistribution::uniform(0.0, 1.0, 1.0);
  Kernel1D L;
  PointPattern one({ { 0.5, 0.2 } }, *mesh);
  CHECK(covariate_density(one, dist, L, Bandwidth1D(0.1), 0.5) ==
        Approx(1.0 / (0.1 * std::sqrt(2.0 * std::numbers::pi))).epsilon(0.01));

  auto pattern = random_pattern(*mesh, 50, 23);
  // f_hat integrates to one over z
  double acc = 0.0;
  const double dz = 1e-3;
  for (double z = -2.0; z <= 3.0; z += dz) {
    acc += covariate_density(pattern, dist, L, Bandwidth1D(0.08), z);
  }
  CHECK(acc * dz == Approx(1.0).margin(1e-3));

  CHECK(covariate_density(pattern, dist, L, Bandwidth1D(0.05), 1.0 + 10 * 0.05 + 0.1) < 1e-12);
}

TEST_CASE("covariate relative density is the 1-D KDE of Z_i at Z(x)", "[estimators]")
{
  auto mesh = unit_mesh(64);
  auto dist = SpatialCovariateDistribution::uniform(0.0, 1.0, 1.0);
  Kernel1D L;
  auto pattern = random_pattern(*mesh, 30, 41);
  const double b = 0.07;
  auto surface = covariate_relative_density(pattern, dist, L, Bandwidth1D(b), mesh);
  for (std::size_t cell = 0; cell < mesh->size(); cell += 3) {
    double z = mesh->covariate()[cell];
    double kde = 0.0;
    for (double zi : pattern.z_values()) {
      kde += std::exp(-0.5 * ((z - zi) / b) * ((z - zi) / b)) / (b * std::sqrt(2.0 * std::numbers::pi));
    }
    REQUIRE(surface.values[cell] == Approx(kde / 30.0).epsilon(1e-12));
  }
}

TEST_CASE("covariate relative density depends on x only through Z(x)", "[estimators]")
{
  auto mesh = unit_mesh(64);
  auto dist = build_spatial_distribution(*mesh);
  auto pattern = random_pattern(*mesh, 30, 2);
  auto surface = covariate_relative_density(pattern, dist, Kernel1D{}, Bandwidth1D(0.1), mesh);
  for (std::size_t r = 1; r < mesh->ny(); ++r) {
    for (std::size_t c = 0; c < mesh->nx(); ++c) {
      REQUIRE(surface.values[mesh->index(r, c)] == surface.values[mesh->index(0, c)]);
    }
  }
}

TEST_CASE("surface mass checks on a 128 mesh", "[estimators]")
{
  RasterGeometry g;
  g.nrows = 128;
  g.ncols = 128;
  g.cellsize = 1.0 / 128;
  auto grid = CovariateGrid::from_function(g, [](Point p) { return p.x + 0.5 * p.y; });
  auto mesh = make_mesh(grid, ObservationWindow::from_grid(grid), 128);
  auto dist = build_spatial_distribution(*mesh);
  auto pattern = random_pattern(*mesh, 80, 8);
  auto covariate = covariate_relative_density(pattern, dist, Kernel1D{}, select_b(pattern.z_values()), mesh);
  CHECK(quadrature(covariate.values, *mesh) == Approx(1.0).margin(0.05));
  auto spatial = relative_density_spatial(pattern, Kernel2D{}, select_H(pattern.points()), mesh);
  double mass = quadrature(spatial.values, *mesh);
  CHECK(mass >= 0.9);
  CHECK(mass <= 1.1);

  // constant f_hat with g* = 1 gives a constant surface
  auto flat = SpatialCovariateDistribution::uniform(0.0, 1.5, 1.0);
  auto wide = covariate_relative_density(pattern, flat, Kernel1D{}, Bandwidth1D(1e6), mesh);
  for (std::size_t cell = 0; cell < mesh->size(); ++cell) {
    REQUIRE(wide.values[cell] == Approx(wide.values[0]).epsilon(1e-9));
  }
}

TEST_CASE("separable filter matches a direct 2-D sum", "[estimators]")
{
  const std::size_t ny = 5, nx = 7;
  StreamRng rng(1);
  std::vector<double> image(ny * nx), ky(2 * ny - 1), kx(2 * nx - 1);
  for (double& v : image) {
    v = rng.uniform();
  }
  for (double& v : ky) {
    v = rng.uniform();
  }
  for (double& v : kx) {
    v = rng.uniform();
  }
  auto out = detail::separable_filter(image, ny, nx, ky, kx);
  for (std::size_t r = 0; r < ny; ++r) {
    for (std::size_t c = 0; c < nx; ++c) {
      double acc = 0.0;
      for (std::size_t rr = 0; rr < ny; ++rr) {
        for (std::size_t cc = 0; cc < nx; ++cc) {
          acc += ky[r + ny - 1 - rr] * kx[c + nx - 1 - cc] * image[rr * nx + cc];
        }
      }
      CHECK(out[r * nx + c] == Approx(acc).epsilon(1e-13));
    }
  }
}
