#include "catch_amalgamated.hpp"

#include "ppcov/errors.hpp"
#include "ppcov/simulate.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace ppcov;
using Catch::Approx;

namespace {

IntensitySurface constant_intensity(const MeshPtr& mesh, double v)
{
  return { mesh, std::vector<double>(mesh->size(), v) };
}

struct Moments
{
  double mean;
  double var;
};

Moments moments(const std::vector<double>& x)
{
  double m = 0.0;
  for (double v : x) {
    m += v;
  }
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) {
    s += (v - m) * (v - m);
  }
  return { m, s / static_cast<double>(x.size() - 1) };
}

} // namespace

TEST_CASE("Poisson counts of a homogeneous process", "[simulate]")
{
  auto mesh = synthetic_mesh(64, 64);
  IntensitySampler sampler(constant_intensity(mesh, 100.0));
  CHECK(sampler.total() == Approx(100.0).epsilon(1e-12));
  std::vector<double> counts, west, east;
  for (std::uint64_t r = 0; r < 2000; ++r) {
    StreamRng rng = StreamRng::derive(1234, { r });
    auto p = sampler.draw_poisson(rng);
    counts.push_back(static_cast<double>(p.size()));
    double w = 0;
    for (Point q : p.points()) {
      REQUIRE(mesh->window().contains(q));
      w += q.x < 0.25 ? 1 : 0;
    }
    west.push_back(w);
    east.push_back(static_cast<double>(p.size()) - w);
  }
  auto m = moments(counts);
  CHECK(m.mean >= 97.7);
  CHECK(m.mean <= 102.3);
  CHECK(m.var >= 85.0);
  CHECK(m.var <= 115.0);

  // disjoint subregions: counts proportional to area and uncorrelated
  auto mw = moments(west);
  auto me = moments(east);
  CHECK(std::abs(mw.mean - 25.0) < 3.0 * std::sqrt(25.0 / 2000.0));
  double cov = 0.0;
  for (std::size_t i = 0; i < west.size(); ++i) {
    cov += (west[i] - mw.mean) * (east[i] - me.mean);
  }
  cov /= static_cast<double>(west.size() - 1);
  double corr = cov / std::sqrt(mw.var * me.var);
  // 99% band for a zero correlation with 2000 pairs
  CHECK(std::abs(corr) < 2.576 / std::sqrt(2000.0));
}

TEST_CASE("sampler respects the support of the intensity", "[simulate]")
{
  auto mesh = synthetic_mesh(64, 64);
  IntensitySurface left = constant_intensity(mesh, 0.0);
  for (std::size_t cell = 0; cell < mesh->size(); ++cell) {
    if (mesh->center(cell).x < 0.5) {
      left.values[cell] = 200.0;
    }
  }
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto p = sample_nhpp(left, s);
    for (Point q : p.points()) {
      REQUIRE(q.x < 0.5);
    }
  }
  CHECK_THROWS_AS(IntensitySampler(constant_intensity(mesh, 0.0)), NumericError);
}

TEST_CASE("sampling is a pure function of the seed", "[simulate]")
{
  auto mesh = synthetic_mesh(32, 32);
  auto lambda = synthetic_null_intensity(mesh, 50.0);
  auto a = sample_nhpp(lambda, 99);
  auto b = sample_nhpp(lambda, 99);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.points()[i].x == b.points()[i].x);
    CHECK(a.points()[i].y == b.points()[i].y);
  }
}

TEST_CASE("band density values", "[simulate]")
{
  PerturbationBand band;
  band.kind = BandKind::diagonal_m;
  band.center_u = 517.69;
  band.center_v = 6900.61;
  band.d = 6.0;
  CHECK(band_r(band, { 517.69 + 3.0, 6900.61 + 3.0 }) == Approx(1.0 / (6.0 * std::sqrt(2.0 * std::numbers::pi))).epsilon(1e-12));
  CHECK(band_r(band, { 517.69 + 3.0, 6900.61 + 3.0 }) == Approx(0.06649).margin(1e-5));

  band.kind = BandKind::general;
  band.center_u = 0.5;
  band.center_v = 0.5;
  band.direction = { 1.0, -1.0 };
  band.d = 0.1;
  // +-s mirror points across the center line
  CHECK(band_r(band, { 0.6, 0.5 }) == Approx(band_r(band, { 0.4, 0.5 })).epsilon(1e-14));
  CHECK(band_coordinate(band, { 0.6, 0.5 }) == Approx(0.1 / std::sqrt(2.0)).epsilon(1e-14));

  band.kind = BandKind::axis_c;
  band.center_v = 60.40;
  band.offset = 15.0;
  // s = u - (15 - v - v0)
  CHECK(band_coordinate(band, { 1.0, 2.0 }) == Approx(1.0 - (15.0 - 2.0 - 60.40)).epsilon(1e-14));

  band.kind = BandKind::diagonal_m_literal;
  band.center_u = 1.0;
  band.center_v = 3.0;
  CHECK(band_coordinate(band, { 0.2, 0.9 }) == Approx(2.0).epsilon(1e-14));
  CHECK(band_coordinate(band, { 7.0, -4.0 }) == Approx(2.0).epsilon(1e-14));

  band.d = 0.0;
  CHECK_THROWS_AS(band.validate(), InputError);
  CHECK(parse_band_kind("axis_c") == BandKind::axis_c);
  CHECK(to_string(BandKind::diagonal_m_literal) == "diagonal_m_literal");
  CHECK_THROWS_AS(parse_band_kind("rotated"), InputError);
}

TEST_CASE("wide bands flatten", "[simulate]")
{
  PerturbationBand band;
  band.center_u = 0.5;
  band.center_v = 0.5;
  band.direction = { 1.0, -1.0 };
  band.d = 1e4;
  double lo = INFINITY, hi = 0.0;
  for (double x = 0.0; x <= 1.0; x += 0.1) {
    for (double y = 0.0; y <= 1.0; y += 0.1) {
      double r = band_r(band, { x, y });
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  }
  CHECK(hi / lo == Approx(1.0).margin(1e-8));
}

TEST_CASE("perturbed intensity is rescaled to the target", "[simulate]")
{
  auto mesh = synthetic_mesh(128, 128);
  auto base = synthetic_null_intensity(mesh, 1.0);
  SyntheticModel model{ base, std::nullopt, 100.0 };
  auto flat = perturbed_intensity(model);
  CHECK(quadrature(flat.values, *mesh) == Approx(100.0).epsilon(1e-6));
  for (std::size_t cell = 0; cell < mesh->size(); ++cell) {
    REQUIRE(flat.values[cell] == Approx(100.0 * base.values[cell]).epsilon(1e-10));
  }

  PerturbationBand band;
  band.center_u = 0.5;
  band.center_v = 0.5;
  band.direction = { 1.0, -1.0 };
  band.d = 0.05;
  model.band = band;
  model.target_m = 250.0;
  CHECK(quadrature(perturbed_intensity(model).values, *mesh) == Approx(250.0).epsilon(1e-6));

  model.target_m = -1.0;
  CHECK_THROWS_AS(perturbed_intensity(model), InputError);
}

TEST_CASE("halving d keeps the one-sigma mass while shrinking its area", "[simulate]")
{
  auto mesh = synthetic_mesh(16, 256);
  PerturbationBand band;
  band.center_u = 0.5;
  band.center_v = 0.5;
  band.direction = { 1.0, 0.0 };
  std::vector<double> areas;
  for (double d : { 0.08, 0.04 }) {
    band.d = d;
    SyntheticModel model{ { mesh, std::vector<double>(mesh->size(), 1.0) }, band, 1.0 };
    auto lambda = perturbed_intensity(model);
    double mass = 0.0, area = 0.0;
    for (std::size_t cell = 0; cell < mesh->size(); ++cell) {
      if (std::abs(band_coordinate(band, mesh->center(cell))) <= d) {
        mass += lambda.values[cell] * mesh->cell_area();
        area += mesh->cell_area();
      }
    }
    CHECK(mass == Approx(0.6827).margin(0.02));
    areas.push_back(area);
  }
  CHECK(areas[1] < areas[0]);
}

TEST_CASE("power study harness", "[simulate]")
{
  PowerStudyConfig config;
  auto mesh = synthetic_mesh(32, 24);
  config.base = synthetic_null_intensity(mesh, 1.0);
  config.band.center_u = 0.5;
  config.band.center_v = 0.5;
  config.band.direction = { 1.0, -1.0 };
  config.d_values = { 0.1, std::nullopt };
  config.m_values = { 40.0 };
  config.R = 6;
  config.test.B = 9;
  config.alpha = 1.0;
  config.seed = 5;
  auto table = power_study(config);
  REQUIRE(table.cells.size() == 2);
  for (const auto& cell : table.cells) {
    CHECK(cell.proportion() == 1.0);
    CHECK(cell.valid == 6);
    CHECK_FALSE(cell.flagged());
  }

  config.alpha = 0.3;
  auto a = power_study(config);
  config.jobs = 3;
  auto b = power_study(config);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].rejections == b.cells[i].rejections);
    CHECK(a.cells[i].valid == b.cells[i].valid);
  }

  // patterns with fewer than two points are skipped and flagged, not fatal
  config.m_values = { 0.5 };
  auto tiny = power_study(config);
  CHECK(tiny.at(0, 0).flagged());
  CHECK(tiny.at(0, 0).skipped + tiny.at(0, 0).valid == 6);

  config.R = 0;
  CHECK_THROWS_AS(power_study(config), InputError);
}
