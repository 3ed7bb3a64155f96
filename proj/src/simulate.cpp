#include "ppcov/simulate.hpp"

#include "ppcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace ppcov {

IntensitySampler::IntensitySampler(const IntensitySurface& intensity)
  : mesh_(intensity.mesh)
{
  if (!mesh_) {
    throw InputError("intensity without a mesh");
  }
  if (intensity.values.size() != mesh_->size()) {
    throw InputError("intensity size does not match its mesh");
  }
  const double area = mesh_->cell_area();
  double acc = 0.0;
  for (std::size_t cell = 0; cell < mesh_->size(); ++cell) {
    double v = intensity.values[cell];
    if (!mesh_->inside(cell) || !(v > 0.0)) {
      continue;
    }
    if (!std::isfinite(v)) {
      throw NumericError("intensity is not finite");
    }
    acc += v * area;
    cells_.push_back(cell);
    cumulative_.push_back(acc);
  }
  total_ = acc;
  if (!(total_ > 0.0)) {
    throw NumericError("intensity has no positive mass");
  }
}

PointPattern IntensitySampler::draw(std::size_t count, StreamRng& rng) const
{
  const Mesh& mesh = *mesh_;
  std::vector<Point> points;
  points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double target = rng.uniform() * total_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    if (it == cumulative_.end()) {
      --it;
    }
    std::size_t cell = cells_[static_cast<std::size_t>(it - cumulative_.begin())];
    Point c = mesh.center(cell);
    Point p = c;
    // a masked window may cut through the cell
    for (int attempt = 0; attempt < 16; ++attempt) {
      Point q{ c.x + (rng.uniform() - 0.5) * mesh.dx(), c.y + (rng.uniform() - 0.5) * mesh.dy() };
      if (mesh.window().contains(q)) {
        p = q;
        break;
      }
    }
    points.push_back(p);
  }
  return PointPattern(std::move(points), mesh);
}

PointPattern IntensitySampler::draw_poisson(StreamRng& rng) const
{
  std::poisson_distribution<long long> count(total_);
  auto n = count(rng);
  return draw(static_cast<std::size_t>(n), rng);
}

PointPattern sample_nhpp(const IntensitySurface& intensity, std::uint64_t seed)
{
  IntensitySampler sampler(intensity);
  StreamRng rng = StreamRng::derive(seed, {});
  return sampler.draw_poisson(rng);
}

BandKind parse_band_kind(const std::string& name)
{
  if (name == "axis_c") {
    return BandKind::axis_c;
  }
  if (name == "diagonal_m") {
    return BandKind::diagonal_m;
  }
  if (name == "diagonal_m_literal") {
    return BandKind::diagonal_m_literal;
  }
  if (name == "general") {
    return BandKind::general;
  }
  throw InputError("unknown band kind '" + name + "'");
}

std::string to_string(BandKind kind)
{
  switch (kind) {
    case BandKind::axis_c:
      return "axis_c";
    case BandKind::diagonal_m:
      return "diagonal_m";
    case BandKind::diagonal_m_literal:
      return "diagonal_m_literal";
    case BandKind::general:
      return "general";
  }
  return "general";
}

void PerturbationBand::validate() const
{
  if (!(d > 0.0) || std::isnan(d)) {
    throw InputError("band width d must be positive");
  }
  if (kind == BandKind::general && std::hypot(direction[0], direction[1]) == 0.0) {
    throw InputError("band direction must be non-zero");
  }
}

double band_coordinate(const PerturbationBand& band, Point p)
{
  const double u = p.x;
  const double v = p.y;
  switch (band.kind) {
    case BandKind::axis_c:
      return u - (band.offset - v - band.center_v);
    case BandKind::diagonal_m:
      return (u - band.center_u) - (v - band.center_v);
    case BandKind::diagonal_m_literal:
      return (u - band.center_u) - (u - band.center_v);
    case BandKind::general: {
      double norm = std::hypot(band.direction[0], band.direction[1]);
      return (band.direction[0] * (u - band.center_u) + band.direction[1] * (v - band.center_v)) /
             norm;
    }
  }
  return 0.0;
}

double band_r(const PerturbationBand& band, Point p)
{
  double s = band_coordinate(band, p) / band.d;
  return std::exp(-0.5 * s * s) / (band.d * std::sqrt(2.0 * std::numbers::pi));
}

IntensitySurface perturbed_intensity(const SyntheticModel& model)
{
  const MeshPtr& mesh = model.base.mesh;
  if (!mesh || model.base.values.size() != mesh->size()) {
    throw InputError("base intensity does not match its mesh");
  }
  if (!(model.target_m > 0.0)) {
    throw InputError("target m must be positive");
  }
  std::vector<double> values(model.base.values);
  if (model.band) {
    model.band->validate();
    for (std::size_t cell = 0; cell < mesh->size(); ++cell) {
      if (mesh->inside(cell)) {
        values[cell] *= band_r(*model.band, mesh->center(cell));
      }
    }
  }
  double total = quadrature(values, *mesh);
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw NumericError("perturbed intensity has no positive mass");
  }
  double scale = model.target_m / total;
  for (double& v : values) {
    v *= scale;
  }
  return { mesh, std::move(values) };
}

MeshPtr synthetic_mesh(std::size_t raster_cells, std::size_t mesh_cells)
{
  RasterGeometry geometry;
  geometry.nrows = raster_cells;
  geometry.ncols = raster_cells;
  geometry.cellsize = 1.0 / static_cast<double>(raster_cells);
  auto grid = CovariateGrid::from_function(geometry, [](Point p) { return p.x; });
  auto window = ObservationWindow::from_grid(grid);
  return make_mesh(std::move(grid), std::move(window), mesh_cells);
}

IntensitySurface synthetic_null_intensity(const MeshPtr& mesh, double m)
{
  std::vector<double> values(mesh->size(), 0.0);
  const auto z = mesh->covariate();
  for (std::size_t cell = 0; cell < mesh->size(); ++cell) {
    if (mesh->inside(cell)) {
      values[cell] = m * (0.5 + z[cell]);
    }
  }
  return { mesh, std::move(values) };
}

PowerTable power_study(const PowerStudyConfig& config)
{
  const MeshPtr& mesh = config.base.mesh;
  if (!mesh) {
    throw InputError("power study: base intensity without a mesh");
  }
  if (config.d_values.empty() || config.m_values.empty()) {
    throw InputError("power study: empty d or m grid");
  }
  if (config.R < 1) {
    throw InputError("power study: R must be >= 1");
  }
  if (!(config.alpha > 0.0) || config.alpha > 1.0) {
    throw InputError("power study: alpha must lie in (0, 1]");
  }
  const SpatialCovariateDistribution dist = build_spatial_distribution(*mesh);

  PowerTable table;
  table.d_values = config.d_values;
  table.m_values = config.m_values;
  table.cells.resize(config.m_values.size() * config.d_values.size());

  TestConfig test = config.test;
  test.jobs = 1;

  for (std::size_t im = 0; im < config.m_values.size(); ++im) {
    for (std::size_t id = 0; id < config.d_values.size(); ++id) {
      const std::size_t s = im * config.d_values.size() + id;
      SyntheticModel model{ config.base, std::nullopt, config.m_values[im] };
      if (config.d_values[id]) {
        PerturbationBand band = config.band;
        band.d = *config.d_values[id];
        model.band = band;
      }
      const IntensitySampler sampler(perturbed_intensity(model));

      // 0 = skipped, 1 = accepted, 2 = rejected
      std::vector<std::uint8_t> outcome(config.R, 0);
      parallel_for(config.R, config.jobs, [&](std::size_t r) {
        StreamRng rng = StreamRng::derive(config.seed, { s, r, 0 });
        PointPattern pattern = sampler.draw_poisson(rng);
        if (pattern.size() < 2) {
          return;
        }
        TestConfig local = test;
        local.seed = StreamRng::derive(config.seed, { s, r, 1 })();
        try {
          TestResult result = bootstrap_test(pattern, mesh, dist, local);
          outcome[r] = result.p_value <= config.alpha ? 2 : 1;
        } catch (const NumericError&) {
          outcome[r] = 0;
        }
      });

      PowerCell& cell = table.cells[s];
      cell.scenario = { config.d_values[id], config.m_values[im] };
      for (auto o : outcome) {
        if (o == 0) {
          ++cell.skipped;
        } else {
          ++cell.valid;
          if (o == 2) {
            ++cell.rejections;
          }
        }
      }
    }
  }
  return table;
}

} // namespace ppcov
