#pragma once

#include "ppcov/estimators.hpp"
#include "ppcov/geometry.hpp"
#include "ppcov/goftest.hpp"
#include "ppcov/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ppcov {

//! Draws locations from the density proportional to a gridded intensity:
//! a cell is chosen with probability proportional to its integral, then the
//! point is placed uniformly inside it (and inside W).
class IntensitySampler
{
public:
  //! Throws NumericError when the intensity has no positive mass.
  explicit IntensitySampler(const IntensitySurface& intensity);

  //! \int_W lambda on the mesh.
  double total() const { return total_; }

  PointPattern draw(std::size_t count, StreamRng& rng) const;
  //! Poisson(total) count, then `draw`.
  PointPattern draw_poisson(StreamRng& rng) const;

private:
  MeshPtr mesh_;
  std::vector<std::size_t> cells_;
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

//! Non-homogeneous Poisson pattern with the given intensity.
PointPattern sample_nhpp(const IntensitySurface& intensity, std::uint64_t seed);

enum class BandKind
{
  axis_c,             // s = u - (offset - v - v0)
  diagonal_m,         // s = (u - u0) - (v - v0)
  diagonal_m_literal, // s = (u - u0) - (u - v0): constant, taken verbatim
  general             // s = direction . (p - center)
};

BandKind parse_band_kind(const std::string& name);
std::string to_string(BandKind kind);

//! Multiplicative band r(p) = phi(s(p); 0, d), the normal density of a
//! signed linear coordinate s with standard deviation d.
struct PerturbationBand
{
  BandKind kind = BandKind::general;
  double center_u = 0.0;
  double center_v = 0.0;
  double d = 1.0;
  Vec2 direction{ 1.0, 0.0 }; // unit normal to the band (general kind)
  double offset = 15.0;       // axis_c constant

  //! Throws InputError for d <= 0 or a zero direction.
  void validate() const;
};

double band_coordinate(const PerturbationBand& band, Point p);
double band_r(const PerturbationBand& band, Point p);

//! lambda = lambda_ini * r rescaled to integrate to target_m. A missing
//! band is the d = infinity model.
struct SyntheticModel
{
  IntensitySurface base;
  std::optional<PerturbationBand> band;
  double target_m = 100.0;
};

IntensitySurface perturbed_intensity(const SyntheticModel& model);

//! Unit square with Z(x, y) = x on a `raster_cells`^2 raster.
MeshPtr synthetic_mesh(std::size_t raster_cells = 256, std::size_t mesh_cells = 256);
//! rho(z) = m (0.5 + z) composed with the mesh covariate.
IntensitySurface synthetic_null_intensity(const MeshPtr& mesh, double m);

struct PowerScenario
{
  std::optional<double> d; // nullopt = infinity (no band)
  double m = 100.0;
};

struct PowerStudyConfig
{
  IntensitySurface base; // lambda_ini, any scale
  PerturbationBand band; // d is overridden per scenario
  std::vector<std::optional<double>> d_values;
  std::vector<double> m_values;
  std::size_t R = 200;
  double alpha = 0.05;
  std::uint64_t seed = 42;
  TestConfig test; // B, kernels, bandwidth rules; test.seed is ignored
  unsigned jobs = 1;
};

struct PowerCell
{
  PowerScenario scenario;
  std::size_t rejections = 0;
  std::size_t valid = 0;   // replicates on which the test ran
  std::size_t skipped = 0; // patterns with N < 2, the test cannot run
  double proportion() const
  {
    return valid == 0 ? 0.0 : static_cast<double>(rejections) / static_cast<double>(valid);
  }
  bool flagged() const { return skipped > 0; }
};

//! Rejection proportions: cells[im * d_values.size() + id]. Replicate r of
//! scenario s draws its pattern from stream (seed, s, r, 0) and calibrates
//! with seed derived from (seed, s, r, 1).
struct PowerTable
{
  std::vector<std::optional<double>> d_values;
  std::vector<double> m_values;
  std::vector<PowerCell> cells;
  const PowerCell& at(std::size_t im, std::size_t id) const
  {
    return cells[im * d_values.size() + id];
  }
};

PowerTable power_study(const PowerStudyConfig& config);

} // namespace ppcov
