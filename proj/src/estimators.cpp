#include "ppcov/estimators.hpp"

#include "ppcov/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ppcov {

namespace {

constexpr double min_edge_mass = 1e-12;

// Factor of K_H along one axis sampled at offsets k * step, k in [-(n-1), n-1],
// each multiplied by `step` (the quadrature weight along that axis).
std::vector<double> axis_weights(const Kernel1D& k, double h, double step, std::size_t n)
{
  std::vector<double> w(2 * n - 1, 0.0);
  for (std::size_t j = 0; j < w.size(); ++j) {
    double offset = (static_cast<double>(j) - static_cast<double>(n - 1)) * step;
    w[j] = k.scaled(offset, h) * step;
  }
  return w;
}

// Radius (in the original coordinates) outside which K_H vanishes to
// double precision.
double kernel_reach(const Kernel2D& K, const BandwidthMatrix& H)
{
  return K.factor().effective_support() * std::sqrt(2.0 * H.max_eigenvalue());
}

void check_edge_mass(double p)
{
  if (!(p > min_edge_mass)) {
    throw NumericError("bandwidth too large for window: edge correction vanishes");
  }
}

} // namespace

namespace detail {

std::vector<double> separable_filter(std::span<const double> image,
                                     std::size_t ny,
                                     std::size_t nx,
                                     std::span<const double> ky,
                                     std::span<const double> kx)
{
  std::vector<double> rows_done(ny * nx, 0.0);
  for (std::size_t r = 0; r < ny; ++r) {
    const double* in = image.data() + r * nx;
    double* out = rows_done.data() + r * nx;
    for (std::size_t src = 0; src < nx; ++src) {
      double v = in[src];
      if (v == 0.0) {
        continue;
      }
      // out[c] += kx[c - src + nx - 1] * v
      const double* w = kx.data() + (nx - 1 - src);
      for (std::size_t c = 0; c < nx; ++c) {
        out[c] += w[c] * v;
      }
    }
  }
  std::vector<double> result(ny * nx, 0.0);
  for (std::size_t r = 0; r < ny; ++r) {
    double* out = result.data() + r * nx;
    for (std::size_t src = 0; src < ny; ++src) {
      double w = ky[r + ny - 1 - src];
      if (w == 0.0) {
        continue;
      }
      const double* in = rows_done.data() + src * nx;
      for (std::size_t c = 0; c < nx; ++c) {
        out[c] += w * in[c];
      }
    }
  }
  return result;
}

} // namespace detail

double edge_correction(const Kernel2D& K, const BandwidthMatrix& H, const Mesh& mesh, Point x)
{
  const double reach = kernel_reach(K, H);
  auto clamp_index = [](double f, std::size_t n) {
    return static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(n - 1)));
  };
  const double x0 = mesh.window().xmin();
  const double y0 = mesh.window().ymin();
  std::size_t c_lo = clamp_index(std::floor((x.x - reach - x0) / mesh.dx()), mesh.nx());
  std::size_t c_hi = clamp_index(std::ceil((x.x + reach - x0) / mesh.dx()), mesh.nx());
  std::size_t r_lo = clamp_index(std::floor((x.y - reach - y0) / mesh.dy()), mesh.ny());
  std::size_t r_hi = clamp_index(std::ceil((x.y + reach - y0) / mesh.dy()), mesh.ny());

  double sum = 0.0;
  for (std::size_t r = r_lo; r <= r_hi; ++r) {
    for (std::size_t c = c_lo; c <= c_hi; ++c) {
      std::size_t cell = mesh.index(r, c);
      if (!mesh.inside(cell)) {
        continue;
      }
      Point y = mesh.center(r, c);
      sum += eval_KH(K, H, { x.x - y.x, x.y - y.y });
    }
  }
  double p = sum * mesh.cell_area();
  check_edge_mass(p);
  return std::min(p, 1.0);
}

std::vector<double> edge_correction_surface(const Kernel2D& K,
                                            const BandwidthMatrix& H,
                                            const Mesh& mesh)
{
  const std::size_t nx = mesh.nx();
  const std::size_t ny = mesh.ny();
  std::vector<double> p(mesh.size(), 1.0);

  if (H.is_diagonal()) {
    auto kx = axis_weights(K.factor(), std::sqrt(H.h11()), mesh.dx(), nx);
    auto ky = axis_weights(K.factor(), std::sqrt(H.h22()), mesh.dy(), ny);
    if (mesh.is_full_rectangle()) {
      std::vector<double> px(nx, 0.0), py(ny, 0.0);
      for (std::size_t c = 0; c < nx; ++c) {
        for (std::size_t src = 0; src < nx; ++src) {
          px[c] += kx[c + nx - 1 - src];
        }
      }
      for (std::size_t r = 0; r < ny; ++r) {
        for (std::size_t src = 0; src < ny; ++src) {
          py[r] += ky[r + ny - 1 - src];
        }
      }
      for (std::size_t r = 0; r < ny; ++r) {
        for (std::size_t c = 0; c < nx; ++c) {
          p[mesh.index(r, c)] = px[c] * py[r];
        }
      }
    } else {
      std::vector<double> indicator(mesh.size());
      for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
        indicator[cell] = mesh.inside(cell) ? 1.0 : 0.0;
      }
      p = detail::separable_filter(indicator, ny, nx, ky, kx);
    }
    for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
      if (mesh.inside(cell)) {
        check_edge_mass(p[cell]);
        p[cell] = std::min(p[cell], 1.0);
      } else {
        p[cell] = 1.0;
      }
    }
    return p;
  }

  for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
    if (mesh.inside(cell)) {
      p[cell] = edge_correction(K, H, mesh, mesh.center(cell));
    }
  }
  return p;
}

double diggle_intensity(const PointPattern& pattern,
                        const Kernel2D& K,
                        const BandwidthMatrix& H,
                        const Mesh& mesh,
                        Point x,
                        EdgeCorrection edge)
{
  if (pattern.empty()) {
    throw InputError("empty pattern");
  }
  double sum = 0.0;
  for (const Point& p : pattern.points()) {
    sum += eval_KH(K, H, { x.x - p.x, x.y - p.y });
  }
  if (edge == EdgeCorrection::none) {
    return sum;
  }
  return sum / edge_correction(K, H, mesh, x);
}

RelativeDensitySurface relative_density_spatial(const PointPattern& pattern,
                                                const Kernel2D& K,
                                                const BandwidthMatrix& H,
                                                const MeshPtr& mesh_ptr,
                                                EdgeCorrection edge)
{
  const Mesh& mesh = *mesh_ptr;
  RelativeDensitySurface out{ mesh_ptr, std::vector<double>(mesh.size(), 0.0), pattern.size(), false };
  if (pattern.empty()) {
    out.empty_pattern = true;
    return out;
  }

  const std::size_t nx = mesh.nx();
  const std::size_t ny = mesh.ny();
  const auto points = pattern.points();
  std::vector<double>& sum = out.values;

  if (H.is_diagonal()) {
    // K_H(x - X_i) = k_{h1}(x1 - X_i1) k_{h2}(x2 - X_i2): an (ny x N)(N x nx) product
    const Kernel1D& k = K.factor();
    const double h1 = std::sqrt(H.h11());
    const double h2 = std::sqrt(H.h22());
    const std::size_t n = points.size();
    std::vector<double> ax(n * nx), ay(ny * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < nx; ++c) {
        ax[i * nx + c] = k.scaled(mesh.center(0, c).x - points[i].x, h1);
      }
      for (std::size_t r = 0; r < ny; ++r) {
        ay[r * n + i] = k.scaled(mesh.center(r, 0).y - points[i].y, h2);
      }
    }
    for (std::size_t r = 0; r < ny; ++r) {
      double* row = sum.data() + r * nx;
      for (std::size_t i = 0; i < n; ++i) {
        double wy = ay[r * n + i];
        if (wy == 0.0) {
          continue;
        }
        const double* wx = ax.data() + i * nx;
        for (std::size_t c = 0; c < nx; ++c) {
          row[c] += wy * wx[c];
        }
      }
    }
  } else {
    for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
      if (!mesh.inside(cell)) {
        continue;
      }
      Point x = mesh.center(cell);
      double acc = 0.0;
      for (const Point& p : points) {
        acc += eval_KH(K, H, { x.x - p.x, x.y - p.y });
      }
      sum[cell] = acc;
    }
  }

  std::vector<double> p_h;
  if (edge == EdgeCorrection::window) {
    p_h = edge_correction_surface(K, H, mesh);
  }
  const double inv_n = 1.0 / static_cast<double>(points.size());
  for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
    if (!mesh.inside(cell)) {
      sum[cell] = 0.0;
      continue;
    }
    double denom = p_h.empty() ? 1.0 : p_h[cell];
    sum[cell] = sum[cell] / denom * inv_n;
  }
  return out;
}

double covariate_density(const PointPattern& pattern,
                         const SpatialCovariateDistribution& dist,
                         const Kernel1D& L,
                         Bandwidth1D b,
                         double z)
{
  if (pattern.empty()) {
    return 0.0;
  }
  double acc = 0.0;
  for (double zi : pattern.z_values()) {
    acc += L.scaled(z - zi, b.value()) / dist.gstar(zi);
  }
  return dist.gstar(z) * acc / static_cast<double>(pattern.size());
}

RelativeDensitySurface covariate_relative_density(const PointPattern& pattern,
                                                  const SpatialCovariateDistribution& dist,
                                                  const Kernel1D& L,
                                                  Bandwidth1D b,
                                                  const MeshPtr& mesh_ptr)
{
  const Mesh& mesh = *mesh_ptr;
  RelativeDensitySurface out{ mesh_ptr, std::vector<double>(mesh.size(), 0.0), pattern.size(), false };
  if (pattern.empty()) {
    out.empty_pattern = true;
    return out;
  }

  const auto z = pattern.z_values();
  std::vector<double> weights(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    weights[i] = 1.0 / dist.gstar(z[i]);
  }
  const double bw = b.value();
  const double inv_n = 1.0 / static_cast<double>(z.size());

  // one evaluation per distinct covariate value
  const auto levels = mesh.levels();
  std::vector<double> by_level(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      acc += weights[i] * L.scaled(levels[l] - z[i], bw);
    }
    double gs = dist.gstar(levels[l]);
    double f_hat = gs * acc * inv_n;
    by_level[l] = f_hat / gs;
  }
  const auto level_of = mesh.level_of_cell();
  for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
    if (mesh.inside(cell)) {
      out.values[cell] = by_level[level_of[cell]];
    }
  }
  return out;
}

} // namespace ppcov
