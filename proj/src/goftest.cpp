#include "ppcov/goftest.hpp"

#include "ppcov/errors.hpp"
#include "ppcov/rng.hpp"
#include "ppcov/simulate.hpp"

#include <algorithm>
#include <cmath>

namespace ppcov {

double statistic_T(const RelativeDensitySurface& spatial,
                   const RelativeDensitySurface& covariate)
{
  if (!spatial.mesh || !covariate.mesh) {
    throw InputError("statistic_T: surface without a mesh");
  }
  if (spatial.mesh != covariate.mesh && !spatial.mesh->same_layout(*covariate.mesh)) {
    throw InputError("statistic_T: surfaces are on different meshes");
  }
  const Mesh& mesh = *spatial.mesh;
  if (spatial.values.size() != mesh.size() || covariate.values.size() != mesh.size()) {
    throw InputError("statistic_T: surface size does not match its mesh");
  }
  std::vector<double> sq(mesh.size(), 0.0);
  for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
    double d = spatial.values[cell] - covariate.values[cell];
    sq[cell] = d * d;
  }
  return quadrature(sq, mesh);
}

IntensitySurface pilot_intensity(const PointPattern& pattern,
                                 const SpatialCovariateDistribution& dist,
                                 const Kernel1D& L,
                                 Bandwidth1D t,
                                 const MeshPtr& mesh)
{
  if (pattern.empty()) {
    throw InputError("cannot build pilot from empty pattern");
  }
  RelativeDensitySurface rel = covariate_relative_density(pattern, dist, L, t, mesh);
  const auto n = static_cast<double>(pattern.size());
  for (double& v : rel.values) {
    v *= n;
  }
  return { mesh, std::move(rel.values) };
}

double monte_carlo_p_value(double T, std::span<const double> T_star)
{
  auto exceed = std::count_if(T_star.begin(), T_star.end(), [T](double t) { return t >= T; });
  return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(T_star.size()) + 1.0);
}

namespace {

BandwidthMatrix choose_H(const PointPattern& pattern, const TestConfig& config)
{
  return config.H ? *config.H : select_H(pattern.points());
}

Bandwidth1D choose_b(const PointPattern& pattern, const TestConfig& config)
{
  return config.b ? *config.b : select_b(pattern.z_values());
}

double statistic_with(const PointPattern& pattern,
                      const MeshPtr& mesh,
                      const SpatialCovariateDistribution& dist,
                      const TestConfig& config,
                      const BandwidthMatrix& H,
                      Bandwidth1D b)
{
  auto spatial = relative_density_spatial(pattern, config.K, H, mesh, config.edge);
  auto covariate = covariate_relative_density(pattern, dist, config.L, b, mesh);
  return statistic_T(spatial, covariate);
}

} // namespace

StatisticEvaluation evaluate_statistic(const PointPattern& pattern,
                                       const MeshPtr& mesh,
                                       const SpatialCovariateDistribution& dist,
                                       const TestConfig& config)
{
  if (pattern.empty()) {
    throw InputError("the test cannot run on an empty pattern");
  }
  BandwidthMatrix H = choose_H(pattern, config);
  Bandwidth1D b = choose_b(pattern, config);
  auto spatial = relative_density_spatial(pattern, config.K, H, mesh, config.edge);
  auto covariate = covariate_relative_density(pattern, dist, config.L, b, mesh);
  double T = statistic_T(spatial, covariate);
  return { T, H, b, std::move(spatial), std::move(covariate) };
}

namespace {

TestResult run_bootstrap(const PointPattern& pattern,
                         const MeshPtr& mesh,
                         const SpatialCovariateDistribution& dist,
                         const TestConfig& config,
                         const StatisticEvaluation& observed,
                         Bandwidth1D t)
{
  if (config.B < 1) {
    throw InputError("bootstrap needs B >= 1");
  }
  IntensitySurface pilot = pilot_intensity(pattern, dist, config.L, t, mesh);
  if (!(quadrature(pilot.values, *mesh) > 0.0)) {
    throw NumericError("pilot intensity integrates to zero");
  }
  const IntensitySampler sampler(pilot);

  std::vector<double> t_star(config.B, 0.0);
  std::vector<std::uint8_t> empty(config.B, 0);
  parallel_for(config.B, config.jobs, [&](std::size_t j) {
    StreamRng rng = StreamRng::derive(config.seed, { j });
    PointPattern boot = sampler.draw_poisson(rng);
    if (boot.empty()) {
      empty[j] = 1;
      t_star[j] = 0.0;
      return;
    }
    BandwidthMatrix H = observed.H;
    Bandwidth1D b = observed.b;
    if (config.reselect_bandwidths) {
      // too few or coincident points: keep the data bandwidths
      try {
        H = choose_H(boot, config);
      } catch (const NumericError&) {
      }
      try {
        b = choose_b(boot, config);
      } catch (const NumericError&) {
      }
    }
    t_star[j] = statistic_with(boot, mesh, dist, config, H, b);
  });

  TestResult result;
  result.T = observed.T;
  result.B = config.B;
  result.p_value = monte_carlo_p_value(observed.T, t_star);
  result.T_star = std::move(t_star);
  result.H = observed.H;
  result.b = observed.b;
  result.t = t;
  result.seed = config.seed;
  result.n = pattern.size();
  result.empty_replicates = static_cast<std::size_t>(std::count(empty.begin(), empty.end(), 1));
  return result;
}

Bandwidth1D choose_pilot(const PointPattern& pattern, const TestConfig& config)
{
  return config.t ? *config.t : select_b(pattern.z_values());
}

} // namespace

TestResult bootstrap_test(const PointPattern& pattern,
                          const MeshPtr& mesh,
                          const SpatialCovariateDistribution& dist,
                          const TestConfig& config)
{
  StatisticEvaluation observed = evaluate_statistic(pattern, mesh, dist, config);
  return run_bootstrap(pattern, mesh, dist, config, observed, choose_pilot(pattern, config));
}

std::vector<TestResult> bootstrap_scan(const PointPattern& pattern,
                                       const MeshPtr& mesh,
                                       const SpatialCovariateDistribution& dist,
                                       const TestConfig& config,
                                       std::span<const double> pilot_bandwidths)
{
  StatisticEvaluation observed = evaluate_statistic(pattern, mesh, dist, config);
  std::vector<TestResult> out;
  if (pilot_bandwidths.empty()) {
    out.push_back(run_bootstrap(pattern, mesh, dist, config, observed, choose_pilot(pattern, config)));
    return out;
  }
  out.reserve(pilot_bandwidths.size());
  for (double t : pilot_bandwidths) {
    out.push_back(run_bootstrap(pattern, mesh, dist, config, observed, Bandwidth1D(t)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Asymptotic approximation

namespace {

enum class Axis
{
  x,
  y
};

// First difference of f along one axis: centred where both neighbours are
// in W, one-sided otherwise, 0 for isolated cells.
std::vector<double> first_difference(std::span<const double> f, const Mesh& mesh, Axis axis)
{
  const std::size_t nx = mesh.nx();
  const std::size_t ny = mesh.ny();
  const double step = axis == Axis::x ? mesh.dx() : mesh.dy();
  const std::size_t extent = axis == Axis::x ? nx : ny;
  std::vector<double> out(mesh.size(), 0.0);
  for (std::size_t r = 0; r < ny; ++r) {
    for (std::size_t c = 0; c < nx; ++c) {
      std::size_t cell = mesh.index(r, c);
      if (!mesh.inside(cell)) {
        continue;
      }
      std::size_t pos = axis == Axis::x ? c : r;
      auto at = [&](std::size_t p) {
        return axis == Axis::x ? mesh.index(r, p) : mesh.index(p, c);
      };
      bool has_prev = pos > 0 && mesh.inside(at(pos - 1));
      bool has_next = pos + 1 < extent && mesh.inside(at(pos + 1));
      if (has_prev && has_next) {
        out[cell] = (f[at(pos + 1)] - f[at(pos - 1)]) / (2.0 * step);
      } else if (has_next) {
        out[cell] = (f[at(pos + 1)] - f[cell]) / step;
      } else if (has_prev) {
        out[cell] = (f[cell] - f[at(pos - 1)]) / step;
      }
    }
  }
  return out;
}

std::vector<double> second_difference(std::span<const double> f, const Mesh& mesh, Axis axis)
{
  const std::size_t nx = mesh.nx();
  const std::size_t ny = mesh.ny();
  const double step = axis == Axis::x ? mesh.dx() : mesh.dy();
  const double inv = 1.0 / (step * step);
  const std::size_t extent = axis == Axis::x ? nx : ny;
  std::vector<double> out(mesh.size(), 0.0);
  for (std::size_t r = 0; r < ny; ++r) {
    for (std::size_t c = 0; c < nx; ++c) {
      std::size_t cell = mesh.index(r, c);
      if (!mesh.inside(cell)) {
        continue;
      }
      std::size_t pos = axis == Axis::x ? c : r;
      auto at = [&](std::size_t p) {
        return axis == Axis::x ? mesh.index(r, p) : mesh.index(p, c);
      };
      auto ok = [&](std::ptrdiff_t p) {
        return p >= 0 && p < static_cast<std::ptrdiff_t>(extent) &&
               mesh.inside(at(static_cast<std::size_t>(p)));
      };
      auto val = [&](std::ptrdiff_t p) { return f[at(static_cast<std::size_t>(p))]; };
      auto p = static_cast<std::ptrdiff_t>(pos);
      if (ok(p - 1) && ok(p + 1)) {
        out[cell] = (val(p + 1) - 2.0 * val(p) + val(p - 1)) * inv;
      } else if (ok(p + 1) && ok(p + 2)) {
        out[cell] = (val(p) - 2.0 * val(p + 1) + val(p + 2)) * inv;
      } else if (ok(p - 1) && ok(p - 2)) {
        out[cell] = (val(p) - 2.0 * val(p - 1) + val(p - 2)) * inv;
      }
    }
  }
  return out;
}

// \int l(y) (KoK)(H^{-1/2}(x - y)) dy at every in-window cell.
std::vector<double> smooth_with_kk(std::span<const double> l,
                                   const Kernel2D& K,
                                   const BandwidthMatrix& H,
                                   const Mesh& mesh)
{
  const std::size_t nx = mesh.nx();
  const std::size_t ny = mesh.ny();
  const Kernel1D& k = K.factor();
  if (H.is_diagonal()) {
    const double h1 = std::sqrt(H.h11());
    const double h2 = std::sqrt(H.h22());
    std::vector<double> kx(2 * nx - 1), ky(2 * ny - 1);
    for (std::size_t j = 0; j < kx.size(); ++j) {
      double off = (static_cast<double>(j) - static_cast<double>(nx - 1)) * mesh.dx();
      kx[j] = k.conv_kk(off / h1) * mesh.dx();
    }
    for (std::size_t j = 0; j < ky.size(); ++j) {
      double off = (static_cast<double>(j) - static_cast<double>(ny - 1)) * mesh.dy();
      ky[j] = k.conv_kk(off / h2) * mesh.dy();
    }
    std::vector<double> masked(l.begin(), l.end());
    for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
      if (!mesh.inside(cell)) {
        masked[cell] = 0.0;
      }
    }
    return detail::separable_filter(masked, ny, nx, ky, kx);
  }

  // (KoK) reaches twice as far as K
  const double reach = 2.0 * k.effective_support() * std::sqrt(2.0 * H.max_eigenvalue());
  const auto rx = static_cast<std::ptrdiff_t>(std::ceil(reach / mesh.dx()));
  const auto ry = static_cast<std::ptrdiff_t>(std::ceil(reach / mesh.dy()));
  std::vector<double> out(mesh.size(), 0.0);
  for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
    if (!mesh.inside(cell)) {
      continue;
    }
    auto r = static_cast<std::ptrdiff_t>(cell / nx);
    auto c = static_cast<std::ptrdiff_t>(cell % nx);
    double acc = 0.0;
    for (auto rr = std::max<std::ptrdiff_t>(0, r - ry);
         rr <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(ny) - 1, r + ry);
         ++rr) {
      for (auto cc = std::max<std::ptrdiff_t>(0, c - rx);
           cc <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(nx) - 1, c + rx);
           ++cc) {
        std::size_t other = mesh.index(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        if (!mesh.inside(other)) {
          continue;
        }
        Vec2 u = H.apply_inv_sqrt({ static_cast<double>(c - cc) * mesh.dx(),
                                    static_cast<double>(r - rr) * mesh.dy() });
        acc += l[other] * k.conv_kk(u[0]) * k.conv_kk(u[1]);
      }
    }
    out[cell] = acc * mesh.cell_area();
  }
  return out;
}

} // namespace

std::vector<double> hessian_trace(std::span<const double> values,
                                  const Mesh& mesh,
                                  const BandwidthMatrix& H)
{
  if (values.size() != mesh.size()) {
    throw InputError("hessian_trace: size mismatch with the mesh");
  }
  auto fxx = second_difference(values, mesh, Axis::x);
  auto fyy = second_difference(values, mesh, Axis::y);
  std::vector<double> fxy;
  if (!H.is_diagonal()) {
    auto fx = first_difference(values, mesh, Axis::x);
    fxy = first_difference(fx, mesh, Axis::y);
  }
  std::vector<double> tr(mesh.size(), 0.0);
  for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
    if (!mesh.inside(cell)) {
      continue;
    }
    double mixed = fxy.empty() ? 0.0 : 2.0 * H.h12() * fxy[cell];
    tr[cell] = H.h11() * fxx[cell] + mixed + H.h22() * fyy[cell];
  }
  return tr;
}

AsymptoticApprox asymptotic_moments(const RelativeDensitySurface& spatial,
                                    const Kernel2D& K,
                                    const BandwidthMatrix& H,
                                    std::size_t n,
                                    double T)
{
  if (n == 0) {
    throw InputError("asymptotic moments need n >= 1");
  }
  const Mesh& mesh = *spatial.mesh;
  std::span<const double> l = spatial.values;
  const KernelConstants kc = kernel_constants(K);
  const double a_m = 1.0 / static_cast<double>(n);
  const double scale = a_m * H.inv_sqrt_det();

  std::vector<double> tr = hessian_trace(l, mesh, H);
  std::vector<double> l_tr(mesh.size()), tr2(mesh.size()), l2(mesh.size());
  for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
    l_tr[cell] = l[cell] * tr[cell];
    tr2[cell] = tr[cell] * tr[cell];
    l2[cell] = l[cell] * l[cell];
  }

  AsymptoticApprox out;
  out.mu_terms[0] = scale * kc.roughness;
  out.mu_terms[1] = 0.5 * kc.second_moment * quadrature(l_tr, mesh);
  out.mu_terms[2] = 0.25 * kc.second_moment * kc.second_moment * quadrature(tr2, mesh);
  out.mu_T = out.mu_terms[0] + out.mu_terms[1] + out.mu_terms[2];

  std::vector<double> inner = smooth_with_kk(l, K, H, mesh);
  std::vector<double> outer(mesh.size());
  for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
    outer[cell] = l2[cell] * inner[cell];
  }
  out.sigma2_terms[0] = scale * quadrature(outer, mesh);
  out.sigma2_terms[1] = 2.0 * scale * quadrature(l2, mesh) * kc.roughness;
  out.sigma2_T = out.sigma2_terms[0] + out.sigma2_terms[1];
  if (!(out.sigma2_T > 0.0) || !std::isfinite(out.sigma2_T)) {
    throw NumericError("degenerate variance");
  }
  out.z_score = (T - out.mu_T) / std::sqrt(out.sigma2_T);
  out.p_normal = 0.5 * std::erfc(out.z_score / std::sqrt(2.0));
  return out;
}

// ---------------------------------------------------------------------------
// U-statistic expansion

UStatisticTerms ustat_T_terms(const PointPattern& pattern,
                              const SpatialCovariateDistribution& dist,
                              const Kernel2D& K,
                              const BandwidthMatrix& H,
                              const Kernel1D& L,
                              Bandwidth1D b,
                              const Mesh& mesh)
{
  if (pattern.empty()) {
    throw InputError("U-statistic expansion needs N >= 1");
  }
  const std::size_t n = pattern.size();
  const auto pts = pattern.points();
  const auto z = pattern.z_values();
  const auto zx = mesh.covariate();

  // kernel columns evaluated directly at each in-window cell
  std::vector<std::size_t> cells;
  cells.reserve(mesh.inside_count());
  for (std::size_t cell = 0; cell < mesh.size(); ++cell) {
    if (mesh.inside(cell)) {
      cells.push_back(cell);
    }
  }
  const std::size_t m = cells.size();
  std::vector<double> a(n * m), c(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0 / dist.gstar(z[i]);
    for (std::size_t k = 0; k < m; ++k) {
      Point x = mesh.center(cells[k]);
      a[i * m + k] = eval_KH(K, H, { x.x - pts[i].x, x.y - pts[i].y });
      c[i * m + k] = w * L.scaled(zx[cells[k]] - z[i], b.value());
    }
  }
  auto integral = [&](const double* f, const double* g) {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      s += f[k] * g[k];
    }
    return s * mesh.cell_area();
  };

  UStatisticTerms out;
  auto& t = out.addends;
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.data() + i * m;
    const double* ci = c.data() + i * m;
    t[0] += integral(ai, ai);
    t[2] += integral(ci, ci);
    t[4] += integral(ai, ci);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) {
        continue;
      }
      const double* aj = a.data() + j * m;
      const double* cj = c.data() + j * m;
      t[1] += integral(ai, aj);
      t[3] += integral(ci, cj);
      t[5] += integral(ai, cj);
    }
  }
  const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  for (std::size_t k = 0; k < 6; ++k) {
    t[k] *= inv_n2;
  }
  t[4] *= -2.0;
  t[5] *= -2.0;
  out.total = t[0] + t[1] + t[2] + t[3] + t[4] + t[5];
  return out;
}

double ustat_T_oracle(const PointPattern& pattern,
                      const SpatialCovariateDistribution& dist,
                      const Kernel2D& K,
                      const BandwidthMatrix& H,
                      const Kernel1D& L,
                      Bandwidth1D b,
                      const Mesh& mesh)
{
  return ustat_T_terms(pattern, dist, K, H, L, b, mesh).total;
}

} // namespace ppcov
