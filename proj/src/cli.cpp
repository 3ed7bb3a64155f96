#include "ppcov/cli.hpp"

#include "ppcov/errors.hpp"
#include "ppcov/goftest.hpp"
#include "ppcov/io.hpp"
#include "ppcov/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <toml.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace ppcov::cli {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t default_seed = 42;

// ---------------------------------------------------------------------------
// small parsers

double parse_number(const std::string& text, const std::string& what)
{
  std::string s = text;
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t") + 1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw InputError(what + ": '" + text + "' is not a finite number");
  }
  return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& what)
{
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_number(item, what));
  }
  return out;
}

std::optional<BandwidthMatrix> parse_H(const std::string& text)
{
  if (text.empty() || text == "auto") {
    return std::nullopt;
  }
  auto v = parse_list(text, "--H");
  if (v.size() != 3) {
    throw InputError("--H expects \"h11,h12,h22\"");
  }
  return BandwidthMatrix(v[0], v[1], v[2]);
}

std::optional<Bandwidth1D> parse_b(const std::string& text, const std::string& what)
{
  if (text.empty() || text == "auto") {
    return std::nullopt;
  }
  return Bandwidth1D(parse_number(text, what));
}

Vec2 parse_pair(const std::string& text, const std::string& what)
{
  auto v = parse_list(text, what);
  if (v.size() != 2) {
    throw InputError(what + " expects \"a,b\"");
  }
  return { v[0], v[1] };
}

unsigned resolve_jobs(unsigned jobs)
{
  if (jobs == 0) {
    return std::max(1u, std::thread::hardware_concurrency());
  }
  return jobs;
}

//! Explicit flag, then PPCOV_SEED, then the fallback.
std::uint64_t resolve_seed(const CLI::Option* flag, std::uint64_t flag_value, std::uint64_t fallback)
{
  if (flag && flag->count() > 0) {
    return flag_value;
  }
  if (const char* env = std::getenv("PPCOV_SEED"); env && *env) {
    std::uint64_t v = 0;
    std::string s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw InputError("PPCOV_SEED: '" + s + "' is not an unsigned integer");
    }
    return v;
  }
  return fallback;
}

json H_json(const BandwidthMatrix& H)
{
  return json::array({ H.h11(), H.h12(), H.h22() });
}

// ---------------------------------------------------------------------------
// shared option groups

struct DataOptions
{
  std::string pattern;
  std::string covariate;
  std::string mask;
  std::size_t grid_cells = 256;
};

struct SmoothingOptions
{
  std::string kernel = "gaussian";
  std::string H;
  std::string b;
  std::string edge = "window";
};

void add_data_options(CLI::App* app, DataOptions& data, bool need_pattern)
{
  auto* p = app->add_option("--pattern", data.pattern, "point pattern CSV (header x,y)");
  if (need_pattern) {
    p->required();
  }
  app->add_option("--covariate", data.covariate, "covariate raster (ESRI ASCII grid)");
  app->add_option("--mask", data.mask, "window mask raster (0/1, same grid as the covariate)");
  app->add_option("--grid-cells", data.grid_cells, "quadrature mesh cells along the longest axis")
    ->check(CLI::PositiveNumber);
}

void add_smoothing_options(CLI::App* app, SmoothingOptions& s)
{
  app->add_option("--kernel", s.kernel, "kernel family for K and L")
    ->check(CLI::IsMember({ "gaussian", "epanechnikov" }));
  app->add_option("--H", s.H, "bandwidth matrix \"h11,h12,h22\" (default: normal-reference rule)");
  app->add_option("--b", s.b, "covariate bandwidth (default: Silverman's rule)");
  app->add_option("--edge", s.edge, "edge correction")->check(CLI::IsMember({ "window", "none" }));
}

MeshPtr load_mesh(const DataOptions& data)
{
  if (data.covariate.empty()) {
    throw InputError("--covariate is required");
  }
  CovariateGrid grid = io::read_covariate(data.covariate);
  ObservationWindow window = data.mask.empty()
                               ? ObservationWindow::from_grid(grid)
                               : ObservationWindow::masked(grid, io::read_mask(data.mask));
  return make_mesh(std::move(grid), std::move(window), data.grid_cells);
}

PointPattern load_pattern(const DataOptions& data, const Mesh& mesh)
{
  return PointPattern(io::read_pattern_csv(data.pattern), mesh);
}

TestConfig make_test_config(const SmoothingOptions& s)
{
  TestConfig config;
  KernelFamily family = parse_kernel_family(s.kernel);
  config.K = Kernel2D(family);
  config.L = Kernel1D(family);
  config.H = parse_H(s.H);
  config.b = parse_b(s.b, "--b");
  config.edge = s.edge == "none" ? EdgeCorrection::none : EdgeCorrection::window;
  return config;
}

json data_json(const DataOptions& data)
{
  json j;
  j["pattern"] = data.pattern;
  j["covariate"] = data.covariate;
  j["mask"] = data.mask;
  j["grid_cells"] = data.grid_cells;
  return j;
}

json smoothing_json(const SmoothingOptions& s)
{
  json j;
  j["kernel"] = s.kernel;
  j["H"] = s.H.empty() ? "auto" : s.H;
  j["b"] = s.b.empty() ? "auto" : s.b;
  j["edge"] = s.edge;
  return j;
}

json asymptotic_json(const RelativeDensitySurface& spatial,
                     const TestConfig& config,
                     const BandwidthMatrix& H,
                     std::size_t n,
                     double T)
{
  try {
    AsymptoticApprox a = asymptotic_moments(spatial, config.K, H, n, T);
    return { { "mu_T", a.mu_T }, { "sigma2_T", a.sigma2_T }, { "z", a.z_score }, { "p_normal", a.p_normal } };
  } catch (const NumericError&) {
    return nullptr;
  }
}

void emit(const std::string& out_path, const std::string& text, std::ostream& out)
{
  if (out_path.empty() || out_path == "-") {
    out << text;
  } else {
    io::write_text(out_path, text);
  }
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions
{
  DataOptions data;
  SmoothingOptions smoothing;
  std::string out;
};

int run_fit(const FitOptions& o, std::ostream& out)
{
  MeshPtr mesh = load_mesh(o.data);
  PointPattern pattern = load_pattern(o.data, *mesh);
  SpatialCovariateDistribution dist = build_spatial_distribution(*mesh);
  TestConfig config = make_test_config(o.smoothing);

  json result;
  RelativeDensitySurface spatial, covariate;
  if (pattern.empty()) {
    if (!config.H || !config.b) {
      throw NumericError("cannot select bandwidths for an empty pattern; pass --H and --b");
    }
    spatial = relative_density_spatial(pattern, config.K, *config.H, mesh, config.edge);
    covariate = covariate_relative_density(pattern, dist, config.L, *config.b, mesh);
    result["T"] = nullptr;
    result["H"] = H_json(*config.H);
    result["b"] = config.b->value();
    result["asymptotic"] = nullptr;
  } else {
    StatisticEvaluation eval = evaluate_statistic(pattern, mesh, dist, config);
    result["T"] = eval.T;
    result["H"] = H_json(eval.H);
    result["b"] = eval.b.value();
    result["asymptotic"] = asymptotic_json(eval.spatial, config, eval.H, pattern.size(), eval.T);
    spatial = std::move(eval.spatial);
    covariate = std::move(eval.covariate);
  }
  result["n"] = pattern.size();
  result["empty_pattern"] = pattern.empty();
  result["spatial_surface"] = o.out + ".spatial.asc";
  result["covariate_surface"] = o.out + ".covariate.asc";
  json cfg = data_json(o.data);
  cfg.update(smoothing_json(o.smoothing));
  result["config"] = cfg;

  io::write_surface(o.out + ".spatial.asc", *mesh, spatial.values);
  io::write_surface(o.out + ".covariate.asc", *mesh, covariate.values);
  io::write_text(o.out + ".json", result.dump(2) + "\n");
  out << "wrote " << o.out << ".spatial.asc, " << o.out << ".covariate.asc, " << o.out << ".json\n";
  return ok;
}

// ---------------------------------------------------------------------------
// test

struct TestOptions
{
  DataOptions data;
  SmoothingOptions smoothing;
  std::size_t B = 500;
  std::string pilot_t;
  std::uint64_t seed = default_seed;
  CLI::Option* seed_flag = nullptr;
  unsigned jobs = 1;
  bool fixed_bootstrap_bandwidths = false;
  std::string out;
};

int run_test(const TestOptions& o, std::ostream& out)
{
  MeshPtr mesh = load_mesh(o.data);
  PointPattern pattern = load_pattern(o.data, *mesh);
  SpatialCovariateDistribution dist = build_spatial_distribution(*mesh);

  TestConfig config = make_test_config(o.smoothing);
  config.B = o.B;
  config.seed = resolve_seed(o.seed_flag, o.seed, default_seed);
  config.jobs = resolve_jobs(o.jobs);
  config.reselect_bandwidths = !o.fixed_bootstrap_bandwidths;
  if (config.B < 1) {
    throw InputError("--B must be at least 1");
  }
  if (pattern.empty()) {
    throw InputError("the test cannot run on an empty pattern");
  }

  std::vector<double> pilots;
  bool scan = false;
  if (!o.pilot_t.empty()) {
    pilots = parse_pilot_range(o.pilot_t);
    scan = o.pilot_t.find(':') != std::string::npos;
  }

  StatisticEvaluation eval = evaluate_statistic(pattern, mesh, dist, config);
  std::vector<TestResult> results = bootstrap_scan(pattern, mesh, dist, config, pilots);

  json j;
  j["T"] = eval.T;
  j["B"] = config.B;
  if (scan) {
    json ps = json::array();
    json ts = json::array();
    for (const auto& r : results) {
      ps.push_back({ { "t", r.t.value() }, { "p_value", r.p_value }, { "empty_replicates", r.empty_replicates } });
      ts.push_back(r.t.value());
    }
    j["p_value"] = ps;
    j["H"] = H_json(eval.H);
    j["b"] = eval.b.value();
    j["t"] = ts;
  } else {
    j["p_value"] = results.front().p_value;
    j["H"] = H_json(eval.H);
    j["b"] = eval.b.value();
    j["t"] = results.front().t.value();
    j["empty_replicates"] = results.front().empty_replicates;
  }
  j["seed"] = config.seed;
  j["n"] = pattern.size();
  j["asymptotic"] = asymptotic_json(eval.spatial, config, eval.H, pattern.size(), eval.T);

  json cfg = data_json(o.data);
  cfg.update(smoothing_json(o.smoothing));
  cfg["B"] = config.B;
  cfg["pilot_t"] = o.pilot_t.empty() ? "auto" : o.pilot_t;
  cfg["seed"] = config.seed;
  cfg["reselect_bandwidths"] = config.reselect_bandwidths;
  j["config"] = cfg;

  emit(o.out, j.dump(2) + "\n", out);
  return ok;
}

// ---------------------------------------------------------------------------
// bandwidth

struct BandwidthOptions
{
  DataOptions data;
  std::string out;
};

int run_bandwidth(const BandwidthOptions& o, std::ostream& out)
{
  MeshPtr mesh = load_mesh(o.data);
  PointPattern pattern = load_pattern(o.data, *mesh);
  BandwidthMatrix H = select_H(pattern.points());
  Bandwidth1D b = select_b(pattern.z_values());
  json j;
  j["H"] = H_json(H);
  j["b"] = b.value();
  j["t"] = b.value();
  j["n"] = pattern.size();
  j["config"] = data_json(o.data);
  emit(o.out, j.dump(2) + "\n", out);
  return ok;
}

// ---------------------------------------------------------------------------
// simulate

struct BandOptions
{
  std::string kind;
  double d = 0.0;
  std::string center = "0.5,0.5";
  std::string direction = "1,-1";
  double offset = 15.0;
};

void add_band_options(CLI::App* app, BandOptions& band)
{
  app->add_option("--band-kind", band.kind, "axis_c | diagonal_m | diagonal_m_literal | general");
  app->add_option("--band-d", band.d, "band standard deviation d (omit for no band)");
  app->add_option("--band-center", band.center, "band center \"u0,v0\"");
  app->add_option("--band-direction", band.direction, "band normal \"a,b\" (general kind)");
  app->add_option("--band-offset", band.offset, "axis_c offset constant");
}

std::optional<PerturbationBand> make_band(const BandOptions& o)
{
  if (o.kind.empty() && o.d == 0.0) {
    return std::nullopt;
  }
  if (o.kind.empty() || o.d == 0.0) {
    throw InputError("a band needs both --band-kind and --band-d");
  }
  PerturbationBand band;
  band.kind = parse_band_kind(o.kind);
  band.d = o.d;
  Vec2 c = parse_pair(o.center, "--band-center");
  band.center_u = c[0];
  band.center_v = c[1];
  band.direction = parse_pair(o.direction, "--band-direction");
  band.offset = o.offset;
  band.validate();
  return band;
}

json band_json(const std::optional<PerturbationBand>& band)
{
  if (!band) {
    return nullptr;
  }
  return { { "kind", to_string(band->kind) },
           { "d", band->d },
           { "center", json::array({ band->center_u, band->center_v }) },
           { "direction", json::array({ band->direction[0], band->direction[1] }) },
           { "offset", band->offset } };
}

//! Intensity grid resampled onto the mesh, negative values rejected.
IntensitySurface load_intensity(const std::string& path, const MeshPtr& mesh)
{
  CovariateGrid grid = io::read_covariate(path);
  ObservationWindow extent = ObservationWindow::from_grid(grid);
  std::vector<double> values(mesh->size(), 0.0);
  for (std::size_t cell = 0; cell < mesh->size(); ++cell) {
    if (!mesh->inside(cell)) {
      continue;
    }
    Point c = mesh->center(cell);
    if (!extent.contains(c)) {
      throw InputError(path + ": intensity grid does not cover the window");
    }
    double v = covariate_at(grid, extent, c);
    if (v < 0.0) {
      throw InputError(path + ": intensity must be nonnegative");
    }
    values[cell] = v;
  }
  return { mesh, std::move(values) };
}

struct SimulateOptions
{
  DataOptions data;
  std::string intensity;
  double m = 100.0;
  CLI::Option* m_flag = nullptr;
  std::size_t raster_cells = 256;
  BandOptions band;
  std::size_t count = 1;
  std::uint64_t seed = default_seed;
  CLI::Option* seed_flag = nullptr;
  std::string covariate_out;
  std::string out;
};

std::string replicate_path(const std::string& out, std::size_t k, std::size_t count)
{
  if (count == 1) {
    return out;
  }
  std::filesystem::path p(out);
  std::ostringstream name;
  name << p.stem().string() << '_' << std::setw(static_cast<int>(std::to_string(count - 1).size()))
       << std::setfill('0') << k << (p.has_extension() ? p.extension().string() : ".csv");
  return (p.parent_path() / name.str()).string();
}

int run_simulate(const SimulateOptions& o, std::ostream& out)
{
  const bool synthetic = o.data.covariate.empty();
  MeshPtr mesh;
  IntensitySurface base;
  if (synthetic) {
    if (!o.intensity.empty()) {
      throw InputError("--intensity needs --covariate to define the window");
    }
    mesh = synthetic_mesh(o.raster_cells, o.data.grid_cells);
    base = synthetic_null_intensity(mesh, o.m);
  } else {
    if (o.intensity.empty()) {
      throw InputError("--covariate needs --intensity (or omit both for the synthetic model)");
    }
    mesh = load_mesh(o.data);
    base = load_intensity(o.intensity, mesh);
  }
  if (o.count < 1) {
    throw InputError("--count must be at least 1");
  }
  SyntheticModel model{ base, make_band(o.band), o.m };
  IntensitySurface lambda = model.band || (o.m_flag && o.m_flag->count() > 0)
                              ? perturbed_intensity(model)
                              : base;
  IntensitySampler sampler(lambda);
  const std::uint64_t seed = resolve_seed(o.seed_flag, o.seed, default_seed);

  json cfg = data_json(o.data);
  cfg["synthetic"] = synthetic;
  cfg["raster_cells"] = synthetic ? json(o.raster_cells) : json(nullptr);
  cfg["intensity"] = o.intensity;
  cfg["m"] = o.m;
  cfg["band"] = band_json(model.band);
  cfg["count"] = o.count;
  cfg["seed"] = seed;

  for (std::size_t k = 0; k < o.count; ++k) {
    StreamRng rng = StreamRng::derive(seed, { k });
    PointPattern pattern = sampler.draw_poisson(rng);
    std::ostringstream text;
    json line = cfg;
    line["replicate"] = k;
    text << "# config: " << line.dump() << "\n";
    io::write_pattern_csv(text, pattern.points());
    std::string path = replicate_path(o.out, k, o.count);
    io::write_text(path, text.str());
    out << path << ": " << pattern.size() << " points\n";
  }
  if (!o.covariate_out.empty()) {
    const CovariateGrid& grid = mesh->grid();
    const RasterGeometry& g = grid.geometry();
    std::ostringstream text;
    text << "ncols " << g.ncols << "\nnrows " << g.nrows << "\nxllcorner " << io::format_double(g.x_origin)
         << "\nyllcorner " << io::format_double(g.y_origin) << "\ncellsize " << io::format_double(g.cellsize)
         << "\nNODATA_value -9999\n";
    for (std::size_t fr = 0; fr < g.nrows; ++fr) {
      std::size_t row = g.nrows - 1 - fr;
      for (std::size_t c = 0; c < g.ncols; ++c) {
        text << (c > 0 ? " " : "") << (grid.is_nodata(row, c) ? "-9999" : io::format_double(grid.value(row, c)));
      }
      text << "\n";
    }
    io::write_text(o.covariate_out, text.str());
  }
  return ok;
}

// ---------------------------------------------------------------------------
// power

struct PowerOptions
{
  std::string config;
  std::string out;
  std::uint64_t seed = default_seed;
  CLI::Option* seed_flag = nullptr;
  std::size_t grid_cells = 0;
  CLI::Option* grid_flag = nullptr;
  unsigned jobs = 1;
};

[[noreturn]] void toml_fail(const std::string& path, const toml::source_region& where, const std::string& what)
{
  throw InputError(path + ":" + std::to_string(where.begin.line) + ": " + what);
}

double toml_number(const std::string& path, const toml::node& node, const std::string& key)
{
  if (auto v = node.value<double>()) {
    return *v;
  }
  toml_fail(path, node.source(), key + " must be a number");
}

std::optional<double> toml_d_value(const std::string& path, const toml::node& node)
{
  if (auto s = node.value<std::string>()) {
    if (*s == "inf") {
      return std::nullopt;
    }
    toml_fail(path, node.source(), "d values are numbers or \"inf\"");
  }
  double v = toml_number(path, node, "d");
  if (std::isinf(v)) {
    return std::nullopt;
  }
  if (!(v > 0.0)) {
    toml_fail(path, node.source(), "d values must be positive");
  }
  return v;
}

std::string d_label(const std::optional<double>& d)
{
  return d ? io::format_double(*d) : std::string("inf");
}

int run_power(const PowerOptions& o, std::ostream& out)
{
  toml::table doc;
  try {
    doc = toml::parse_file(o.config);
  } catch (const toml::parse_error& e) {
    throw InputError(o.config + ":" + std::to_string(e.source().begin.line) + ": " +
                     std::string(e.description()));
  }
  const std::string& path = o.config;

  auto table_or_empty = [&](const char* key) -> const toml::table* {
    const toml::node* n = doc.get(key);
    if (!n) {
      return nullptr;
    }
    if (!n->is_table()) {
      toml_fail(path, n->source(), std::string("[") + key + "] must be a table");
    }
    return n->as_table();
  };
  auto get_number = [&](const toml::table* t, const char* key, double fallback) {
    if (!t || !t->contains(key)) {
      return fallback;
    }
    return toml_number(path, *t->get(key), key);
  };
  auto get_string = [&](const toml::table* t, const char* key, std::string fallback) {
    if (!t || !t->contains(key)) {
      return fallback;
    }
    auto v = t->get(key)->value<std::string>();
    if (!v) {
      toml_fail(path, t->get(key)->source(), std::string(key) + " must be a string");
    }
    return *v;
  };
  auto get_pair = [&](const toml::table* t, const char* key, Vec2 fallback) {
    if (!t || !t->contains(key)) {
      return fallback;
    }
    const toml::node* n = t->get(key);
    const toml::array* a = n->as_array();
    if (!a || a->size() != 2) {
      toml_fail(path, n->source(), std::string(key) + " must be a two-element array");
    }
    return Vec2{ toml_number(path, *a->get(0), key), toml_number(path, *a->get(1), key) };
  };
  auto count_value = [&](const toml::table* t, const char* key, double fallback) {
    double v = get_number(t, key, fallback);
    if (!(v >= 1.0) || v != std::floor(v)) {
      toml_fail(path, t && t->contains(key) ? t->get(key)->source() : doc.source(),
                std::string(key) + " must be a positive integer");
    }
    return static_cast<std::size_t>(v);
  };

  const toml::table* model_t = table_or_empty("model");
  const toml::table* band_t = table_or_empty("band");
  const toml::table* study_t = table_or_empty("study");
  const toml::table* test_t = table_or_empty("test");
  if (!study_t) {
    throw InputError(path + ": missing [study] table");
  }

  // model
  std::string preset = get_string(model_t, "preset", "synthetic");
  std::size_t grid_cells = (o.grid_flag && o.grid_flag->count() > 0)
                             ? o.grid_cells
                             : count_value(model_t, "grid_cells", 256);
  std::size_t raster_cells = count_value(model_t, "raster_cells", 256);
  std::string covariate_path = get_string(model_t, "covariate", "");
  std::string mask_path = get_string(model_t, "mask", "");
  std::string intensity_path = get_string(model_t, "intensity", "");
  MeshPtr mesh;
  IntensitySurface base;
  if (covariate_path.empty()) {
    if (preset != "synthetic") {
      throw InputError(path + ": unknown preset '" + preset + "'; give model.covariate instead");
    }
    mesh = synthetic_mesh(raster_cells, grid_cells);
    base = synthetic_null_intensity(mesh, 1.0);
  } else {
    if (intensity_path.empty()) {
      throw InputError(path + ": model.covariate needs model.intensity (the null intensity grid)");
    }
    DataOptions data;
    data.covariate = covariate_path;
    data.mask = mask_path;
    data.grid_cells = grid_cells;
    mesh = load_mesh(data);
    base = load_intensity(intensity_path, mesh);
  }

  // band
  PerturbationBand band;
  band.kind = parse_band_kind(get_string(band_t, "kind", "general"));
  Vec2 center = get_pair(band_t, "center", { 0.5, 0.5 });
  band.center_u = center[0];
  band.center_v = center[1];
  band.direction = get_pair(band_t, "direction", { 1.0, -1.0 });
  band.offset = get_number(band_t, "offset", 15.0);

  // study grid
  PowerStudyConfig config;
  config.base = base;
  config.band = band;
  auto list = [&](const char* key) -> const toml::array& {
    const toml::node* n = study_t->get(key);
    if (!n || !n->is_array() || n->as_array()->empty()) {
      throw InputError(path + ": study." + key + " must be a non-empty array");
    }
    return *n->as_array();
  };
  for (const toml::node& n : list("d")) {
    config.d_values.push_back(toml_d_value(path, n));
  }
  for (const toml::node& n : list("m")) {
    double m = toml_number(path, n, "m");
    if (!(m > 0.0)) {
      toml_fail(path, n.source(), "m values must be positive");
    }
    config.m_values.push_back(m);
  }
  config.R = count_value(study_t, "R", 200);
  config.alpha = get_number(study_t, "alpha", 0.05);
  std::uint64_t file_seed = default_seed;
  if (study_t->contains("seed")) {
    auto s = study_t->get("seed")->value<std::int64_t>();
    if (!s || *s < 0) {
      toml_fail(path, study_t->get("seed")->source(), "seed must be a nonnegative integer");
    }
    file_seed = static_cast<std::uint64_t>(*s);
  }
  config.seed = resolve_seed(o.seed_flag, o.seed, file_seed);
  config.jobs = resolve_jobs(o.jobs);

  // test settings
  SmoothingOptions smoothing;
  smoothing.kernel = get_string(test_t, "kernel", "gaussian");
  smoothing.edge = get_string(test_t, "edge", "window");
  if (test_t && test_t->contains("H")) {
    const toml::array* a = test_t->get("H")->as_array();
    if (!a || a->size() != 3) {
      toml_fail(path, test_t->get("H")->source(), "H must be [h11, h12, h22]");
    }
    smoothing.H = io::format_double(toml_number(path, *a->get(0), "H")) + "," +
                  io::format_double(toml_number(path, *a->get(1), "H")) + "," +
                  io::format_double(toml_number(path, *a->get(2), "H"));
  }
  if (test_t && test_t->contains("b")) {
    smoothing.b = io::format_double(get_number(test_t, "b", 0.0));
  }
  config.test = make_test_config(smoothing);
  config.test.B = count_value(study_t, "B", 199);
  if (test_t && test_t->contains("pilot_t")) {
    config.test.t = Bandwidth1D(get_number(test_t, "pilot_t", 0.0));
  }
  if (test_t && test_t->contains("reselect_bandwidths")) {
    auto v = test_t->get("reselect_bandwidths")->value<bool>();
    if (!v) {
      toml_fail(path, test_t->get("reselect_bandwidths")->source(), "reselect_bandwidths must be a boolean");
    }
    config.test.reselect_bandwidths = *v;
  }

  PowerTable table = power_study(config);

  json cfg;
  cfg["model"] = { { "preset", covariate_path.empty() ? "synthetic" : "file" },
                   { "covariate", covariate_path },
                   { "mask", mask_path },
                   { "intensity", intensity_path },
                   { "raster_cells", raster_cells },
                   { "grid_cells", grid_cells } };
  cfg["band"] = { { "kind", to_string(band.kind) },
                  { "center", json::array({ band.center_u, band.center_v }) },
                  { "direction", json::array({ band.direction[0], band.direction[1] }) },
                  { "offset", band.offset } };
  json d_list = json::array();
  for (const auto& d : config.d_values) {
    d_list.push_back(d ? json(*d) : json("inf"));
  }
  cfg["study"] = { { "d", d_list },
                   { "m", config.m_values },
                   { "R", config.R },
                   { "B", config.test.B },
                   { "alpha", config.alpha },
                   { "seed", config.seed } };
  cfg["test"] = smoothing_json(smoothing);
  cfg["test"]["pilot_t"] = config.test.t ? json(config.test.t->value()) : json("auto");
  cfg["test"]["reselect_bandwidths"] = config.test.reselect_bandwidths;

  std::ostringstream csv;
  csv << "# config: " << cfg.dump() << "\n";
  for (std::size_t im = 0; im < table.m_values.size(); ++im) {
    for (std::size_t id = 0; id < table.d_values.size(); ++id) {
      const PowerCell& c = table.at(im, id);
      if (c.flagged()) {
        csv << "# flagged: m=" << io::format_double(c.scenario.m) << " d=" << d_label(c.scenario.d)
            << " skipped " << c.skipped << " of " << config.R << " replicates\n";
      }
    }
  }
  csv << "m";
  for (const auto& d : table.d_values) {
    csv << ',' << d_label(d);
  }
  csv << "\n";
  for (std::size_t im = 0; im < table.m_values.size(); ++im) {
    csv << io::format_double(table.m_values[im]);
    for (std::size_t id = 0; id < table.d_values.size(); ++id) {
      csv << ',' << io::format_double(table.at(im, id).proportion());
    }
    csv << "\n";
  }
  emit(o.out, csv.str(), out);
  return ok;
}

} // namespace

std::vector<double> parse_pilot_range(const std::string& text)
{
  if (text.find(':') == std::string::npos) {
    double t = parse_number(text, "--pilot-t");
    Bandwidth1D check(t);
    return { t };
  }
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    parts.push_back(item);
  }
  if (parts.size() != 3) {
    throw InputError("--pilot-t range must be start:stop:step");
  }
  double start = parse_number(parts[0], "--pilot-t");
  double stop = parse_number(parts[1], "--pilot-t");
  double step = parse_number(parts[2], "--pilot-t");
  if (!(start > 0.0) || !(step > 0.0) || stop < start) {
    throw InputError("--pilot-t range needs 0 < start <= stop and step > 0");
  }
  auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  if (count > 10000) {
    throw InputError("--pilot-t range has too many values");
  }
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    double t = start + static_cast<double>(k) * step;
    out[k] = std::round(t * 1e12) / 1e12;
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{ "Goodness-of-fit test for covariate-driven Poisson intensities" };
  app.name("ppcov");
  app.require_subcommand(1);

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "write the spatial and covariate estimator surfaces");
  add_data_options(fit_cmd, fit.data, true);
  add_smoothing_options(fit_cmd, fit.smoothing);
  fit_cmd->add_option("--out", fit.out, "output prefix")->required();

  TestOptions test;
  auto* test_cmd = app.add_subcommand("test", "bootstrap goodness-of-fit test");
  add_data_options(test_cmd, test.data, true);
  add_smoothing_options(test_cmd, test.smoothing);
  test_cmd->add_option("--B", test.B, "bootstrap replicates");
  test_cmd->add_option("--pilot-t", test.pilot_t, "pilot bandwidth t or range start:stop:step");
  test.seed_flag = test_cmd->add_option("--seed", test.seed, "master seed");
  test_cmd->add_option("--jobs", test.jobs, "worker threads (0 = all cores)");
  test_cmd->add_flag("--fixed-bootstrap-bandwidths", test.fixed_bootstrap_bandwidths,
                     "reuse the data bandwidths on every bootstrap pattern");
  test_cmd->add_option("--out", test.out, "result JSON (stdout if omitted)");

  BandwidthOptions bw;
  auto* bw_cmd = app.add_subcommand("bandwidth", "print the selected H and b");
  add_data_options(bw_cmd, bw.data, true);
  bw_cmd->add_option("--out", bw.out, "JSON output (stdout if omitted)");

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "draw Poisson patterns");
  add_data_options(sim_cmd, sim.data, false);
  sim_cmd->add_option("--intensity", sim.intensity, "intensity raster on the covariate window");
  sim.m_flag = sim_cmd->add_option("--m", sim.m, "expected number of points");
  sim_cmd->add_option("--raster-cells", sim.raster_cells, "synthetic covariate raster size")
    ->check(CLI::PositiveNumber);
  add_band_options(sim_cmd, sim.band);
  sim_cmd->add_option("--count", sim.count, "number of patterns");
  sim.seed_flag = sim_cmd->add_option("--seed", sim.seed, "master seed");
  sim_cmd->add_option("--covariate-out", sim.covariate_out, "also write the covariate raster");
  sim_cmd->add_option("--out", sim.out, "pattern CSV (numbered when --count > 1)")->required();

  PowerOptions power;
  auto* power_cmd = app.add_subcommand("power", "Monte Carlo rejection table");
  power_cmd->add_option("--config", power.config, "study TOML")->required()->check(CLI::ExistingFile);
  power_cmd->add_option("--out", power.out, "table CSV (stdout if omitted)");
  power.seed_flag = power_cmd->add_option("--seed", power.seed, "master seed");
  power.grid_flag = power_cmd->add_option("--grid-cells", power.grid_cells, "quadrature mesh cells")
                      ->check(CLI::PositiveNumber);
  power_cmd->add_option("--jobs", power.jobs, "worker threads (0 = all cores)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? ok : input_error;
  }

  try {
    if (*fit_cmd) {
      return run_fit(fit, out);
    }
    if (*test_cmd) {
      return run_test(test, out);
    }
    if (*bw_cmd) {
      return run_bandwidth(bw, out);
    }
    if (*sim_cmd) {
      return run_simulate(sim, out);
    }
    if (*power_cmd) {
      return run_power(power, out);
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return input_error;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return numeric_error;
  } catch (const std::exception& e) {
    err << "unexpected error: " << e.what() << "\n";
    return unexpected;
  }
  return unexpected;
}

int run(int argc, char** argv)
{
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

} // namespace ppcov::cli
