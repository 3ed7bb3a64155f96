#include "ppcov/io.hpp"

#include "ppcov/errors.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace ppcov::io {

namespace {

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what)
{
  throw InputError(source + ":" + std::to_string(line) + ": " + what);
}

std::string trim(std::string_view s)
{
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) {
    return {};
  }
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> to_double(std::string_view s)
{
  if (!s.empty() && s.front() == '+') {
    s.remove_prefix(1);
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    return std::nullopt;
  }
  return v;
}

std::string lower(std::string s)
{
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split_ws(const std::string& line)
{
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) {
    out.push_back(tok);
  }
  return out;
}

std::ifstream open_input(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open '" + path.string() + "'");
  }
  return in;
}

} // namespace

AsciiGrid parse_ascii_grid(std::istream& in, const std::string& source)
{
  std::map<std::string, std::pair<double, std::size_t>> header;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> pending; // first data line, already read
  std::size_t pending_line = 0;

  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty()) {
      continue;
    }
    if (to_double(tokens[0])) {
      pending = std::move(tokens);
      pending_line = line_no;
      break;
    }
    if (tokens.size() != 2) {
      fail(source, line_no, "expected '<key> <value>' in the header");
    }
    auto value = to_double(tokens[1]);
    if (!value) {
      fail(source, line_no, "header value '" + tokens[1] + "' is not a number");
    }
    std::string key = lower(tokens[0]);
    if (header.contains(key)) {
      fail(source, line_no, "duplicate header key '" + tokens[0] + "'");
    }
    header[key] = { *value, line_no };
  }

  auto require = [&](const std::string& key) -> std::pair<double, std::size_t> {
    auto it = header.find(key);
    if (it == header.end()) {
      fail(source, line_no, "missing header key '" + key + "'");
    }
    return it->second;
  };
  auto positive_int = [&](const std::string& key) {
    auto [v, at] = require(key);
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e9) {
      fail(source, at, key + " must be a positive integer");
    }
    return static_cast<std::size_t>(v);
  };

  AsciiGrid grid;
  grid.geometry.ncols = positive_int("ncols");
  grid.geometry.nrows = positive_int("nrows");
  auto [cellsize, cell_line] = require("cellsize");
  if (!(cellsize > 0.0) || !std::isfinite(cellsize)) {
    fail(source, cell_line, "cellsize must be positive");
  }
  grid.geometry.cellsize = cellsize;
  auto origin = [&](const std::string& corner, const std::string& centre) {
    if (header.contains(corner)) {
      return header[corner].first;
    }
    if (header.contains(centre)) {
      return header[centre].first - 0.5 * cellsize;
    }
    fail(source, line_no, "missing header key '" + corner + "'");
  };
  grid.geometry.x_origin = origin("xllcorner", "xllcenter");
  grid.geometry.y_origin = origin("yllcorner", "yllcenter");
  std::optional<double> nodata_value;
  if (header.contains("nodata_value")) {
    nodata_value = header["nodata_value"].first;
  }

  const std::size_t nrows = grid.geometry.nrows;
  const std::size_t ncols = grid.geometry.ncols;
  const std::size_t expected = nrows * ncols;
  std::vector<double> file_order;
  file_order.reserve(expected);
  std::vector<std::uint8_t> file_nodata;
  file_nodata.reserve(expected);

  auto consume = [&](const std::vector<std::string>& tokens, std::size_t at) {
    for (const auto& tok : tokens) {
      auto v = to_double(tok);
      if (!v) {
        fail(source, at, "value '" + tok + "' is not a number");
      }
      if (file_order.size() == expected) {
        fail(source, at, "more than nrows x ncols = " + std::to_string(expected) + " values");
      }
      bool missing = (nodata_value && *v == *nodata_value) || std::isnan(*v);
      if (!missing && !std::isfinite(*v)) {
        fail(source, at, "value '" + tok + "' is not finite");
      }
      file_order.push_back(missing ? 0.0 : *v);
      file_nodata.push_back(missing ? 1 : 0);
    }
  };
  if (!pending.empty()) {
    consume(pending, pending_line);
  }
  while (std::getline(in, line)) {
    ++line_no;
    consume(split_ws(line), line_no);
  }
  if (file_order.size() != expected) {
    fail(source, line_no,
         "expected nrows x ncols = " + std::to_string(expected) + " values, found " +
           std::to_string(file_order.size()));
  }

  // the file lists the northern row first
  grid.values.resize(expected);
  grid.nodata.resize(expected);
  for (std::size_t fr = 0; fr < nrows; ++fr) {
    std::size_t row = nrows - 1 - fr;
    for (std::size_t c = 0; c < ncols; ++c) {
      grid.values[row * ncols + c] = file_order[fr * ncols + c];
      grid.nodata[row * ncols + c] = file_nodata[fr * ncols + c];
    }
  }
  return grid;
}

AsciiGrid read_ascii_grid(const std::filesystem::path& path)
{
  auto in = open_input(path);
  return parse_ascii_grid(in, path.string());
}

CovariateGrid read_covariate(const std::filesystem::path& path)
{
  AsciiGrid g = read_ascii_grid(path);
  if (std::all_of(g.nodata.begin(), g.nodata.end(), [](auto f) { return f != 0; })) {
    throw InputError(path.string() + ": every covariate cell is nodata");
  }
  return CovariateGrid(g.geometry, std::move(g.values), std::move(g.nodata));
}

RasterMask read_mask(const std::filesystem::path& path)
{
  AsciiGrid g = read_ascii_grid(path);
  RasterMask mask{ g.geometry, std::vector<std::uint8_t>(g.values.size(), 0) };
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    if (g.nodata[i]) {
      continue;
    }
    if (g.values[i] != 0.0 && g.values[i] != 1.0) {
      throw InputError(path.string() + ": mask values must be 0 or 1");
    }
    mask.inside[i] = g.values[i] == 1.0 ? 1 : 0;
  }
  return mask;
}

std::string format_double(double v)
{
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) {
    throw NumericError("cannot format number");
  }
  return std::string(buf.data(), ptr);
}

void write_surface(std::ostream& out, const Mesh& mesh, std::span<const double> values)
{
  if (values.size() != mesh.size()) {
    throw InputError("surface size does not match the mesh");
  }
  constexpr double nodata = -9999.0;
  out << "ncols " << mesh.nx() << "\n";
  out << "nrows " << mesh.ny() << "\n";
  out << "xllcorner " << format_double(mesh.window().xmin()) << "\n";
  out << "yllcorner " << format_double(mesh.window().ymin()) << "\n";
  if (std::abs(mesh.dx() - mesh.dy()) <= 1e-12 * std::max(mesh.dx(), mesh.dy())) {
    out << "cellsize " << format_double(mesh.dx()) << "\n";
  } else {
    out << "dx " << format_double(mesh.dx()) << "\n";
    out << "dy " << format_double(mesh.dy()) << "\n";
  }
  out << "NODATA_value " << format_double(nodata) << "\n";
  for (std::size_t fr = 0; fr < mesh.ny(); ++fr) {
    std::size_t row = mesh.ny() - 1 - fr;
    for (std::size_t c = 0; c < mesh.nx(); ++c) {
      std::size_t cell = mesh.index(row, c);
      if (c > 0) {
        out << ' ';
      }
      out << format_double(mesh.inside(cell) ? values[cell] : nodata);
    }
    out << "\n";
  }
}

void write_surface(const std::filesystem::path& path, const Mesh& mesh, std::span<const double> values)
{
  std::ostringstream ss;
  write_surface(ss, mesh, values);
  write_text(path, ss.str());
}

std::vector<Point> parse_pattern_csv(std::istream& in, const std::string& source)
{
  std::vector<Point> points;
  std::string raw;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, raw)) {
    ++line_no;
    if (line_no == 1 && raw.starts_with("\xEF\xBB\xBF")) {
      raw.erase(0, 3);
    }
    std::string line = trim(raw);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      fail(source, line_no, "expected two comma-separated fields");
    }
    std::string a = trim(std::string_view(line).substr(0, comma));
    std::string b = trim(std::string_view(line).substr(comma + 1));
    if (!header_seen) {
      if (lower(a) != "x" || lower(b) != "y") {
        fail(source, line_no, "expected header 'x,y'");
      }
      header_seen = true;
      continue;
    }
    auto x = to_double(a);
    auto y = to_double(b);
    if (!x || !y || !std::isfinite(*x) || !std::isfinite(*y)) {
      fail(source, line_no, "coordinates must be finite numbers");
    }
    points.push_back({ *x, *y });
  }
  if (!header_seen) {
    fail(source, line_no, "missing header 'x,y'");
  }
  return points;
}

std::vector<Point> read_pattern_csv(const std::filesystem::path& path)
{
  auto in = open_input(path);
  return parse_pattern_csv(in, path.string());
}

void write_pattern_csv(std::ostream& out, std::span<const Point> points)
{
  out << "x,y\n";
  for (const Point& p : points) {
    out << format_double(p.x) << ',' << format_double(p.y) << '\n';
  }
}

void write_pattern_csv(const std::filesystem::path& path, std::span<const Point> points)
{
  std::ostringstream ss;
  write_pattern_csv(ss, points);
  write_text(path, ss.str());
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot write '" + path.string() + "'");
  }
  out << text;
  if (!out) {
    throw InputError("failed writing '" + path.string() + "'");
  }
}

} // namespace ppcov::io
