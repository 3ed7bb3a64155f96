#pragma once

#include "ppcov/estimators.hpp"
#include "ppcov/geometry.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ppcov::io {

//! Parsed ESRI ASCII grid. Rows are stored south first.
struct AsciiGrid
{
  RasterGeometry geometry;
  std::vector<double> values;
  std::vector<std::uint8_t> nodata;
};

//! Parses an ESRI ASCII grid (ncols, nrows, xllcorner|xllcenter,
//! yllcorner|yllcenter, cellsize, optional NODATA_value, then nrows lines of
//! ncols values, northern row first). Errors are InputError messages of the
//! form "<source>:<line>: ...".
AsciiGrid parse_ascii_grid(std::istream& in, const std::string& source);
AsciiGrid read_ascii_grid(const std::filesystem::path& path);

CovariateGrid read_covariate(const std::filesystem::path& path);
//! 0/1 raster; nodata cells are outside.
RasterMask read_mask(const std::filesystem::path& path);

//! Writes a mesh surface as an ESRI ASCII grid; cells outside W are nodata.
//! Non-square mesh cells are written with separate dx / dy header keys.
void write_surface(std::ostream& out, const Mesh& mesh, std::span<const double> values);
void write_surface(const std::filesystem::path& path, const Mesh& mesh, std::span<const double> values);

//! CSV with header "x,y". Lines starting with '#' and blank lines are skipped.
std::vector<Point> parse_pattern_csv(std::istream& in, const std::string& source);
std::vector<Point> read_pattern_csv(const std::filesystem::path& path);

void write_pattern_csv(std::ostream& out, std::span<const Point> points);
void write_pattern_csv(const std::filesystem::path& path, std::span<const Point> points);

//! Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

//! Writes text, throwing InputError when the file cannot be written.
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace ppcov::io
