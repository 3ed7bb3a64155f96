#include "catch_amalgamated.hpp"

#include "ppcov/cli.hpp"
#include "ppcov/errors.hpp"
#include "ppcov/io.hpp"
#include "ppcov/rng.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ppcov;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

struct TempDir
{
  fs::path path;
  TempDir()
  {
    static int counter = 0;
    path = fs::temp_directory_path() / ("ppcov_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text)
{
  std::ofstream(path, std::ios::binary) << text;
}

struct Outcome
{
  int code;
  std::string out;
  std::string err;
};

Outcome ppcov_run(std::vector<std::string> args)
{
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return { code, out.str(), err.str() };
}

//! Synthetic null data set: covariate raster and one pattern.
void make_dataset(const TempDir& dir)
{
  auto r = ppcov_run({ "simulate", "--m", "60", "--seed", "3", "--raster-cells", "32", "--grid-cells", "32",
                       "--out", dir / "p.csv", "--covariate-out", dir / "z.asc" });
  REQUIRE(r.code == 0);
}

} // namespace

TEST_CASE("ascii grid parsing", "[io]")
{
  std::istringstream in("ncols 3\nnrows 2\nxllcorner 10\nyllcorner 20\ncellsize 0.5\nNODATA_value -9999\n"
                        "1 2 3\n4 -9999 6\n");
  auto g = io::parse_ascii_grid(in, "grid");
  CHECK(g.geometry.ncols == 3);
  CHECK(g.geometry.nrows == 2);
  CHECK(g.geometry.x_origin == 10.0);
  CHECK(g.geometry.cellsize == 0.5);
  // row 0 is the southern row, the last one in the file
  CHECK(g.values[g.geometry.index(0, 0)] == 4.0);
  CHECK(g.nodata[g.geometry.index(0, 1)] == 1);
  CHECK(g.values[g.geometry.index(1, 2)] == 3.0);

  std::istringstream centre("ncols 1\nnrows 1\nxllcenter 1\nyllcenter 1\ncellsize 2\n7\n");
  auto c = io::parse_ascii_grid(centre, "c");
  CHECK(c.geometry.x_origin == 0.0);
}

TEST_CASE("ascii grid errors carry line numbers", "[io]")
{
  auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      io::parse_ascii_grid(in, "bad.asc");
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 x\n") ==
        "bad.asc:6: value 'x' is not a number");
  CHECK(message("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3\n").starts_with("bad.asc:7:"));
  CHECK(message("ncols two\n").starts_with("bad.asc:1:"));
  CHECK(message("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize -1\n1 2\n").starts_with("bad.asc:5:"));
  CHECK(message("ncols 2\nnrows 1\nxllcorner 0\ncellsize 1\n1 2\n").find("yllcorner") != std::string::npos);
}

TEST_CASE("pattern csv round trip is exact", "[io]")
{
  StreamRng rng(12);
  std::vector<Point> pts;
  for (int i = 0; i < 500; ++i) {
    pts.push_back({ rng.uniform() * 1e3 - 500.0, rng.uniform() * 1e-7 });
  }
  std::stringstream ss;
  io::write_pattern_csv(ss, pts);
  auto back = io::parse_pattern_csv(ss, "mem");
  REQUIRE(back.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(back[i].x == pts[i].x);
    CHECK(back[i].y == pts[i].y);
  }
}

TEST_CASE("pattern csv errors", "[io]")
{
  auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      io::parse_pattern_csv(in, "p.csv");
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("x,y\n0.1,0.2\n0.3;0.4\n") == "p.csv:3: expected two comma-separated fields");
  CHECK(message("a,b\n").starts_with("p.csv:1:"));
  CHECK(message("# comment\nx,y\n0.1,abc\n").starts_with("p.csv:3:"));
  CHECK(message("").find("header") != std::string::npos);

  std::istringstream ok("# config: {}\nx, y\n\n0.5 , 0.25\n");
  auto pts = io::parse_pattern_csv(ok, "ok");
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].y == 0.25);
}

TEST_CASE("pilot range arithmetic", "[cli]")
{
  auto t = cli::parse_pilot_range("0.3:0.7:0.05");
  REQUIRE(t.size() == 9);
  CHECK(t.front() == 0.3);
  CHECK(t[1] == 0.35);
  CHECK(t.back() == 0.7);
  CHECK(cli::parse_pilot_range("0.25").size() == 1);
  CHECK_THROWS_AS(cli::parse_pilot_range("0.7:0.3:0.05"), InputError);
  CHECK_THROWS_AS(cli::parse_pilot_range("0.3:0.7"), InputError);
  CHECK_THROWS_AS(cli::parse_pilot_range("-1"), InputError);
}

TEST_CASE("test subcommand output", "[cli]")
{
  TempDir dir;
  make_dataset(dir);
  std::vector<std::string> base{ "test", "--pattern", dir / "p.csv", "--covariate", dir / "z.asc",
                                 "--grid-cells", "32", "--B", "19", "--seed", "42" };

  auto first = base;
  first.insert(first.end(), { "--out", dir / "a.json" });
  auto second = base;
  second.insert(second.end(), { "--out", dir / "b.json", "--jobs", "3" });
  REQUIRE(ppcov_run(first).code == 0);
  REQUIRE(ppcov_run(second).code == 0);
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));

  auto j = nlohmann::json::parse(slurp(dir / "a.json"));
  CHECK(j["B"] == 19);
  CHECK(j["seed"] == 42);
  CHECK(j["p_value"].get<double>() >= 1.0 / 20.0);
  CHECK(j["H"].size() == 3);
  CHECK(j.contains("config"));
  CHECK(j["config"]["covariate"] == dir / "z.asc");

  auto scan = base;
  scan.insert(scan.end(), { "--pilot-t", "0.3:0.7:0.05", "--out", dir / "scan.json" });
  REQUIRE(ppcov_run(scan).code == 0);
  auto s = nlohmann::json::parse(slurp(dir / "scan.json"));
  REQUIRE(s["p_value"].is_array());
  CHECK(s["p_value"].size() == 9);
  CHECK(s["p_value"][8]["t"] == 0.7);
}

TEST_CASE("seed precedence", "[cli]")
{
  TempDir dir;
  make_dataset(dir);
  std::vector<std::string> args{ "test", "--pattern", dir / "p.csv", "--covariate", dir / "z.asc",
                                 "--grid-cells", "16", "--B", "3" };
  ::setenv("PPCOV_SEED", "1234", 1);
  auto env = ppcov_run(args);
  auto flagged = args;
  flagged.insert(flagged.end(), { "--seed", "7" });
  auto explicit_flag = ppcov_run(flagged);
  ::unsetenv("PPCOV_SEED");
  auto fallback = ppcov_run(args);
  REQUIRE(env.code == 0);
  CHECK(nlohmann::json::parse(env.out)["seed"] == 1234);
  CHECK(nlohmann::json::parse(explicit_flag.out)["seed"] == 7);
  CHECK(nlohmann::json::parse(fallback.out)["seed"] == 42);
}

TEST_CASE("exit codes", "[cli]")
{
  TempDir dir;
  make_dataset(dir);
  auto missing = ppcov_run({ "test", "--pattern", dir / "p.csv", "--covariate", dir / "nope.asc" });
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.asc") != std::string::npos);

  spit(dir / "bad.csv", "x,y\n0.1,0.2\n0.3,zz\n");
  auto bad = ppcov_run({ "test", "--pattern", dir / "bad.csv", "--covariate", dir / "z.asc" });
  CHECK(bad.code == 2);
  CHECK(bad.err.find("bad.csv:3:") != std::string::npos);

  spit(dir / "bad.asc", "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 0.5\n1 2\n3 oops\n");
  auto bad_grid = ppcov_run({ "test", "--pattern", dir / "p.csv", "--covariate", dir / "bad.asc" });
  CHECK(bad_grid.code == 2);
  CHECK(bad_grid.err.find("bad.asc:7:") != std::string::npos);

  spit(dir / "outside.csv", "x,y\n0.5,0.5\n3,3\n");
  CHECK(ppcov_run({ "test", "--pattern", dir / "outside.csv", "--covariate", dir / "z.asc" }).code == 2);

  spit(dir / "one.csv", "x,y\n0.5,0.5\n");
  CHECK(ppcov_run({ "test", "--pattern", dir / "one.csv", "--covariate", dir / "z.asc", "--B", "3" }).code == 3);

  spit(dir / "empty.csv", "x,y\n");
  CHECK(ppcov_run({ "test", "--pattern", dir / "empty.csv", "--covariate", dir / "z.asc" }).code == 2);

  CHECK(ppcov_run({ "test", "--pattern", dir / "p.csv", "--covariate", dir / "z.asc", "--H", "1,2" }).code == 2);
  CHECK(ppcov_run({ "frobnicate" }).code == 2);
  CHECK(ppcov_run({}).code == 2);
}

TEST_CASE("fit and bandwidth subcommands", "[cli]")
{
  TempDir dir;
  make_dataset(dir);
  auto fit = ppcov_run({ "fit", "--pattern", dir / "p.csv", "--covariate", dir / "z.asc", "--grid-cells", "32",
                         "--out", dir / "fit" });
  REQUIRE(fit.code == 0);
  auto spatial = io::read_ascii_grid(dir / "fit.spatial.asc");
  CHECK(spatial.geometry.ncols == 32);
  auto meta = nlohmann::json::parse(slurp(dir / "fit.json"));
  CHECK(meta["T"].get<double>() >= 0.0);
  CHECK(meta["n"].get<int>() > 0);
  CHECK(fs::exists(dir / "fit.covariate.asc"));

  auto bw = ppcov_run({ "bandwidth", "--pattern", dir / "p.csv", "--covariate", dir / "z.asc" });
  REQUIRE(bw.code == 0);
  auto j = nlohmann::json::parse(bw.out);
  CHECK(j["H"][1] == 0.0);
  CHECK(j["b"].get<double>() > 0.0);

  // empty pattern with fixed bandwidths gives flagged zero surfaces
  spit(dir / "empty.csv", "x,y\n");
  auto empty = ppcov_run({ "fit", "--pattern", dir / "empty.csv", "--covariate", dir / "z.asc", "--H", "0.01,0,0.01",
                           "--b", "0.1", "--grid-cells", "16", "--out", dir / "e" });
  REQUIRE(empty.code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "e.json"))["empty_pattern"] == true);
}

TEST_CASE("power subcommand", "[cli]")
{
  TempDir dir;
  spit(dir / "study.toml", R"(
[model]
preset = "synthetic"
raster_cells = 32
grid_cells = 16

[band]
kind = "general"
center = [0.5, 0.5]
direction = [1.0, -1.0]

[study]
d = [0.1, "inf"]
m = [30, 60]
R = 4
B = 9
alpha = 0.5
seed = 11
)");
  auto a = ppcov_run({ "power", "--config", dir / "study.toml", "--out", dir / "a.csv" });
  REQUIRE(a.code == 0);
  auto b = ppcov_run({ "power", "--config", dir / "study.toml", "--out", dir / "b.csv", "--jobs", "2" });
  REQUIRE(b.code == 0);
  std::string table = slurp(dir / "a.csv");
  CHECK(table == slurp(dir / "b.csv"));
  CHECK(table.find("\nm,0.1,inf\n") != std::string::npos);
  CHECK(table.starts_with("# config: "));
  CHECK(table.find("\"seed\":11") != std::string::npos);

  spit(dir / "broken.toml", "[study]\nd = [0.1,\nm = ");
  auto broken = ppcov_run({ "power", "--config", dir / "broken.toml" });
  CHECK(broken.code == 2);
  CHECK(broken.err.find("broken.toml:") != std::string::npos);

  spit(dir / "neg.toml", "[study]\nd = [-0.1]\nm = [10]\n");
  auto neg = ppcov_run({ "power", "--config", dir / "neg.toml" });
  CHECK(neg.code == 2);
  CHECK(neg.err.find("neg.toml:2:") != std::string::npos);
}

TEST_CASE("simulate writes numbered patterns with their configuration", "[cli]")
{
  TempDir dir;
  auto r = ppcov_run({ "simulate", "--m", "20", "--count", "3", "--band-kind", "general", "--band-d", "0.1",
                       "--raster-cells", "16", "--grid-cells", "16", "--out", dir / "s.csv" });
  REQUIRE(r.code == 0);
  for (const char* name : { "s_0.csv", "s_1.csv", "s_2.csv" }) {
    std::string text = slurp(dir / name);
    CHECK(text.starts_with("# config: "));
    std::istringstream in(text);
    CHECK_NOTHROW(io::parse_pattern_csv(in, name));
  }
  CHECK(ppcov_run({ "simulate", "--band-kind", "general", "--out", dir / "x.csv" }).code == 2);
}
