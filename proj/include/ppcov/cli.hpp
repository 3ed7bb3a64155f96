#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ppcov::cli {

//! Exit codes of the command-line front end.
enum ExitCode : int
{
  ok = 0,
  unexpected = 1,
  input_error = 2,
  numeric_error = 3
};

//! Runs one invocation; `args` excludes the program name. Messages go to
//! `out` / `err`, artifacts to the paths named by the arguments.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

//! Values described by a scalar "t" or an inclusive range "start:stop:step".
std::vector<double> parse_pilot_range(const std::string& text);

} // namespace ppcov::cli
