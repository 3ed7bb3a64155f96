#pragma once

#include <stdexcept>
#include <string>

namespace ppcov {

/// Malformed or inconsistent input (files, flags, shapes). Maps to CLI exit code 2.
class InputError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A computation that cannot produce a meaningful number. Maps to CLI exit code 3.
class NumericError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace ppcov
