#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace taskfactor {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input: bad files, bad ids, violated preconditions.
/// The CLI maps this to exit code 1.
class InputError : public Error {
public:
  using Error::Error;
};

/// A numerical procedure could not produce a meaningful result.
/// The CLI maps this to exit code 2.
class NumericError : public Error {
public:
  using Error::Error;
};

using Warnings = std::vector<std::string>;

void append_warnings(Warnings& into, const Warnings& from);

} // namespace taskfactor
