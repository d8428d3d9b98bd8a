#pragma once

#include <stdexcept>
#include <string>

namespace gridtopo {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input (edge lists, CSV, config files).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A graph that is not a valid radial tree.
class StructureError : public Error {
 public:
  using Error::Error;
};

// Arguments that violate an operation's preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Input too large for an exhaustive procedure.
class CapacityError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridtopo
