#pragma once

#include <stdexcept>
#include <string>

namespace gscd {

// All library failures derive from Error so callers (the CLI in particular)
// can report the failing stage uniformly.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad magic, version, or layout of a binary file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed file whose values violate a type invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

// Text parse failure; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line);
  int line() const { return line_; }

 private:
  int line_;
};

// Caller violated a documented precondition (dimension mismatch etc).
class ContractError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// PCA on features without any variance.
class DegenerateAxisError : public Error {
 public:
  using Error::Error;
};

// Every view was skipped during multi-view voting.
class EmptyVoteError : public Error {
 public:
  using Error::Error;
};

class PlacementError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace gscd
