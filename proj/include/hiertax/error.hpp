#pragma once

#include <stdexcept>
#include <string>

namespace hiertax {

// Input that is syntactically or structurally invalid (bad code, bad row, bad
// record). The CLI maps these to exit status 1.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Taxonomy loading failure; the message names the offending row.
class LoadError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Lookup of a label code that is not in the taxonomy.
class UnknownCodeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// A scorer answered, but the answer violates the scoring contract.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A remote scorer could not be reached after the configured retries.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative solver hit its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hiertax
