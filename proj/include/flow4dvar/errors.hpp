#pragma once

#include <stdexcept>
#include <string>

namespace flow4dvar {

// Error taxonomy mirrored by the CLI exit codes: parse/validation/config -> 2,
// solver failures -> 3.

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised by Newton / linear solves; carries the last residual in the message.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violated call contract (dimension mismatch, off-grid time, ...).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace flow4dvar
