#pragma once

#include <stdexcept>
#include <string>

namespace pc {

// Shape mismatch between tensor operands.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Index (token id, table slot, class id) outside its valid range.
struct IndexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration value (rate, table size, iteration counts).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf where finite values are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or empty input data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse (non-scalar loss, bad handle).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// I/O failure (file open/read/write).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
  enum class Kind { BadMagic, BadVersion, Truncated, Corrupt };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg)
      : std::runtime_error(msg), kind(k) {}
};

}  // namespace pc
