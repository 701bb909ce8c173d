#pragma once

#include <stdexcept>
#include <string>

namespace vnegnn {

// Error taxonomy shared across the library. Each subtype maps onto a CLI
// exit code (see tools/vnegnn.cpp): input 2, parse 3, checkpoint 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Matrix shapes do not line up (e.g. MLP input width vs. first layer).
struct DimensionError : Error {
  using Error::Error;
};

// A caller violated an API contract (non-scalar loss, missing parameter, ...).
struct ContractError : Error {
  using Error::Error;
};

// Invalid configuration value (non-positive learning rate, unknown key, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Invalid argument to a pure function (k = 0 grid, bad pocket count, ...).
struct ArgumentError : Error {
  using Error::Error;
};

// A structure with no usable content (no atoms, empty graph).
struct EmptyStructureError : Error {
  using Error::Error;
};

// Unparseable input text.
struct ParseError : Error {
  using Error::Error;
};

// Checkpoint file missing, corrupt, or incompatible with the model config.
struct CheckpointError : Error {
  using Error::Error;
};

// Non-finite values encountered during a forward pass.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace vnegnn
