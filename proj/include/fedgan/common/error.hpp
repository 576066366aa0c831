#pragma once

#include <stdexcept>
#include <string>

namespace fedgan {

// Shape disagreement between two operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid static configuration (layer chain, hyperparameters, config files).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// API misuse such as a stale tape or an out-of-range argument.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A loss or objective produced a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing, duplicate or mismatched messages between federation nodes.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed files: datasets, checkpoints, wire messages.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fedgan
