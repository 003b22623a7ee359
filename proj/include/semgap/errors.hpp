#pragma once

#include <stdexcept>
#include <string>

namespace semgap {

// Base for all simulation-contract violations. Scenario runners translate
// these into exit status 1; ConfigError maps to exit status 2.
struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PastEventError : SimError {
  using SimError::SimError;
};
struct StageRegressionError : SimError {
  using SimError::SimError;
};
struct DuplicateStageError : SimError {
  using SimError::SimError;
};
struct UnregisteredRegionError : SimError {
  using SimError::SimError;
};
struct NotEightBytesError : SimError {
  using SimError::SimError;
};
struct MisalignedAtomicError : SimError {
  using SimError::SimError;
};
struct ReceiverNotReadyError : SimError {
  using SimError::SimError;
};
struct OutOfRangeError : SimError {
  using SimError::SimError;
};
struct TooLargeError : SimError {
  using SimError::SimError;
};
struct NothingMissingError : SimError {
  using SimError::SimError;
};
struct LinkBusyError : SimError {
  using SimError::SimError;
};
struct NotYetVisibleError : SimError {
  using SimError::SimError;
};
struct WrongStateError : SimError {
  using SimError::SimError;
};
struct ScenarioSuiteIncompleteError : SimError {
  using SimError::SimError;
};
struct MatrixMismatchError : SimError {
  using SimError::SimError;
};

// Config-file problems carry the offending line/key for diagnostics.
struct ConfigError : std::runtime_error {
  ConfigError(std::string message, int line_no, std::string key)
      : std::runtime_error(line_no > 0
                               ? "config line " + std::to_string(line_no) +
                                     (key.empty() ? "" : " (" + key + ")") +
                                     ": " + message
                               : message),
        line(line_no),
        key(std::move(key)) {}
  explicit ConfigError(std::string message)
      : ConfigError(std::move(message), 0, {}) {}

  int line = 0;
  std::string key;
};

}  // namespace semgap
