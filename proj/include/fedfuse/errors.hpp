#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fedfuse {

/// Invalid specs, options, or file-level configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dimension or layout mismatch between tensors, specs, and inputs.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad dataset content (empty, out-of-range labels, ...).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Violation of the federation round protocol (empty update list, ...).
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid mass assignment or incompatible evidence.
struct EvidenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Text or binary input that does not match its grammar; carries the line.
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t line_number)
      : std::runtime_error("line " + std::to_string(line_number) + ": " + msg),
        line(line_number) {}
  explicit ParseError(const std::string& msg)
      : std::runtime_error(msg), line(0) {}
  std::size_t line;
};

/// Training produced a non-finite loss.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& msg, std::size_t epoch_index)
      : std::runtime_error("epoch " + std::to_string(epoch_index) + ": " + msg),
        epoch(epoch_index) {}
  std::size_t epoch;
};

/// Dempster combination with conflict K ~ 1; normalization is undefined.
struct TotalConflictError : std::runtime_error {
  TotalConflictError(const std::string& msg, std::size_t step_index)
      : std::runtime_error("combination step " + std::to_string(step_index) +
                           ": " + msg),
        step(step_index) {}
  std::size_t step;
};

/// A federation round aborted; carries the client that caused it.
struct RoundError : std::runtime_error {
  RoundError(const std::string& msg, std::uint32_t client)
      : std::runtime_error("client " + std::to_string(client) + ": " + msg),
        client_id(client) {}
  std::uint32_t client_id;
};

}  // namespace fedfuse
