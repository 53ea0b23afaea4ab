#pragma once

#include <stdexcept>
#include <string>

namespace sdepth {

// Shape or size violation at an op boundary.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf rejected at a public op boundary.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Recurrent state used with the wrong session/resolution.
struct StateError : std::runtime_error {
  explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Degenerate input to a metric (empty mask, zero-variance prediction, ...).
struct MetricError : std::runtime_error {
  explicit MetricError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct BadMagicError : IoError {
  explicit BadMagicError(const std::string& msg) : IoError(msg) {}
};

struct VersionError : IoError {
  explicit VersionError(const std::string& msg) : IoError(msg) {}
};

struct TruncationError : IoError {
  explicit TruncationError(const std::string& msg) : IoError(msg) {}
};

struct TrainError : std::runtime_error {
  explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sdepth
