#pragma once

#include <stdexcept>
#include <string>

namespace psmpc {

/// Base class for all library runtime errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Requested feature exists in the interface but has no backend support
/// (e.g. the full-shape set design, which needs a semidefinite solver).
struct NotSupportedError : Error {
  using Error::Error;
};

/// An operation that requires a nonempty set received an empty one.
struct EmptySetError : Error {
  using Error::Error;
};

/// An operation that requires a bounded set detected an unbounded one.
struct UnboundedSetError : Error {
  using Error::Error;
};

/// A shape matrix is singular or too ill-conditioned to invert.
struct SingularShapeError : Error {
  using Error::Error;
};

/// The scaling step selected an unusable factor (nonpositive or infinite).
struct ScalingError : Error {
  using Error::Error;
};

/// A multi-stage pipeline failed; `stage` names the stage that failed.
struct PipelineError : Error {
  PipelineError(std::string stage_, const std::string& what_)
      : Error("[" + stage_ + "] " + what_), stage(std::move(stage_)) {}
  std::string stage;
};

/// Configuration parsing or validation failure.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace psmpc
