#pragma once

#include <stdexcept>
#include <string>

namespace apvio {

/// Gram-Schmidt input too close to rank-deficient, or a geometric
/// construction (triangulation baseline, ...) collapsed.
struct DegenerateInput : std::runtime_error {
  explicit DegenerateInput(const std::string& what) : std::runtime_error(what) {}
};

/// Rotation sample set has no unique chordal mean (SVD projection degenerate).
struct SingularAggregate : std::runtime_error {
  explicit SingularAggregate(const std::string& what) : std::runtime_error(what) {}
};

/// Measurement stream timestamps are not strictly increasing.
struct NonMonotonicTime : std::runtime_error {
  explicit NonMonotonicTime(const std::string& what) : std::runtime_error(what) {}
};

/// Query outside the valid domain (e.g. trajectory time outside duration).
struct OutOfRange : std::out_of_range {
  explicit OutOfRange(const std::string& what) : std::out_of_range(what) {}
};

/// No (or too few) estimate/ground-truth pairs associate by timestamp.
struct EmptyAssociation : std::runtime_error {
  explicit EmptyAssociation(const std::string& what) : std::runtime_error(what) {}
};

/// Scenario / run configuration could not be parsed or is inconsistent.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Requested scenario file does not exist.
struct ScenarioNotFound : std::runtime_error {
  explicit ScenarioNotFound(const std::string& what) : std::runtime_error(what) {}
};

/// Backend optimization failed irrecoverably.
struct SolverFailure : std::runtime_error {
  explicit SolverFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace apvio
