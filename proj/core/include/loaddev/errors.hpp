#pragma once

#include <stdexcept>
#include <string>

namespace loaddev {

/// Bad input: malformed files, schema violations, infeasible configurations.
/// The command line tool maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Failure while computing on otherwise well-formed input (non-convergence,
/// degenerate intermediate state).  Mapped to exit code 2 by the tool.
class ComputationError : public std::runtime_error {
 public:
  explicit ComputationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace loaddev
