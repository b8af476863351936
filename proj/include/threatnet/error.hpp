#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace threatnet {

/// Base error for all library failures. `code` is a short machine-readable
/// tag (e.g. "io", "malformed_input", "config").
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Iterative solver stopped without meeting its tolerance.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& message, std::vector<double> last_iterate)
      : Error("non_convergence", message), last_(std::move(last_iterate)) {}

  const std::vector<double>& last_iterate() const noexcept { return last_; }

 private:
  std::vector<double> last_;
};

/// Collects non-fatal conditions (skipped lines, empty results, ...).
struct Diagnostics {
  std::vector<std::string> warnings;

  void warn(std::string message) { warnings.push_back(std::move(message)); }
};

inline void warn(Diagnostics* diag, std::string message) {
  if (diag) diag->warn(std::move(message));
}

}  // namespace threatnet
