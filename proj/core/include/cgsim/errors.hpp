#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cgsim {

/// Bad static configuration (layout does not fit, out-of-range parameter).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Closed-form input outside its stated domain.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A verified model assumption (e.g. monotonicity) failed at runtime.
struct ModelViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One scenario-validation failure. `table1_row` names the violated
/// conformance row ("group_release", "cg_uci", ...) when the check is
/// profile-gated, empty otherwise.
struct Violation {
  std::string field;
  std::string table1_row;
  std::string message;
};

struct ValidationError : std::runtime_error {
  std::vector<Violation> violations;

  explicit ValidationError(std::vector<Violation> v)
      : std::runtime_error(render(v)), violations(std::move(v)) {}

  static std::string render(const std::vector<Violation>& v) {
    std::string s = "scenario validation failed:";
    for (const auto& x : v) {
      s += "\n  " + x.field;
      if (!x.table1_row.empty()) s += " [" + x.table1_row + "]";
      s += ": " + x.message;
    }
    return s;
  }
};

}  // namespace cgsim
