#pragma once

#include <string>
#include <vector>

#include "cgsim/scenario.hpp"

namespace cgsim {

struct ConformanceCheck {
  std::string row;
  bool pass = false;
  std::string detail;
};

/// One check per feature row: a scenario (or DCI) pair where the permitted
/// variant must validate and the out-of-profile variant must be rejected
/// naming that row.
std::vector<ConformanceCheck> run_conformance_matrix();

}  // namespace cgsim
