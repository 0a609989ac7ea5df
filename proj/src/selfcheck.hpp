#pragma once

// Small numerical checks that can run without any dataset: derivative
// products against central differences, the adjoint gradient against
// differences of the solver output, and the AMD identity fixture.

#include <cstdint>
#include <string>
#include <vector>

namespace gfe {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<CheckResult> run_self_checks(std::uint64_t seed);

}  // namespace gfe
