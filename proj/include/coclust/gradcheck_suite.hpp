#pragma once

#include <string>
#include <vector>

#include "coclust/gradcheck.hpp"

namespace coclust {

struct SuiteCheck {
  std::string name;
  GradCheckReport report;
};

/// Seeded gradient checks on instances with at most 8 nodes, 4 hyperedges
/// and K = 3. module is "transformer", "cluster", "align" or "all"; "all"
/// adds the primitive ops and the full joint objective.
std::vector<SuiteCheck> run_gradcheck_suite(const std::string& module,
                                            const GradCheckOptions& options = {});

}  // namespace coclust
