#pragma once

#include <string>

namespace fluctuant {

// Outcome of one gate criterion. `detail` is a one-line summary of the
// measured values behind the verdict, suitable for a terminal.
struct CriterionOutcome {
  int index = 0;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

int criterion_count();

// Run gate criterion `index` (1-based). Criteria delegate to the experiment
// drivers with their calibrated defaults, writing artifacts under
// out/acceptance/; the incremental-exactness criterion runs its own
// event-by-event shadow comparison. Throws on config errors only; a failed
// check returns pass = false.
CriterionOutcome run_criterion(int index);

}  // namespace fluctuant
