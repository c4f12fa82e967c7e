#pragma once

#include <string>
#include <vector>

namespace spikemusic {

enum class VerifyLevel { fast, full };

/// One named invariant check with a human-readable measurement summary.
struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Runs the invariant battery. `fast` covers the deterministic analytic
/// identities (spectral anchors, closed-form cross-checks, steering and
/// Dirichlet limits) in well under five seconds. `full` appends the Monte
/// Carlo invariants (eigenvalue and subspace convergence, the variance
/// scaling law, and the resolvent fluctuation experiment); `workers` bounds
/// their concurrency. Every check is deterministic: seeds are fixed
/// constants, so repeated runs return identical results.
std::vector<CheckResult> run_verification(VerifyLevel level, int workers = 0);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace spikemusic
