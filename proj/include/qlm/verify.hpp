#pragma once
#include <string>
#include <vector>

namespace qlm {

// Cross-module identity suite: every analytic identity the pipeline relies on
// is re-evaluated end to end and compared against a pinned threshold.
//
// Suites: mean1, mean2, lichnerowicz, dirac, spin, chirality, gauss_bonnet,
// constraints, or "all".  Unknown names raise ConfigError.

struct IdentityCheck {
  std::string name;
  double residual = 0;
  double threshold = 0;
  bool pass = false;
};

struct IdentitySuiteReport {
  int L = 0;
  std::vector<IdentityCheck> checks;
  bool all_pass = false;
};

IdentitySuiteReport verify_identities(const std::string& suite, int L,
                                      unsigned seed = 0);
std::string identity_report_json(const IdentitySuiteReport& r);

}  // namespace qlm
