#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace f2f {

// One verification check. criterion groups related checks (1-9) so reports
// can aggregate; name and detail carry the measured evidence either way.
struct CheckResult {
  int criterion = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyOptions {
  // Added to one analytic convolution-kernel gradient before the
  // finite-difference comparison. The negative control: any nonzero value
  // must make the gradient check fail and name the poisoned parameter.
  double grad_fault = 0.0;
  std::ostream* log = nullptr;  // per-check progress lines, human-readable
};

// Valid suites: fft, stft, grad, anova, e2e, all. Throws ConfigError on an
// unknown suite name; individual check failures are reported, not thrown.
std::vector<CheckResult> run_suite(const std::string& suite,
                                   const VerifyOptions& opts = {});

bool all_passed(const std::vector<CheckResult>& results);

nlohmann::json results_to_json(const std::string& suite,
                               const std::vector<CheckResult>& results);

}  // namespace f2f
