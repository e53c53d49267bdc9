// Property suites behind the `verify` CLI subcommand.
#pragma once

#include <string>
#include <vector>

namespace plapflow {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// suite in { oracles, semigroup, decay, extinction, all }.
std::vector<CheckResult> run_verify_suite(const std::string& suite);

}  // namespace plapflow
