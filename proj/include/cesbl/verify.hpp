#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cesbl {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Fast self-contained invariant and oracle checks over every module; each
// entry is independent and deterministic in the seed.
std::vector<CheckResult> run_verify_suite(std::uint64_t seed);

}  // namespace cesbl
