#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pevlm/attention.hpp"
#include "pevlm/layout.hpp"
#include "pevlm/method.hpp"

namespace pevlm {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 42;
  bool float64 = false;
  // Flips one bit of the oracle mask inside the engine-vs-oracle check; the
  // suite must then fail on that check.
  bool inject_fault = false;
  std::size_t num_configs = 30;
};

// One randomized engine configuration for cross-checking against the dense
// oracle: covers every preset, both position modes and both rope schemes.
struct VerifyCase {
  SequenceLayout layout;
  MethodConfig config;
  HeadLayout heads;
  std::size_t layers = 1;
  std::uint64_t state_seed = 0;
};

// Forces specific axes of the generated case; -1 leaves the axis random.
// `large` stretches the layout toward the ~400-token range.
struct CaseShape {
  int preset = -1;         // Preset enum value
  int scheme = -1;         // 0 = rope1d, 1 = mrope3d
  int position_mode = -1;  // 0 = sequential, 1 = reused
  bool large = false;
};

VerifyCase random_case(std::mt19937_64& rng, const CaseShape& shape = {});

// Engine prefill vs dense masked oracle; returns the max abs output
// difference across layers. `fault` flips one mask bit first.
double engine_oracle_diff32(const VerifyCase& c, bool fault = false);
double engine_oracle_diff64(const VerifyCase& c, bool fault = false);

std::vector<CheckResult> run_verification(const VerifyOptions& opts);

}  // namespace pevlm
