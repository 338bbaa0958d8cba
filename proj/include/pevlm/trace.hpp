#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pevlm/layout.hpp"
#include "pevlm/matrix.hpp"

namespace pevlm {

// Received-attention profile over key tokens, aggregated from the question
// phase: mean weight per key over question queries and heads, plus its
// trailing moving average.
struct AttnTrace {
  std::vector<double> mean_weight;
  std::vector<double> moving_avg;
  std::vector<std::string> segment;  // "sink" | "block<i>" | "question"
  std::size_t num_queries = 0;
  std::size_t window = 64;
  double total_mass = 0.0;  // sum of all captured weights; one per query row
};

// Trailing mean over a window of `w` samples (shorter at the start).
std::vector<double> moving_average(const std::vector<double>& raw,
                                   std::size_t window);

// weights: query rows x key tokens, head-averaged.
AttnTrace build_trace(const MatrixT<double>& weights,
                      const BlockPartition& part, std::size_t window);

}  // namespace pevlm
