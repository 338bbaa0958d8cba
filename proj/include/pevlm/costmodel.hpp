#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pevlm/layout.hpp"
#include "pevlm/mask.hpp"

namespace pevlm {

// Token counts for the analytic operation model. L = S + N*B + Q.
struct CostParams {
  std::uint64_t sink_tokens = 0;      // S
  std::uint64_t block_tokens = 0;     // B
  std::uint64_t num_blocks = 0;       // N
  std::uint64_t question_tokens = 0;  // Q
  std::uint64_t hidden = 1;           // H

  std::uint64_t total_tokens() const {
    return sink_tokens + num_blocks * block_tokens + question_tokens;
  }
};

struct CostReport {
  std::uint64_t op_full = 0;
  std::uint64_t op_sink = 0;
  std::uint64_t op_blocks = 0;
  std::uint64_t op_question = 0;
  std::uint64_t op_pevlm = 0;
  double predicted_speedup = 0.0;
};

// 2*H*L^2, exact; throws std::overflow_error when the count exceeds 64 bits.
std::uint64_t op_full(std::uint64_t total_tokens, std::uint64_t hidden);

// Part-wise block-attention count: 2HS^2 + N*2HB(S+B) + 2HQL.
CostReport op_pevlm(const CostParams& params);

// The same count through the expanded polynomial
// 2H(S^2 + Q^2 + N B^2 + QS + NQB + NSB); must equal the part sum exactly.
std::uint64_t op_pevlm_simplified(const CostParams& params);

// 2*H*(allowed pairs): the mask-derived oracle for the formulas above.
std::uint64_t op_from_mask(const MaskSpec& mask, std::uint64_t hidden);

// Block-attention mask under the operation-counting convention: attention
// within a segment is counted as all-pairs, not causal, so that a single
// full block reproduces op_full's L^2 exactly.
MaskSpec counting_mask(const CostParams& params);

// Exact count for a concrete frame layout, summing per-block terms so that
// a remainder block (shorter than block_frames) is charged its true size.
std::uint64_t op_pevlm_layout(const SequenceLayout& layout,
                              std::size_t sink_frames,
                              std::size_t block_frames, std::uint64_t hidden);

struct BudgetCandidate {
  std::size_t sink_frames = 0;
  std::size_t block_frames = 1;
};

struct BudgetEntry {
  std::size_t sink_frames = 0;
  std::size_t block_frames = 1;
  std::uint64_t ops = 0;
  double est_latency_s = 0.0;
  bool feasible = false;
};

// Ranks candidate (sink_frames, block_frames) configurations under a latency
// budget. Feasible entries come first, ordered by descending
// (sink_frames, block_frames) as the accuracy proxy; infeasible entries
// follow in the same order.
std::vector<BudgetEntry> latency_budget_search(
    double budget_seconds, double throughput_ops_per_s,
    const SequenceLayout& layout, const std::vector<BudgetCandidate>& grid,
    std::uint64_t hidden);

}  // namespace pevlm
