#include "pevlm/costmodel.hpp"

#include <algorithm>
#include <stdexcept>

namespace pevlm {

namespace {

std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_mul_overflow(a, b, &r)) {
    throw std::overflow_error("operation count overflow");
  }
  return r;
}

std::uint64_t add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_add_overflow(a, b, &r)) {
    throw std::overflow_error("operation count overflow");
  }
  return r;
}

}  // namespace

std::uint64_t op_full(std::uint64_t total_tokens, std::uint64_t hidden) {
  return mul(mul(2, hidden), mul(total_tokens, total_tokens));
}

CostReport op_pevlm(const CostParams& p) {
  const std::uint64_t total = p.total_tokens();
  CostReport r;
  r.op_full = op_full(total, p.hidden);
  r.op_sink = mul(mul(2, p.hidden), mul(p.sink_tokens, p.sink_tokens));
  r.op_blocks = mul(p.num_blocks,
                    mul(mul(2, p.hidden),
                        mul(p.block_tokens, add(p.sink_tokens, p.block_tokens))));
  r.op_question = mul(mul(2, p.hidden), mul(p.question_tokens, total));
  r.op_pevlm = add(add(r.op_sink, r.op_blocks), r.op_question);
  r.predicted_speedup =
      r.op_pevlm == 0 ? 0.0
                      : static_cast<double>(r.op_full) /
                            static_cast<double>(r.op_pevlm);
  return r;
}

std::uint64_t op_pevlm_simplified(const CostParams& p) {
  const std::uint64_t s = p.sink_tokens;
  const std::uint64_t b = p.block_tokens;
  const std::uint64_t n = p.num_blocks;
  const std::uint64_t q = p.question_tokens;
  std::uint64_t sum = mul(s, s);
  sum = add(sum, mul(q, q));
  sum = add(sum, mul(n, mul(b, b)));
  sum = add(sum, mul(q, s));
  sum = add(sum, mul(n, mul(q, b)));
  sum = add(sum, mul(n, mul(s, b)));
  return mul(mul(2, p.hidden), sum);
}

std::uint64_t op_from_mask(const MaskSpec& mask, std::uint64_t hidden) {
  return mul(mul(2, hidden), mask.count_allowed());
}

MaskSpec counting_mask(const CostParams& p) {
  const std::uint64_t total = p.total_tokens();
  const std::size_t s = static_cast<std::size_t>(p.sink_tokens);
  const std::size_t b = static_cast<std::size_t>(p.block_tokens);
  const std::size_t n = static_cast<std::size_t>(p.num_blocks);
  const std::size_t q = static_cast<std::size_t>(p.question_tokens);
  const std::size_t L = static_cast<std::size_t>(total);

  MaskSpec mask(L, L);
  for (std::size_t r = 0; r < s; ++r) mask.set_range(r, 0, s);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t begin = s + i * b;
    for (std::size_t r = begin; r < begin + b; ++r) {
      mask.set_range(r, 0, s);
      mask.set_range(r, begin, begin + b);
    }
  }
  for (std::size_t r = L - q; r < L; ++r) mask.set_range(r, 0, L);
  return mask;
}

std::uint64_t op_pevlm_layout(const SequenceLayout& layout,
                              std::size_t sink_frames,
                              std::size_t block_frames, std::uint64_t hidden) {
  const BlockPartition part = partition(layout, sink_frames, block_frames);
  const std::uint64_t s = part.sink.size();
  const std::uint64_t q = part.question.size();
  const std::uint64_t total = layout.total();
  std::uint64_t sum = mul(mul(2, hidden), mul(s, s));
  for (const TokenRange& blk : part.context_blocks) {
    const std::uint64_t b = blk.size();
    sum = add(sum, mul(mul(2, hidden), mul(b, add(s, b))));
  }
  sum = add(sum, mul(mul(2, hidden), mul(q, total)));
  return sum;
}

std::vector<BudgetEntry> latency_budget_search(
    double budget_seconds, double throughput_ops_per_s,
    const SequenceLayout& layout, const std::vector<BudgetCandidate>& grid,
    std::uint64_t hidden) {
  if (!(budget_seconds > 0.0) || !(throughput_ops_per_s > 0.0)) {
    throw std::invalid_argument("budget and throughput must be > 0");
  }
  std::vector<BudgetEntry> entries;
  entries.reserve(grid.size());
  for (const BudgetCandidate& c : grid) {
    BudgetEntry e;
    e.sink_frames = c.sink_frames;
    e.block_frames = c.block_frames;
    e.ops = op_pevlm_layout(layout, c.sink_frames, c.block_frames, hidden);
    e.est_latency_s = static_cast<double>(e.ops) / throughput_ops_per_s;
    e.feasible = e.est_latency_s <= budget_seconds;
    entries.push_back(e);
  }
  // Larger sink, then larger blocks, is the accuracy proxy.
  std::stable_sort(entries.begin(), entries.end(),
                   [](const BudgetEntry& a, const BudgetEntry& b) {
                     if (a.feasible != b.feasible) return a.feasible;
                     if (a.sink_frames != b.sink_frames) {
                       return a.sink_frames > b.sink_frames;
                     }
                     return a.block_frames > b.block_frames;
                   });
  return entries;
}

}  // namespace pevlm
