#include <doctest.h>

#include "pevlm/costmodel.hpp"

using namespace pevlm;

TEST_CASE("op_full: direct substitution") {
  CHECK(op_full(16, 64) == 32768);
  CHECK(op_full(0, 3584) == 0);
  CHECK(op_full(100000, 3584) == 71680000000000ULL);
}

TEST_CASE("op_full: overflow is detected") {
  CHECK_THROWS_AS(op_full(4000000000ULL, 1), std::overflow_error);
  CHECK_THROWS_AS(op_full(100000, 1000000000000ULL), std::overflow_error);
}

TEST_CASE("op_pevlm: small worked example") {
  CostParams p{4, 4, 2, 4, 1};
  CostReport r = op_pevlm(p);
  CHECK(r.op_sink == 32);
  CHECK(r.op_blocks == 128);
  CHECK(r.op_question == 128);
  CHECK(r.op_pevlm == 288);
  CHECK(r.op_pevlm == op_pevlm_simplified(p));
  CHECK(r.op_pevlm == op_from_mask(counting_mask(p), 1));
}

TEST_CASE("op_pevlm: degenerate zero configuration") {
  CostParams p{0, 4, 0, 0, 8};
  CHECK(op_pevlm(p).op_pevlm == 0);
}

TEST_CASE("op_pevlm: paper-scale prediction stays above measured speedups") {
  CostParams p{4096, 4096, 23, 256, 1};
  CHECK(p.total_tokens() == 98560);
  CostReport r = op_pevlm(p);
  CHECK(r.op_full == 19428147200ULL);
  CHECK(r.op_pevlm == 1627521024ULL);
  CHECK(r.op_pevlm == op_pevlm_simplified(p));
  CHECK(r.predicted_speedup == doctest::Approx(11.9372).epsilon(1e-3));
  CHECK(r.predicted_speedup > 7.47);
  CHECK(r.predicted_speedup > 7.79);
}

TEST_CASE("op_from_mask: counts pairs times 2H") {
  MaskSpec mask(2, 2);
  mask.set(0, 0);
  mask.set(1, 0);
  mask.set(1, 1);
  CHECK(op_from_mask(mask, 2) == 12);
  CHECK(op_from_mask(MaskSpec::full(16, 16), 64) == op_full(16, 64));
}

TEST_CASE("op_pevlm: affine in the block count") {
  CostParams base{6, 5, 0, 3, 4};
  auto at = [&](std::uint64_t n) {
    CostParams p = base;
    p.num_blocks = n;
    return op_pevlm(p).op_pevlm;
  };
  const std::uint64_t y0 = at(1), y1 = at(2), y2 = at(3);
  CHECK(y1 - y0 == y2 - y1);
  // slope = 2HB(S+B) + 2HQB
  const std::uint64_t slope = 2 * 4 * 5 * (6 + 5) + 2 * 4 * 3 * 5;
  CHECK(y1 - y0 == slope);
}

TEST_CASE("op_pevlm: strictly increasing in sink and block size") {
  for (std::uint64_t s = 0; s < 6; ++s) {
    for (std::uint64_t b = 1; b < 6; ++b) {
      CostParams p{s, b, 2, 3, 2};
      CostParams ps{s + 1, b, 2, 3, 2};
      CostParams pb{s, b + 1, 2, 3, 2};
      CHECK(op_pevlm(ps).op_pevlm > op_pevlm(p).op_pevlm);
      CHECK(op_pevlm(pb).op_pevlm > op_pevlm(p).op_pevlm);
    }
  }
}

TEST_CASE("op_pevlm_layout: agrees with uniform CostParams") {
  SequenceLayout layout = build_layout(3, 8, 4, 5);
  // 2 sink frames, 3 blocks of 2 frames each: uniform
  CostParams p{3 + 2 * 4, 2 * 4, 3, 5, 16};
  CHECK(op_pevlm_layout(layout, 2, 2, 16) == op_pevlm(p).op_pevlm);
  // remainder case charges the short block its true size
  const std::uint64_t with_remainder = op_pevlm_layout(layout, 2, 4, 16);
  const std::uint64_t s = 11, q = 5, total = layout.total();
  const std::uint64_t want = 2 * 16 * (s * s) +
                             2 * 16 * (16 * (s + 16)) +
                             2 * 16 * (8 * (s + 8)) + 2 * 16 * (q * total);
  CHECK(with_remainder == want);
}

TEST_CASE("latency_budget_search: unlimited budget ranks larger sizes first") {
  SequenceLayout layout = build_layout(2, 16, 4, 4);
  std::vector<BudgetCandidate> grid{{2, 2}, {2, 4}, {8, 2}, {8, 4}};
  auto ranked = latency_budget_search(1e18, 1e9, layout, grid, 8);
  REQUIRE(ranked.size() == 4);
  for (const BudgetEntry& e : ranked) CHECK(e.feasible);
  CHECK(ranked[0].sink_frames == 8);
  CHECK(ranked[0].block_frames == 4);
  CHECK(ranked[1].sink_frames == 8);
  CHECK(ranked[1].block_frames == 2);
  CHECK(ranked[2].sink_frames == 2);
  CHECK(ranked[2].block_frames == 4);
}

TEST_CASE("latency_budget_search: impossible budget reports nothing feasible") {
  SequenceLayout layout = build_layout(2, 16, 4, 4);
  std::vector<BudgetCandidate> grid{{2, 2}, {8, 4}};
  auto ranked = latency_budget_search(1e-12, 1e3, layout, grid, 8);
  for (const BudgetEntry& e : ranked) CHECK(!e.feasible);
}

TEST_CASE("latency_budget_search: a budget between two estimates splits them") {
  // mirrors the small-sink-wins-under-tight-budget structure
  SequenceLayout layout = build_layout(2, 32, 4, 4);
  std::vector<BudgetCandidate> grid{{2, 16}, {16, 16}};
  const double throughput = 1e6;
  const double small_est =
      double(op_pevlm_layout(layout, 2, 16, 8)) / throughput;
  const double large_est =
      double(op_pevlm_layout(layout, 16, 16, 8)) / throughput;
  REQUIRE(small_est < large_est);
  const double budget = (small_est + large_est) / 2.0;
  auto ranked = latency_budget_search(budget, throughput, layout, grid, 8);
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0].sink_frames == 2);
  CHECK(ranked[0].feasible);
  CHECK(ranked[1].sink_frames == 16);
  CHECK(!ranked[1].feasible);
}

TEST_CASE("latency_budget_search: parameter validation") {
  SequenceLayout layout = build_layout(1, 2, 2, 1);
  std::vector<BudgetCandidate> grid{{0, 1}};
  CHECK_THROWS_AS(latency_budget_search(0.0, 1.0, layout, grid, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(latency_budget_search(1.0, 0.0, layout, grid, 1),
                  std::invalid_argument);
}
