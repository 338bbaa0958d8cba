#include <random>

#include <doctest.h>

#include "pevlm/layout.hpp"

using namespace pevlm;

TEST_CASE("build_layout: totals") {
  CHECK(build_layout(2, 8, 4, 3).total() == 37);
  CHECK(build_layout(0, 1, 1, 0).total() == 1);
  CHECK(build_layout(35, 256, 196, 64).total() == 50275);
  CHECK_THROWS_AS(build_layout(0, 0, 0, 0), std::invalid_argument);
}

TEST_CASE("partition: documented example") {
  SequenceLayout layout = build_layout(2, 8, 4, 3);
  BlockPartition part = partition(layout, 2, 3);
  CHECK(part.sink.begin == 0);
  CHECK(part.sink.end == 10);
  REQUIRE(part.context_blocks.size() == 2);
  CHECK(part.context_blocks[0].begin == 10);
  CHECK(part.context_blocks[0].end == 22);
  CHECK(part.context_blocks[1].begin == 22);
  CHECK(part.context_blocks[1].end == 34);
  CHECK(part.question.begin == 34);
  CHECK(part.question.end == 37);
}

TEST_CASE("partition: remainder frames form a smaller final block") {
  SequenceLayout layout = build_layout(0, 9, 2, 0);
  BlockPartition part = partition(layout, 2, 3);
  REQUIRE(part.context_blocks.size() == 3);
  CHECK(part.context_blocks[0].size() == 6);  // 3 frames
  CHECK(part.context_blocks[1].size() == 6);
  CHECK(part.context_blocks[2].size() == 2);  // 1 frame
}

TEST_CASE("partition: zero sink frames keeps system tokens in the sink") {
  SequenceLayout layout = build_layout(5, 4, 3, 2);
  BlockPartition part = partition(layout, 0, 2);
  CHECK(part.sink.begin == 0);
  CHECK(part.sink.end == 5);
}

TEST_CASE("partition: parameter errors") {
  SequenceLayout layout = build_layout(2, 4, 3, 1);
  CHECK_THROWS_AS(partition(layout, 5, 1), std::invalid_argument);
  CHECK_THROWS_AS(partition(layout, 0, 0), std::invalid_argument);
}

TEST_CASE("partition: ranges tile the sequence for all valid parameters") {
  SequenceLayout layout = build_layout(3, 12, 2, 4);
  for (std::size_t sf = 0; sf <= 12; ++sf) {
    for (std::size_t bf = 1; bf <= 13; ++bf) {
      BlockPartition part = partition(layout, sf, bf);
      std::size_t cursor = 0;
      CHECK(part.sink.begin == cursor);
      cursor = part.sink.end;
      for (const TokenRange& blk : part.context_blocks) {
        CHECK(blk.begin == cursor);
        CHECK(blk.size() <= bf * layout.tokens_per_frame);
        CHECK(blk.size() % layout.tokens_per_frame == 0);
        cursor = blk.end;
      }
      CHECK(part.question.begin == cursor);
      CHECK(part.question.end == layout.total());
    }
  }
}

TEST_CASE("partition_by_tokens: blocks may straddle frame boundaries") {
  SequenceLayout layout = build_layout(2, 4, 3, 1);  // 12 video tokens
  BlockPartition part = partition_by_tokens(layout, 1, 5);
  CHECK(!part.frame_aligned);
  CHECK(part.sink.end == 5);  // sys 2 + one 3-token frame
  REQUIRE(part.context_blocks.size() == 2);
  CHECK(part.context_blocks[0].begin == 5);
  CHECK(part.context_blocks[0].end == 10);  // cuts frame 2 in half
  CHECK(part.context_blocks[1].end == 14);  // 4-token remainder
  CHECK(part.question.begin == 14);
  CHECK_THROWS_AS(partition_by_tokens(layout, 0, 0), std::invalid_argument);
}

TEST_CASE("encode_mask: one block spanning all frames gives the causal mask") {
  SequenceLayout layout = build_layout(2, 4, 3, 2);
  BlockPartition part = partition(layout, 0, 4);
  MethodConfig cfg = make_method(Preset::kFull, 4, 0, 4);
  MaskSpec mask = encode_mask(part, cfg);
  CHECK(mask == MaskSpec::causal(layout.total()));
}

TEST_CASE("encode_mask: no sink leaves blocks attending only themselves") {
  SequenceLayout layout = build_layout(0, 4, 2, 2);
  BlockPartition part = partition(layout, 0, 2);
  MethodConfig cfg = make_method(Preset::kBlock, 4, 0, 2);
  MaskSpec mask = encode_mask(part, cfg);
  for (const TokenRange& blk : part.context_blocks) {
    for (std::size_t r = blk.begin; r < blk.end; ++r) {
      for (std::size_t k = 0; k < layout.total(); ++k) {
        const bool want = k >= blk.begin && k <= r;
        CHECK(mask.allowed(r, k) == want);
      }
    }
  }
}

TEST_CASE("encode_mask: allowed pairs match a brute-force enumeration") {
  SequenceLayout layout = build_layout(2, 8, 4, 3);
  BlockPartition part = partition(layout, 2, 3);
  MethodConfig cfg = make_method(Preset::kPevlm, 8, 2, 3);
  MaskSpec mask = encode_mask(part, cfg);

  // independent re-derivation of the rule, token by token
  auto region = [&](std::size_t t) -> int {
    if (t < part.sink.end) return -1;
    if (t >= part.question.begin) return -2;
    for (std::size_t b = 0; b < part.context_blocks.size(); ++b) {
      if (part.context_blocks[b].contains(t)) return static_cast<int>(b);
    }
    return -3;
  };
  std::size_t expected = 0;
  for (std::size_t q = 0; q < layout.total(); ++q) {
    for (std::size_t k = 0; k < layout.total(); ++k) {
      const int rq = region(q);
      const int rk = region(k);
      bool want = false;
      if (rq == -1) {
        want = rk == -1 && k <= q;
      } else if (rq == -2) {
        want = k <= q;
      } else {
        want = rk == -1 || (rk == rq && k <= q);
      }
      if (want) ++expected;
      CHECK(mask.allowed(q, k) == want);
    }
  }
  CHECK(mask.count_allowed() == expected);
}

TEST_CASE("encode_mask: sparsification nests inside the causal mask") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t frames = 1 + rng() % 9;
    SequenceLayout layout =
        build_layout(rng() % 5, frames, 1 + rng() % 4, rng() % 5);
    BlockPartition part =
        partition(layout, rng() % (frames + 1), 1 + rng() % frames);
    MethodConfig cfg =
        make_method(Preset::kPevlm, frames, part.sink_frames, part.block_frames);
    MaskSpec mask = encode_mask(part, cfg);
    MaskSpec causal = MaskSpec::causal(layout.total());
    for (std::size_t q = 0; q < layout.total(); ++q) {
      for (std::size_t k = 0; k < layout.total(); ++k) {
        if (mask.allowed(q, k)) CHECK(causal.allowed(q, k));
      }
      if (q >= part.question.begin) {
        CHECK(mask.row_allowed_count(q) == causal.row_allowed_count(q));
      }
    }
  }
}

TEST_CASE("encode_mask: anchor mode requires a context block") {
  SequenceLayout layout = build_layout(2, 2, 2, 1);
  BlockPartition part = partition(layout, 2, 1);  // all frames in the sink
  MethodConfig cfg = make_method(Preset::kStar, 2, 0, 1);
  CHECK(part.context_blocks.empty());
  CHECK_THROWS_AS(encode_mask(part, cfg), std::invalid_argument);
}

TEST_CASE("encode_mask: star anchor extends every later block's keys") {
  SequenceLayout layout = build_layout(2, 6, 2, 2);
  BlockPartition part = partition(layout, 0, 2);
  MethodConfig cfg = make_method(Preset::kStar, 6, 0, 2);
  MaskSpec mask = encode_mask(part, cfg);
  const TokenRange& anchor = part.context_blocks[0];
  const TokenRange& second = part.context_blocks[1];
  for (std::size_t r = second.begin; r < second.end; ++r) {
    for (std::size_t k = anchor.begin; k < anchor.end; ++k) {
      CHECK(mask.allowed(r, k));
    }
  }
  // the anchor itself sees only sink + itself
  for (std::size_t r = anchor.begin; r < anchor.end; ++r) {
    for (std::size_t k = second.begin; k < second.end; ++k) {
      CHECK(!mask.allowed(r, k));
    }
  }
}
