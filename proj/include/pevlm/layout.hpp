#pragma once

#include <cstddef>
#include <vector>

#include "pevlm/mask.hpp"
#include "pevlm/method.hpp"

namespace pevlm {

// Half-open token range [begin, end).
struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
};

// Token-level description of a synthetic multimodal input:
// [system text][num_frames x tokens_per_frame visual tokens][question text].
struct SequenceLayout {
  std::size_t sys_len = 0;
  std::size_t num_frames = 0;
  std::size_t tokens_per_frame = 0;
  std::size_t question_len = 0;

  std::size_t total() const {
    return sys_len + num_frames * tokens_per_frame + question_len;
  }
  std::size_t video_begin() const { return sys_len; }
  std::size_t video_end() const { return sys_len + num_frames * tokens_per_frame; }
  // First token of frame f.
  std::size_t frame_begin(std::size_t f) const {
    return sys_len + f * tokens_per_frame;
  }
};

// The Sink / Context / Question decomposition of a layout. With the default
// frame-aligned splitter every context block boundary coincides with a frame
// boundary; the token-count splitter drops that guarantee.
struct BlockPartition {
  TokenRange sink;
  std::vector<TokenRange> context_blocks;
  TokenRange question;
  std::size_t sink_frames = 0;
  std::size_t block_frames = 1;
  bool frame_aligned = true;

  // Index of the first frame held by context block i.
  std::size_t block_first_frame(std::size_t i) const {
    return sink_frames + i * block_frames;
  }
};

SequenceLayout build_layout(std::size_t sys_len, std::size_t num_frames,
                            std::size_t tokens_per_frame,
                            std::size_t question_len);

BlockPartition partition(const SequenceLayout& layout, std::size_t sink_frames,
                         std::size_t block_frames);

// Splits the context region into blocks of exactly block_tokens tokens,
// ignoring frame boundaries (the frame-alignment ablation). The sink keeps
// its frame-based definition.
BlockPartition partition_by_tokens(const SequenceLayout& layout,
                                   std::size_t sink_frames,
                                   std::size_t block_tokens);

// Dense L x L mask equivalent to the block-structured attention the engine
// performs under `method`; the oracle compares against it.
MaskSpec encode_mask(const BlockPartition& part, const MethodConfig& method);

}  // namespace pevlm
