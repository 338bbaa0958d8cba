#include "pevlm/layout.hpp"

#include <algorithm>
#include <stdexcept>

namespace pevlm {

SequenceLayout build_layout(std::size_t sys_len, std::size_t num_frames,
                            std::size_t tokens_per_frame,
                            std::size_t question_len) {
  SequenceLayout layout{sys_len, num_frames, tokens_per_frame, question_len};
  if (layout.total() == 0) {
    throw std::invalid_argument("layout has zero tokens");
  }
  return layout;
}

BlockPartition partition(const SequenceLayout& layout, std::size_t sink_frames,
                         std::size_t block_frames) {
  if (block_frames < 1) {
    throw std::invalid_argument("block_frames must be >= 1");
  }
  if (sink_frames > layout.num_frames) {
    throw std::invalid_argument("sink_frames exceeds frame count");
  }
  if (layout.num_frames * layout.tokens_per_frame == 0) {
    throw std::invalid_argument("partition requires at least one visual token");
  }

  BlockPartition part;
  part.sink_frames = sink_frames;
  part.block_frames = block_frames;
  part.sink = {0, layout.sys_len + sink_frames * layout.tokens_per_frame};

  std::size_t frame = sink_frames;
  while (frame < layout.num_frames) {
    std::size_t next = std::min(frame + block_frames, layout.num_frames);
    part.context_blocks.push_back(
        {layout.frame_begin(frame), layout.frame_begin(next)});
    frame = next;
  }

  part.question = {layout.video_end(), layout.total()};
  return part;
}

BlockPartition partition_by_tokens(const SequenceLayout& layout,
                                   std::size_t sink_frames,
                                   std::size_t block_tokens) {
  if (block_tokens < 1) {
    throw std::invalid_argument("block_tokens must be >= 1");
  }
  if (sink_frames > layout.num_frames) {
    throw std::invalid_argument("sink_frames exceeds frame count");
  }
  if (layout.num_frames * layout.tokens_per_frame == 0) {
    throw std::invalid_argument("partition requires at least one visual token");
  }

  BlockPartition part;
  part.sink_frames = sink_frames;
  part.frame_aligned = false;
  part.sink = {0, layout.sys_len + sink_frames * layout.tokens_per_frame};

  std::size_t cursor = part.sink.end;
  while (cursor < layout.video_end()) {
    std::size_t next = std::min(cursor + block_tokens, layout.video_end());
    part.context_blocks.push_back({cursor, next});
    cursor = next;
  }

  part.question = {layout.video_end(), layout.total()};
  return part;
}

MaskSpec encode_mask(const BlockPartition& part, const MethodConfig& method) {
  if (method.sink_mode == SinkMode::kAnchorFirstBlock &&
      part.context_blocks.empty()) {
    throw std::invalid_argument("anchor mode requires at least one context block");
  }

  const std::size_t total = part.question.end;
  MaskSpec mask(total, total);

  // sink rows: causal within the sink
  for (std::size_t r = part.sink.begin; r < part.sink.end; ++r) {
    mask.set_range(r, part.sink.begin, r + 1);
  }

  const bool see_sink = method.sink_mode != SinkMode::kNone;
  for (std::size_t i = 0; i < part.context_blocks.size(); ++i) {
    const TokenRange& blk = part.context_blocks[i];
    const TokenRange& anchor = part.context_blocks.front();
    for (std::size_t r = blk.begin; r < blk.end; ++r) {
      if (see_sink) mask.set_range(r, part.sink.begin, part.sink.end);
      if (method.sink_mode == SinkMode::kAnchorFirstBlock && i > 0) {
        mask.set_range(r, anchor.begin, anchor.end);
      }
      mask.set_range(r, blk.begin, r + 1);
    }
  }

  // question rows equal full causal rows
  for (std::size_t r = part.question.begin; r < part.question.end; ++r) {
    mask.set_range(r, 0, r + 1);
  }
  return mask;
}

}  // namespace pevlm
