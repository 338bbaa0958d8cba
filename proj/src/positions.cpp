#include "pevlm/positions.hpp"

#include <stdexcept>

namespace pevlm {

namespace {

// Squarest h x w factorization of the frame token count.
void derive_grid(std::size_t tokens_per_frame, std::size_t& grid_h,
                 std::size_t& grid_w) {
  if (grid_h == 0 && grid_w == 0) {
    std::size_t h = 1;
    for (std::size_t c = 1; c * c <= tokens_per_frame; ++c) {
      if (tokens_per_frame % c == 0) h = c;
    }
    grid_h = h;
    grid_w = tokens_per_frame / h;
  } else if (grid_h == 0) {
    grid_h = grid_w ? tokens_per_frame / grid_w : 0;
  } else if (grid_w == 0) {
    grid_w = tokens_per_frame / grid_h;
  }
  if (grid_h * grid_w != tokens_per_frame) {
    throw std::invalid_argument(
        "tokens_per_frame does not form the configured h x w grid");
  }
}

}  // namespace

PositionMap assign_positions(const BlockPartition& part,
                             const SequenceLayout& layout, PositionMode mode,
                             RopeScheme scheme, double rope_base,
                             std::size_t grid_h, std::size_t grid_w) {
  const std::size_t total = layout.total();
  PositionMap map;
  map.mode = mode;
  map.scheme = scheme;
  map.rope_base = rope_base;
  map.ids.resize(total);

  if (scheme == RopeScheme::kMRope3D && layout.num_frames > 0) {
    derive_grid(layout.tokens_per_frame, grid_h, grid_w);
  }
  if (scheme == RopeScheme::kMRope3D && mode == PositionMode::kReusedPerBlock &&
      !part.frame_aligned) {
    // a frame may straddle two token-count blocks, leaving no consistent
    // reused frame-time assignment
    throw std::invalid_argument(
        "token-count splitting cannot reuse 3D positions across blocks");
  }

  const std::size_t sink_len = part.sink.size();
  std::size_t max_block_len = 0;
  for (const TokenRange& blk : part.context_blocks) {
    max_block_len = std::max(max_block_len, blk.size());
  }

  // Scalar id for token k: global index everywhere under Sequential; under
  // ReusedPerBlock every context block restarts at the sink length and the
  // question continues as if exactly one block followed the sink.
  auto scalar_id = [&](std::size_t k) -> std::int64_t {
    if (mode == PositionMode::kSequential) return static_cast<std::int64_t>(k);
    if (k < part.sink.end) return static_cast<std::int64_t>(k);
    for (const TokenRange& blk : part.context_blocks) {
      if (blk.contains(k)) {
        return static_cast<std::int64_t>(sink_len + (k - blk.begin));
      }
    }
    return static_cast<std::int64_t>(sink_len + max_block_len +
                                     (k - part.question.begin));
  };

  // Temporal id of frame f: true index under Sequential; under reuse the
  // frame is mapped as if its context block were the first one.
  auto frame_time = [&](std::size_t f) -> std::int64_t {
    if (mode == PositionMode::kSequential || f < part.sink_frames) {
      return static_cast<std::int64_t>(f);
    }
    std::size_t block_index = (f - part.sink_frames) / part.block_frames;
    return static_cast<std::int64_t>(f - block_index * part.block_frames);
  };

  for (std::size_t k = 0; k < total; ++k) {
    const bool visual = k >= layout.video_begin() && k < layout.video_end();
    if (scheme == RopeScheme::kRope1D || !visual) {
      std::int64_t p = scalar_id(k);
      map.ids[k] = {p, p, p};
    } else {
      const std::size_t rel = k - layout.video_begin();
      const std::size_t frame = rel / layout.tokens_per_frame;
      const std::size_t within = rel % layout.tokens_per_frame;
      map.ids[k] = {frame_time(frame),
                    static_cast<std::int64_t>(within / grid_w),
                    static_cast<std::int64_t>(within % grid_w)};
    }
  }

  map.next_id = mode == PositionMode::kSequential
                    ? static_cast<std::int64_t>(total)
                    : static_cast<std::int64_t>(sink_len + max_block_len +
                                                part.question.size());
  return map;
}

}  // namespace pevlm
