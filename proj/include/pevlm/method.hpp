#pragma once

#include <cstddef>
#include <string>

namespace pevlm {

enum class PositionMode { kSequential, kReusedPerBlock };
enum class RopeScheme { kRope1D, kMRope3D };

// Which tokens act as the shared prefix every context block attends to.
enum class SinkMode {
  kSysPlusFrames,     // system tokens plus the leading sink_frames frames
  kSysOnly,           // system tokens only (shared-prefix style)
  kNone,              // no shared prefix; blocks attend only themselves
  kAnchorFirstBlock,  // system tokens, plus the first context block as anchor
};

enum class Preset { kFull, kPevlm, kApe, kStar, kBlock };

// The method switchboard. Presets expand to fixed flag combinations; the
// individual fields stay overridable for ablations.
struct MethodConfig {
  Preset preset = Preset::kPevlm;
  std::size_t sink_frames = 1;
  std::size_t block_frames = 2;
  PositionMode position_mode = PositionMode::kSequential;
  RopeScheme scheme = RopeScheme::kRope1D;
  double temperature = 1.0;
  SinkMode sink_mode = SinkMode::kSysPlusFrames;
  double rope_base = 10000.0;
  // Visual-token grid for the 3D rotary scheme; 0 = derive from
  // tokens_per_frame (squarest factorization).
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  // Frame-alignment ablation: when false, context blocks hold block_tokens
  // tokens each (0 = block_frames worth) and may straddle frames.
  bool frame_aligned = true;
  std::size_t block_tokens = 0;

  // Frames folded into the sink range; kSysOnly/kNone/kAnchorFirstBlock
  // never absorb frames regardless of sink_frames.
  std::size_t effective_sink_frames() const {
    return sink_mode == SinkMode::kSysPlusFrames ? sink_frames : 0;
  }
};

// Expands a preset into its fixed flag combination.
MethodConfig make_method(Preset preset, std::size_t num_frames,
                         std::size_t sink_frames, std::size_t block_frames,
                         double temperature = 1.0);

Preset parse_preset(const std::string& name);
PositionMode parse_position_mode(const std::string& name);
RopeScheme parse_scheme(const std::string& name);

const char* preset_name(Preset p);
const char* position_mode_name(PositionMode m);
const char* scheme_name(RopeScheme s);

}  // namespace pevlm
