#include "pevlm/method.hpp"

#include <stdexcept>

namespace pevlm {

MethodConfig make_method(Preset preset, std::size_t num_frames,
                         std::size_t sink_frames, std::size_t block_frames,
                         double temperature) {
  MethodConfig cfg;
  cfg.preset = preset;
  cfg.sink_frames = sink_frames;
  cfg.block_frames = block_frames;
  cfg.temperature = temperature;
  switch (preset) {
    case Preset::kFull:
      // One context block spanning every frame reproduces dense causal
      // attention.
      cfg.sink_frames = 0;
      cfg.block_frames = num_frames > 0 ? num_frames : 1;
      cfg.position_mode = PositionMode::kSequential;
      cfg.sink_mode = SinkMode::kSysPlusFrames;
      cfg.temperature = 1.0;
      break;
    case Preset::kPevlm:
      cfg.position_mode = PositionMode::kSequential;
      cfg.sink_mode = SinkMode::kSysPlusFrames;
      cfg.temperature = 1.0;
      break;
    case Preset::kApe:
      cfg.position_mode = PositionMode::kReusedPerBlock;
      cfg.sink_mode = SinkMode::kSysOnly;
      break;
    case Preset::kStar:
      cfg.position_mode = PositionMode::kReusedPerBlock;
      cfg.sink_mode = SinkMode::kAnchorFirstBlock;
      cfg.temperature = 1.0;
      break;
    case Preset::kBlock:
      cfg.position_mode = PositionMode::kSequential;
      cfg.sink_mode = SinkMode::kNone;
      cfg.temperature = 1.0;
      break;
  }
  return cfg;
}

Preset parse_preset(const std::string& name) {
  if (name == "full") return Preset::kFull;
  if (name == "pevlm") return Preset::kPevlm;
  if (name == "ape") return Preset::kApe;
  if (name == "star") return Preset::kStar;
  if (name == "block") return Preset::kBlock;
  throw std::invalid_argument("unknown preset: " + name);
}

PositionMode parse_position_mode(const std::string& name) {
  if (name == "sequential") return PositionMode::kSequential;
  if (name == "reused") return PositionMode::kReusedPerBlock;
  throw std::invalid_argument("unknown position mode: " + name);
}

RopeScheme parse_scheme(const std::string& name) {
  if (name == "rope1d") return RopeScheme::kRope1D;
  if (name == "mrope3d") return RopeScheme::kMRope3D;
  throw std::invalid_argument("unknown rope scheme: " + name);
}

const char* preset_name(Preset p) {
  switch (p) {
    case Preset::kFull: return "full";
    case Preset::kPevlm: return "pevlm";
    case Preset::kApe: return "ape";
    case Preset::kStar: return "star";
    case Preset::kBlock: return "block";
  }
  return "?";
}

const char* position_mode_name(PositionMode m) {
  return m == PositionMode::kSequential ? "sequential" : "reused";
}

const char* scheme_name(RopeScheme s) {
  return s == RopeScheme::kRope1D ? "rope1d" : "mrope3d";
}

}  // namespace pevlm
