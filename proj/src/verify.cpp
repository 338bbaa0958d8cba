#include "pevlm/verify.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "pevlm/costmodel.hpp"
#include "pevlm/engine.hpp"
#include "pevlm/positions.hpp"
#include "pevlm/synth.hpp"
#include "pevlm/trace.hpp"

namespace pevlm {

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return lo + rng() % (hi - lo + 1);
}

template <typename Real>
double oracle_diff(const VerifyCase& c, bool fault) {
  Engine<Real> engine(c.layout, c.config, c.heads);
  auto states = random_states<Real>(c.state_seed, c.layout.total(),
                                    c.heads.hidden(), c.layers);
  PrefillResult<Real> run = engine.prefill(states);

  MaskSpec mask = encode_mask(engine.blocks(), c.config);
  if (fault) mask.flip(mask.rows() - 1, 0);

  double worst = 0.0;
  for (std::size_t layer = 0; layer < c.layers; ++layer) {
    LayerStates<Real> rotated = states[layer];
    engine.rotate(rotated);
    MatrixT<Real> want =
        mha(rotated.q, rotated.k, states[layer].v, c.heads, mask,
            static_cast<Real>(c.config.temperature));
    worst = std::max(worst, max_abs_diff(want, run.outputs[layer]));
  }
  return worst;
}

// Decode one token after prefill and compare against a dense causal run over
// the mask extended by one fully-attending row.
template <typename Real>
double decode_oracle_diff(const VerifyCase& c) {
  Engine<Real> engine(c.layout, c.config, c.heads);
  const std::size_t total = c.layout.total();
  const std::size_t hidden = c.heads.hidden();
  auto states = random_states<Real>(c.state_seed, total, hidden, c.layers);
  auto run = engine.prefill(states);
  auto extra = random_states<Real>(c.state_seed ^ 0x9e3779b97f4a7c15ULL, 1,
                                   hidden, c.layers);
  auto decoded = engine.decode_step(extra, run.cache);

  MaskSpec base = encode_mask(engine.blocks(), c.config);
  MaskSpec ext(total + 1, total + 1);
  for (std::size_t r = 0; r < total; ++r) {
    for (std::size_t k = 0; k < total; ++k) {
      if (base.allowed(r, k)) ext.set(r, k);
    }
  }
  ext.set_range(total, 0, total + 1);

  std::vector<TokenPos> ids(engine.positions().ids);
  const std::int64_t next = engine.positions().next_id;
  ids.push_back({next, next, next});

  const MRopeSplit split = c.config.scheme == RopeScheme::kMRope3D
                               ? MRopeSplit::default_for(c.heads.head_dim)
                               : MRopeSplit{};
  double worst = 0.0;
  for (std::size_t layer = 0; layer < c.layers; ++layer) {
    MatrixT<Real> q(total + 1, hidden), k(total + 1, hidden), v(total + 1, hidden);
    for (std::size_t r = 0; r < total + 1; ++r) {
      const LayerStates<Real>& src = r < total ? states[layer] : extra[layer];
      const std::size_t sr = r < total ? r : 0;
      for (std::size_t col = 0; col < hidden; ++col) {
        q.at(r, col) = src.q.at(sr, col);
        k.at(r, col) = src.k.at(sr, col);
        v.at(r, col) = src.v.at(sr, col);
      }
    }
    for (MatrixT<Real>* m : {&q, &k}) {
      for (std::size_t h = 0; h < c.heads.num_heads; ++h) {
        detail::rotate_rows(m->data().data() + h * c.heads.head_dim, hidden,
                            total + 1, c.heads.head_dim, ids,
                            c.config.scheme == RopeScheme::kMRope3D ? &split
                                                                    : nullptr,
                            c.config.rope_base);
      }
    }
    MatrixT<Real> want = mha(q, k, v, c.heads, ext,
                             static_cast<Real>(c.config.temperature));
    for (std::size_t col = 0; col < hidden; ++col) {
      worst = std::max(worst, std::fabs(double(want.at(total, col)) -
                                        double(decoded[layer].at(0, col))));
    }
  }
  return worst;
}

std::string describe(const VerifyCase& c) {
  std::ostringstream os;
  os << preset_name(c.config.preset) << "/"
     << position_mode_name(c.config.position_mode) << "/"
     << scheme_name(c.config.scheme) << " sys=" << c.layout.sys_len
     << " T=" << c.layout.num_frames << " nf=" << c.layout.tokens_per_frame
     << " q=" << c.layout.question_len << " sf=" << c.config.sink_frames
     << " bf=" << c.config.block_frames << " temp=" << c.config.temperature
     << " heads=" << c.heads.num_heads << "x" << c.heads.head_dim
     << " layers=" << c.layers << " seed=" << c.state_seed;
  return os.str();
}

using Check = CheckResult (*)(const VerifyOptions&);

CheckResult check_softmax_row_sums(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed ^ 0x51ULL);
  std::uniform_real_distribution<double> dist(-20.0, 20.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = pick(rng, 1, 64);
    std::vector<float> logits(n);
    for (float& v : logits) v = static_cast<float>(dist(rng));
    for (float temp : {0.25f, 1.0f, 4.0f}) {
      auto probs = stable_softmax<float>(logits, temp);
      double sum = 0.0;
      for (float p : probs) sum += p;
      worst = std::max(worst, std::fabs(sum - 1.0));
    }
  }
  return {"softmax-row-sums", worst <= 1e-6,
          "max |sum-1| = " + std::to_string(worst)};
}

CheckResult check_softmax_shift_invariance(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed ^ 0x52ULL);
  std::uniform_real_distribution<double> dist(-4.0, 4.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = pick(rng, 1, 32);
    float shift = static_cast<float>(dist(rng));
    std::vector<float> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<float>(dist(rng));
      b[i] = a[i] + shift;
    }
    auto pa = stable_softmax<float>(a, 1.0f);
    auto pb = stable_softmax<float>(b, 1.0f);
    for (std::size_t i = 0; i < n; ++i) {
      worst = std::max(worst, std::fabs(double(pa[i]) - double(pb[i])));
    }
  }
  return {"softmax-shift-invariance", worst <= 1e-6,
          "max drift = " + std::to_string(worst)};
}

CheckResult check_rope_isometry(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed ^ 0x53ULL);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 * pick(rng, 3, 16);
    Matrix64 src = random_matrix(rng, 8, d);
    Matrix x(8, d);
    for (std::size_t i = 0; i < src.data().size(); ++i) {
      x.data()[i] = static_cast<float>(src.data()[i]);
    }
    std::vector<TokenPos> pos(8);
    for (std::size_t r = 0; r < 8; ++r) {
      std::int64_t p = static_cast<std::int64_t>(pick(rng, 0, 5000));
      pos[r] = {p, p / 3, p / 7};
    }
    Matrix y = apply_rope(x, pos);
    Matrix z = apply_mrope3d(x, pos, MRopeSplit::default_for(d));
    for (const Matrix* rotated : {&y, &z}) {
      for (std::size_t r = 0; r < 8; ++r) {
        for (std::size_t i = 0; i + 1 < d; i += 2) {
          double before = std::hypot(x.at(r, i), x.at(r, i + 1));
          double after =
              std::hypot(rotated->at(r, i), rotated->at(r, i + 1));
          worst = std::max(worst, std::fabs(before - after));
        }
      }
    }
  }
  return {"rope-isometry", worst <= 1e-6,
          "max pair-norm drift = " + std::to_string(worst)};
}

CheckResult check_rope_relative_position(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed ^ 0x54ULL);
  const std::size_t d = 32;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Matrix64 src = random_matrix(rng, 2, d);
    Matrix qk(2, d);
    for (std::size_t i = 0; i < src.data().size(); ++i) {
      qk.data()[i] = static_cast<float>(src.data()[i]);
    }
    const auto p1 = static_cast<std::int64_t>(pick(rng, 0, 2000));
    const auto p2 = static_cast<std::int64_t>(pick(rng, 0, 2000));
    const auto shift = static_cast<std::int64_t>(pick(rng, 0, 500));
    std::vector<TokenPos> base{{p1, p1, p1}, {p2, p2, p2}};
    std::vector<TokenPos> moved{{p1 + shift, p1 + shift, p1 + shift},
                                {p2 + shift, p2 + shift, p2 + shift}};
    Matrix a = apply_rope(qk, base);
    Matrix b = apply_rope(qk, moved);
    double dot_a = 0.0, dot_b = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      dot_a += double(a.at(0, i)) * double(a.at(1, i));
      dot_b += double(b.at(0, i)) * double(b.at(1, i));
    }
    worst = std::max(worst, std::fabs(dot_a - dot_b));
  }
  return {"rope-relative-position", worst <= 1e-5,
          "max identity drift = " + std::to_string(worst)};
}

CheckResult check_mrope_slots(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed ^ 0x55ULL);
  const std::size_t d = 16;
  const MRopeSplit split = MRopeSplit::default_for(d);
  bool ok = true;
  for (int trial = 0; trial < 50 && ok; ++trial) {
    Matrix64 src = random_matrix(rng, 1, d);
    Matrix x(2, d);
    for (std::size_t c = 0; c < d; ++c) {
      x.at(0, c) = static_cast<float>(src.at(0, c));
      x.at(1, c) = static_cast<float>(src.at(0, c));
    }
    std::vector<TokenPos> pos{{3, 2, 1}, {9, 2, 1}};
    Matrix y = apply_mrope3d(x, pos, split);
    // temporal slots must differ, height/width slots must agree
    bool temporal_differs = false;
    for (std::size_t i = 0; i < split.temporal_pairs * 2; ++i) {
      if (y.at(0, i) != y.at(1, i)) temporal_differs = true;
    }
    for (std::size_t i = split.temporal_pairs * 2; i < d; ++i) {
      if (y.at(0, i) != y.at(1, i)) ok = false;
    }
    ok = ok && temporal_differs;
  }
  return {"mrope-slot-structure", ok,
          ok ? "temporal slots rotate independently" : "slot mismatch"};
}

CheckResult check_mask_structure(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed ^ 0x56ULL);
  for (int trial = 0; trial < 60; ++trial) {
    std::mt19937_64 case_rng(rng());
    VerifyCase c = random_case(case_rng);
    Engine<float> engine(c.layout, c.config, c.heads);
    const BlockPartition& part = engine.blocks();
    const std::size_t total = c.layout.total();

    // coverage: ranges tile [0, L)
    std::vector<int> hits(total, 0);
    auto mark = [&](const TokenRange& r) {
      for (std::size_t i = r.begin; i < r.end; ++i) ++hits[i];
    };
    mark(part.sink);
    for (const TokenRange& b : part.context_blocks) mark(b);
    mark(part.question);
    for (std::size_t i = 0; i < total; ++i) {
      if (hits[i] != 1) {
        return {"mask-structure", false, "partition does not tile [0, L)"};
      }
    }

    // frame integrity: block boundaries on frame boundaries
    for (const TokenRange& b : part.context_blocks) {
      const std::size_t rel = b.begin - c.layout.video_begin();
      if (rel % c.layout.tokens_per_frame != 0) {
        return {"mask-structure", false, "block boundary inside a frame"};
      }
    }

    MaskSpec mask = encode_mask(part, c.config);
    MaskSpec causal = MaskSpec::causal(total);
    for (std::size_t r = 0; r < total; ++r) {
      for (std::size_t k = 0; k < total; ++k) {
        if (mask.allowed(r, k) && !causal.allowed(r, k)) {
          return {"mask-structure", false, "mask not nested in causal"};
        }
        if (r >= part.question.begin &&
            mask.allowed(r, k) != causal.allowed(r, k)) {
          return {"mask-structure", false, "question row differs from causal"};
        }
      }
    }
  }
  return {"mask-structure", true,
          "coverage, frame alignment, causal nesting, question rows"};
}

CheckResult check_engine_vs_oracle(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  const double tolerance = opts.float64 ? 1e-10 : 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < opts.num_configs; ++i) {
    std::mt19937_64 case_rng(rng());
    VerifyCase c = random_case(case_rng);
    const bool fault = opts.inject_fault && i == 0;
    double diff = opts.float64 ? engine_oracle_diff64(c, fault)
                               : engine_oracle_diff32(c, fault);
    worst = std::max(worst, diff);
    if (diff > tolerance) {
      return {"engine-vs-oracle", false,
              "diff " + std::to_string(diff) + " on " + describe(c)};
    }
  }
  std::ostringstream os;
  os << opts.num_configs << " configs, max diff " << worst;
  return {"engine-vs-oracle", true, os.str()};
}

CheckResult check_degenerate_collapse(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed ^ 0x57ULL);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t frames = pick(rng, 1, 10);
    SequenceLayout layout =
        build_layout(pick(rng, 1, 4), frames, pick(rng, 1, 8), pick(rng, 0, 6));
    HeadLayout heads{pick(rng, 1, 2), 8};
    const std::size_t sink_frames = pick(rng, 0, frames - 1);
    MethodConfig one_block = make_method(Preset::kPevlm, frames, sink_frames,
                                         frames - sink_frames);
    MethodConfig full = make_method(Preset::kFull, frames, 0, frames);
    Engine<float> a(layout, one_block, heads);
    Engine<float> b(layout, full, heads);
    auto states =
        random_states<float>(rng(), layout.total(), heads.hidden(), 1);
    auto ra = a.prefill(states);
    auto rb = b.prefill(states);
    worst = std::max(worst, max_abs_diff(ra.outputs[0], rb.outputs[0]));
  }
  return {"degenerate-collapse", worst <= 1e-5,
          "max |one-block - full| = " + std::to_string(worst)};
}

CheckResult check_block_determinism(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed ^ 0x58ULL);
  for (int trial = 0; trial < 8; ++trial) {
    std::mt19937_64 case_rng(rng());
    VerifyCase c = random_case(case_rng);
    Engine<float> engine(c.layout, c.config, c.heads);
    auto states = random_states<float>(c.state_seed, c.layout.total(),
                                       c.heads.hidden(), 1);
    PrefillOptions base;
    auto reference = engine.prefill(states, base);
    for (BlockOrder order :
         {BlockOrder::kSerial, BlockOrder::kReversed, BlockOrder::kShuffled}) {
      PrefillOptions o;
      o.order = order;
      o.shuffle_seed = case_rng();
      auto other = engine.prefill(states, o);
      if (!(other.outputs[0] == reference.outputs[0]) ||
          !(other.cache.layers[0].k == reference.cache.layers[0].k) ||
          !(other.cache.layers[0].v == reference.cache.layers[0].v)) {
        return {"block-determinism", false, "schedule changed bits on " + describe(c)};
      }
    }
  }
  return {"block-determinism", true,
          "serial / parallel / reversed / shuffled bitwise equal"};
}

CheckResult check_block_independence(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed ^ 0x59ULL);
  for (int trial = 0; trial < 8; ++trial) {
    SequenceLayout layout = build_layout(2, 6, 4, 3);
    HeadLayout heads{2, 8};
    MethodConfig cfg = make_method(Preset::kPevlm, 6, 1, 2);
    Engine<float> engine(layout, cfg, heads);
    const BlockPartition& part = engine.blocks();
    auto states = random_states<float>(rng(), layout.total(), heads.hidden(), 1);
    auto baseline = engine.prefill(states);

    // perturb the last block's content; earlier blocks' KV must not move
    auto perturbed = states;
    const TokenRange& last = part.context_blocks.back();
    for (std::size_t r = last.begin; r < last.end; ++r) {
      for (std::size_t col = 0; col < heads.hidden(); ++col) {
        perturbed[0].k.at(r, col) += 0.25f;
        perturbed[0].v.at(r, col) -= 0.125f;
      }
    }
    auto moved = engine.prefill(perturbed);
    for (std::size_t b = 0; b + 1 < part.context_blocks.size(); ++b) {
      const TokenRange& blk = part.context_blocks[b];
      for (std::size_t r = blk.begin; r < blk.end; ++r) {
        if (std::memcmp(baseline.cache.layers[0].k.row(r),
                        moved.cache.layers[0].k.row(r),
                        heads.hidden() * sizeof(float)) != 0 ||
            std::memcmp(baseline.cache.layers[0].v.row(r),
                        moved.cache.layers[0].v.row(r),
                        heads.hidden() * sizeof(float)) != 0) {
          return {"block-independence", false,
                  "block " + std::to_string(b) + " KV moved"};
        }
      }
    }
  }
  return {"block-independence", true, "KV rows unaffected by sibling blocks"};
}

CheckResult check_ape_identity(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed ^ 0x5aULL);
  for (int trial = 0; trial < 6; ++trial) {
    SequenceLayout layout =
        build_layout(pick(rng, 1, 4), pick(rng, 2, 8), pick(rng, 1, 6),
                     pick(rng, 1, 6));
    HeadLayout heads{pick(rng, 1, 2), 8};
    MethodConfig ape =
        make_method(Preset::kApe, layout.num_frames, 0, pick(rng, 1, 3), 1.0);
    MethodConfig plain = ape;
    plain.preset = Preset::kPevlm;
    plain.temperature = 1.0;
    Engine<float> a(layout, ape, heads);
    Engine<float> b(layout, plain, heads);
    auto states = random_states<float>(rng(), layout.total(), heads.hidden(), 1);
    auto ra = a.prefill(states);
    auto rb = b.prefill(states);
    if (!(ra.outputs[0] == rb.outputs[0])) {
      return {"ape-identity", false, "T=1.0 output differs from plain reuse"};
    }
  }
  return {"ape-identity", true, "T=1.0 bitwise equals plain reused encoding"};
}

CheckResult check_reuse_degeneracy(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed ^ 0x5bULL);
  SequenceLayout layout = build_layout(2, 4, 6, 3);
  HeadLayout heads{2, 8};
  auto states = random_states<float>(rng(), layout.total(), heads.hidden(), 1);
  // make both context blocks carry identical content
  MethodConfig cfg = make_method(Preset::kPevlm, 4, 0, 2);
  cfg.position_mode = PositionMode::kReusedPerBlock;
  Engine<float> reused(layout, cfg, heads);
  const BlockPartition& part = reused.blocks();
  const TokenRange& b0 = part.context_blocks[0];
  const TokenRange& b1 = part.context_blocks[1];
  for (std::size_t i = 0; i < b0.size(); ++i) {
    for (std::size_t col = 0; col < heads.hidden(); ++col) {
      states[0].q.at(b1.begin + i, col) = states[0].q.at(b0.begin + i, col);
      states[0].k.at(b1.begin + i, col) = states[0].k.at(b0.begin + i, col);
      states[0].v.at(b1.begin + i, col) = states[0].v.at(b0.begin + i, col);
    }
  }
  auto run_reused = reused.prefill(states);
  bool identical = true;
  for (std::size_t i = 0; i < b0.size(); ++i) {
    if (std::memcmp(run_reused.cache.layers[0].k.row(b0.begin + i),
                    run_reused.cache.layers[0].k.row(b1.begin + i),
                    heads.hidden() * sizeof(float)) != 0) {
      identical = false;
    }
  }

  MethodConfig seq = cfg;
  seq.position_mode = PositionMode::kSequential;
  Engine<float> sequential(layout, seq, heads);
  auto run_seq = sequential.prefill(states);
  double diff = 0.0;
  for (std::size_t i = 0; i < b0.size(); ++i) {
    for (std::size_t col = 0; col < heads.hidden(); ++col) {
      diff = std::max(
          diff,
          std::fabs(double(run_seq.cache.layers[0].k.at(b0.begin + i, col)) -
                    double(run_seq.cache.layers[0].k.at(b1.begin + i, col))));
    }
  }
  const bool passed = identical && diff > 1e-3;
  return {"reuse-degeneracy", passed,
          "reused KV bitwise equal; sequential max diff " + std::to_string(diff)};
}

CheckResult check_cost_formula_vs_mask(const VerifyOptions&) {
  for (std::uint64_t hidden : {std::uint64_t(1), std::uint64_t(8)}) {
    for (std::uint64_t s = 0; s <= 32; s += 4) {
      for (std::uint64_t b = 0; b <= 32; b += 4) {
        for (std::uint64_t q = 0; q <= 32; q += 4) {
          for (std::uint64_t n = 0; n <= 8; ++n) {
            CostParams p{s, b, n, q, hidden};
            if (p.total_tokens() == 0) continue;
            CostReport r = op_pevlm(p);
            const std::uint64_t oracle = op_from_mask(counting_mask(p), hidden);
            if (r.op_pevlm != oracle) {
              return {"cost-formula-vs-mask", false,
                      "mismatch at S=" + std::to_string(s) +
                          " B=" + std::to_string(b) + " N=" + std::to_string(n) +
                          " Q=" + std::to_string(q)};
            }
          }
        }
      }
    }
  }
  return {"cost-formula-vs-mask", true, "part sum equals mask pair count"};
}

CheckResult check_cost_simplification(const VerifyOptions&) {
  for (std::uint64_t s = 0; s <= 32; ++s) {
    for (std::uint64_t b = 0; b <= 32; b += 2) {
      for (std::uint64_t q = 0; q <= 32; q += 2) {
        for (std::uint64_t n = 0; n <= 8; ++n) {
          CostParams p{s, b, n, q, 8};
          CostReport r = op_pevlm(p);
          if (r.op_pevlm != op_pevlm_simplified(p) ||
              r.op_pevlm != r.op_sink + r.op_blocks + r.op_question) {
            return {"cost-simplification", false, "expansion mismatch"};
          }
        }
      }
    }
  }
  return {"cost-simplification", true, "expanded polynomial equals part sum"};
}

CheckResult check_trace_moving_average(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed ^ 0x5cULL);
  SequenceLayout layout = build_layout(2, 4, 4, 5);
  HeadLayout heads{2, 8};
  MethodConfig cfg = make_method(Preset::kPevlm, 4, 1, 2);
  Engine<float> engine(layout, cfg, heads);
  auto states = random_states<float>(rng(), layout.total(), heads.hidden(), 1);
  PrefillOptions o;
  o.capture_question_weights = true;
  auto run = engine.prefill(states, o);
  AttnTrace trace = build_trace(run.question_weights, engine.blocks(), 4);

  // independent windowed mean
  for (std::size_t i = 0; i < trace.mean_weight.size(); ++i) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j = (i + 1 >= 4 ? i - 3 : 0); j <= i; ++j, ++count) {
      sum += trace.mean_weight[j];
    }
    if (trace.moving_avg[i] != sum / count) {
      return {"trace-moving-average", false, "windowed mean mismatch"};
    }
  }
  const double mass_err =
      std::fabs(trace.total_mass - double(layout.question_len));
  if (mass_err > 1e-4) {
    return {"trace-moving-average", false,
            "trace mass off by " + std::to_string(mass_err)};
  }
  return {"trace-moving-average", true, "matches brute-force windowed mean"};
}

CheckResult check_decode_oracle(const VerifyOptions& opts) {
  std::mt19937_64 rng(opts.seed ^ 0x5dULL);
  const double tolerance = opts.float64 ? 1e-10 : 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    std::mt19937_64 case_rng(rng());
    VerifyCase c = random_case(case_rng);
    double diff = opts.float64 ? decode_oracle_diff<double>(c)
                               : decode_oracle_diff<float>(c);
    worst = std::max(worst, diff);
    if (diff > tolerance) {
      return {"decode-oracle", false,
              "diff " + std::to_string(diff) + " on " + describe(c)};
    }
  }
  return {"decode-oracle", true, "max diff " + std::to_string(worst)};
}

}  // namespace

VerifyCase random_case(std::mt19937_64& rng, const CaseShape& shape) {
  VerifyCase c;
  const Preset preset = shape.preset >= 0 ? static_cast<Preset>(shape.preset)
                                          : static_cast<Preset>(rng() % 5);
  const bool mrope = shape.scheme >= 0 ? shape.scheme == 1 : rng() % 2 == 0;
  const std::size_t max_frames = shape.large ? 24 : 10;

  std::size_t grid_h = pick(rng, 1, shape.large ? 4 : 3);
  std::size_t grid_w = pick(rng, 1, shape.large ? 4 : 3);
  std::size_t tokens_per_frame =
      mrope ? grid_h * grid_w : pick(rng, 1, shape.large ? 16 : 8);
  std::size_t frames = pick(rng, 1, max_frames);
  std::size_t sys_len = pick(rng, 0, shape.large ? 16 : 6);
  if (preset == Preset::kApe || preset == Preset::kStar) {
    sys_len = std::max<std::size_t>(sys_len, 1);
  }
  std::size_t question_len = pick(rng, 1, shape.large ? 24 : 8);
  c.layout = build_layout(sys_len, frames, tokens_per_frame, question_len);

  std::size_t sink_frames = pick(rng, 0, frames);
  if (preset == Preset::kPevlm && sys_len == 0 && sink_frames == 0) {
    sink_frames = 1;
  }
  std::size_t block_frames = pick(rng, 1, frames);
  c.config = make_method(preset, frames, sink_frames, block_frames);
  if (preset == Preset::kApe) {
    const double temps[] = {0.5, 1.0, 2.0};
    c.config.temperature = temps[rng() % 3];
  }
  // both position modes must appear under every preset
  const bool flip_mode =
      shape.position_mode >= 0
          ? (shape.position_mode == 1) !=
                (c.config.position_mode == PositionMode::kReusedPerBlock)
          : rng() % 2 == 0;
  if (flip_mode) {
    c.config.position_mode = c.config.position_mode == PositionMode::kSequential
                                 ? PositionMode::kReusedPerBlock
                                 : PositionMode::kSequential;
  }
  c.config.scheme = mrope ? RopeScheme::kMRope3D : RopeScheme::kRope1D;

  c.heads = HeadLayout{pick(rng, 1, 4), 8};
  c.layers = pick(rng, 1, 2);
  c.state_seed = rng();
  return c;
}

double engine_oracle_diff32(const VerifyCase& c, bool fault) {
  return oracle_diff<float>(c, fault);
}

double engine_oracle_diff64(const VerifyCase& c, bool fault) {
  return oracle_diff<double>(c, fault);
}

std::vector<CheckResult> run_verification(const VerifyOptions& opts) {
  struct Named {
    const char* name;
    Check fn;
  };
  const Named checks[] = {
      {"softmax-row-sums", check_softmax_row_sums},
      {"softmax-shift-invariance", check_softmax_shift_invariance},
      {"rope-isometry", check_rope_isometry},
      {"rope-relative-position", check_rope_relative_position},
      {"mrope-slot-structure", check_mrope_slots},
      {"mask-structure", check_mask_structure},
      {"engine-vs-oracle", check_engine_vs_oracle},
      {"degenerate-collapse", check_degenerate_collapse},
      {"block-determinism", check_block_determinism},
      {"block-independence", check_block_independence},
      {"ape-identity", check_ape_identity},
      {"reuse-degeneracy", check_reuse_degeneracy},
      {"cost-formula-vs-mask", check_cost_formula_vs_mask},
      {"cost-simplification", check_cost_simplification},
      {"trace-moving-average", check_trace_moving_average},
      {"decode-oracle", check_decode_oracle},
  };
  std::vector<CheckResult> results;
  for (const Named& check : checks) {
    try {
      results.push_back(check.fn(opts));
    } catch (const std::exception& e) {
      results.push_back({check.name, false, std::string("exception: ") + e.what()});
    }
  }
  return results;
}

}  // namespace pevlm
