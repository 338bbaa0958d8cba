#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pevlm/attention.hpp"
#include "pevlm/layout.hpp"
#include "pevlm/matrix.hpp"
#include "pevlm/method.hpp"
#include "pevlm/positions.hpp"

namespace pevlm {

// Projected per-layer states; the engine never owns model weights.
template <typename Real>
struct LayerStates {
  MatrixT<Real> q, k, v;
};

// One layer of the KV cache. K rows are stored rotated, V rows raw; both are
// written exactly once per token.
template <typename Real>
struct CacheLayer {
  MatrixT<Real> k, v;
  std::size_t filled = 0;  // rows committed so far, in sequence order
};

template <typename Real>
struct KVCache {
  std::vector<CacheLayer<Real>> layers;
  std::size_t prefill_rows = 0;
  bool prefill_done = false;
  std::int64_t next_position = 0;

  std::size_t rows() const { return layers.empty() ? 0 : layers[0].k.rows(); }
};

// Execution order for the context-block phase. All orders produce bitwise
// identical results; the non-parallel ones exist for the determinism tests.
enum class BlockOrder { kParallel, kSerial, kReversed, kShuffled };

template <typename Real>
struct PrefillResult {
  KVCache<Real> cache;
  std::vector<MatrixT<Real>> outputs;  // per layer, L x H attention outputs
  // Head-averaged question attention weights (question rows x L), filled
  // only when requested.
  MatrixT<double> question_weights;
};

struct PrefillOptions {
  BlockOrder order = BlockOrder::kParallel;
  std::uint64_t shuffle_seed = 0;
  bool capture_question_weights = false;
  std::size_t trace_layer = 0;
};

namespace detail {

// Contiguous run of cache rows a query may attend: either fully (the run
// precedes the query) or causally (the query sits inside the run).
struct KeySegment {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool causal = false;
};

// Attends one query row (global index `row`) over the segments, writing one
// output row and optionally head-averaged weights. Key order is globally
// ascending, matching the dense-mask oracle.
template <typename Real>
void attend_row(const MatrixT<Real>& q_rot, std::size_t row,
                const MatrixT<Real>& k_src, const MatrixT<Real>& v_src,
                const KeySegment* segs, std::size_t n_segs,
                const HeadLayout& heads, Real temperature, Real* out_row,
                std::vector<Real>& logits, MatrixT<double>* capture,
                std::size_t capture_row) {
  const std::size_t d = heads.head_dim;
  const Real inv_sqrt_d = Real(1) / std::sqrt(Real(d));

  for (std::size_t h = 0; h < heads.num_heads; ++h) {
    const std::size_t off = h * d;
    const Real* q = q_rot.row(row) + off;
    logits.clear();
    for (std::size_t s = 0; s < n_segs; ++s) {
      const std::size_t hi =
          segs[s].causal ? std::min(segs[s].end, row + 1) : segs[s].end;
      for (std::size_t j = segs[s].begin; j < hi; ++j) {
        logits.push_back(dot(q, k_src.row(j) + off, d) * inv_sqrt_d);
      }
    }
    if (logits.empty()) throw std::invalid_argument("unattended query");
    softmax_inplace(logits.data(), logits.size(), temperature);

    Real* o = out_row + off;
    std::size_t idx = 0;
    for (std::size_t s = 0; s < n_segs; ++s) {
      const std::size_t hi =
          segs[s].causal ? std::min(segs[s].end, row + 1) : segs[s].end;
      for (std::size_t j = segs[s].begin; j < hi; ++j, ++idx) {
        axpy(o, v_src.row(j) + off, d, logits[idx]);
        if (capture) {
          capture->at(capture_row, j) +=
              static_cast<double>(logits[idx]) / heads.num_heads;
        }
      }
    }
  }
}

}  // namespace detail

// Executes the block-parallel prefill: sink encoding, independent context
// block encoding, question phase, then single-token decode steps against the
// assembled cache.
template <typename Real>
class Engine {
 public:
  Engine(const SequenceLayout& layout, const MethodConfig& config,
         const HeadLayout& heads)
      : layout_(layout),
        config_(config),
        heads_(heads),
        part_(config.frame_aligned
                  ? partition(layout, config.effective_sink_frames(),
                              config.block_frames)
                  : partition_by_tokens(
                        layout, config.effective_sink_frames(),
                        config.block_tokens > 0
                            ? config.block_tokens
                            : config.block_frames * layout.tokens_per_frame)) {
    if (!(config.temperature > 0)) {
      throw std::invalid_argument("temperature must be > 0");
    }
    if (heads.head_dim % 2 != 0) {
      throw std::invalid_argument("rotary requires an even head dim");
    }
    const bool needs_sink = config.preset == Preset::kPevlm ||
                            config.preset == Preset::kApe ||
                            config.preset == Preset::kStar;
    if (needs_sink && part_.sink.empty()) {
      throw std::invalid_argument("preset requires a non-empty sink block");
    }
    if (config.sink_mode == SinkMode::kAnchorFirstBlock &&
        part_.context_blocks.empty()) {
      throw std::invalid_argument("anchor mode requires at least one context block");
    }
    if (config.scheme == RopeScheme::kMRope3D) {
      split_ = MRopeSplit::default_for(heads.head_dim);
    }
    map_ = assign_positions(part_, layout_, config.position_mode,
                            config.scheme, config.rope_base, config.grid_h,
                            config.grid_w);
  }

  const BlockPartition& blocks() const { return part_; }
  const PositionMap& positions() const { return map_; }
  const SequenceLayout& layout() const { return layout_; }
  const MethodConfig& config() const { return config_; }
  const HeadLayout& heads() const { return heads_; }

  // Rotates Q and K in place, head slice by head slice. V is left untouched.
  void rotate(LayerStates<Real>& states) const {
    rotate_matrix(states.q, map_.slice({0, layout_.total()}));
    rotate_matrix(states.k, map_.slice({0, layout_.total()}));
  }

  // Causal self-attention over the sink tokens; KV rows stored.
  void encode_sink(const LayerStates<Real>& rotated, CacheLayer<Real>& cache,
                   MatrixT<Real>& out) const {
    commit_rows(rotated, cache, part_.sink);
    cache.filled = std::max(cache.filled, part_.sink.end);
    detail::KeySegment seg{part_.sink.begin, part_.sink.end, true};
    attend_span(rotated.q, part_.sink, cache, &seg, 1, out, nullptr);
  }

  // Encodes context block i against the sink (and, in anchor mode, the first
  // block). Output and KV rows depend on no other block.
  void encode_context_block(std::size_t i, const LayerStates<Real>& rotated,
                            CacheLayer<Real>& cache, MatrixT<Real>& out) const {
    if (cache.filled < part_.sink.end) {
      throw std::runtime_error("sink KV must be encoded before context blocks");
    }
    if (anchored() && i > 0 && cache.filled < part_.context_blocks[0].end) {
      throw std::runtime_error("anchor block KV must be committed first");
    }
    commit_rows(rotated, cache, part_.context_blocks.at(i));
    cache.filled = std::max(cache.filled, part_.context_blocks[i].end);
    attend_block(i, rotated, cache, out);
  }

  // Encodes every context block. KV rows are committed up front, serially;
  // the attention pass then runs in the requested order. Each row's result
  // is a pure function of committed state, so every order is bitwise equal.
  void encode_all_blocks(const LayerStates<Real>& rotated,
                         CacheLayer<Real>& cache, MatrixT<Real>& out,
                         BlockOrder order = BlockOrder::kParallel,
                         std::uint64_t shuffle_seed = 0) const {
    if (cache.filled < part_.sink.end) {
      throw std::runtime_error("sink KV must be encoded before context blocks");
    }
    if (part_.context_blocks.empty()) return;
    for (const TokenRange& blk : part_.context_blocks) {
      commit_rows(rotated, cache, blk);
    }
    cache.filled = std::max(cache.filled, part_.context_blocks.back().end);

    const std::size_t row0 = part_.context_blocks.front().begin;
    const std::size_t row1 = part_.context_blocks.back().end;
    const std::size_t n_rows = row1 - row0;

    // row -> owning block, for flat row-level scheduling
    std::vector<std::uint32_t> owner(n_rows);
    for (std::uint32_t b = 0; b < part_.context_blocks.size(); ++b) {
      const TokenRange& blk = part_.context_blocks[b];
      for (std::size_t r = blk.begin; r < blk.end; ++r) owner[r - row0] = b;
    }

    std::string error;
    bool failed = false;
    auto run_row = [&](std::size_t idx, std::vector<Real>& logits) {
      const std::uint32_t b = owner[idx];
      detail::KeySegment segs[3];
      const std::size_t n_segs = block_segments(b, segs);
      try {
        detail::attend_row(rotated.q, row0 + idx, cache.k, cache.v, segs,
                           n_segs, heads_, static_cast<Real>(config_.temperature),
                           out.row(row0 + idx), logits, nullptr, 0);
      } catch (const std::exception& e) {
#pragma omp critical
        {
          if (!failed) {
            failed = true;
            error = "context block " + std::to_string(b) + ": " + e.what();
          }
        }
      }
    };

    switch (order) {
      case BlockOrder::kParallel: {
#pragma omp parallel
        {
          std::vector<Real> logits;
#pragma omp for schedule(dynamic, 16)
          for (std::size_t idx = 0; idx < n_rows; ++idx) run_row(idx, logits);
        }
        break;
      }
      case BlockOrder::kSerial: {
        std::vector<Real> logits;
        for (std::size_t idx = 0; idx < n_rows; ++idx) run_row(idx, logits);
        break;
      }
      case BlockOrder::kReversed: {
        std::vector<Real> logits;
        for (std::size_t idx = n_rows; idx-- > 0;) run_row(idx, logits);
        break;
      }
      case BlockOrder::kShuffled: {
        std::vector<std::size_t> perm(n_rows);
        std::iota(perm.begin(), perm.end(), std::size_t(0));
        std::mt19937_64 rng(shuffle_seed);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<Real> logits;
        for (std::size_t idx : perm) run_row(idx, logits);
        break;
      }
    }
    if (failed) throw std::runtime_error(error);
  }

  // Question tokens attend every cached key plus themselves causally; their
  // KV rows complete the prefill cache.
  void answer_question(const LayerStates<Real>& rotated,
                       CacheLayer<Real>& cache, MatrixT<Real>& out,
                       MatrixT<double>* capture = nullptr) const {
    if (cache.filled < part_.question.begin) {
      throw std::runtime_error("KV cache incomplete before question phase");
    }
    if (part_.question.empty()) return;
    commit_rows(rotated, cache, part_.question);
    cache.filled = std::max(cache.filled, part_.question.end);
    detail::KeySegment segs[2];
    std::size_t n_segs = 0;
    if (part_.question.begin > 0) {
      segs[n_segs++] = {0, part_.question.begin, false};
    }
    segs[n_segs++] = {part_.question.begin, part_.question.end, true};
    attend_span(rotated.q, part_.question, cache, segs, n_segs, out, capture);
  }

  // Runs the full pipeline per layer over raw (unrotated) states.
  PrefillResult<Real> prefill(const std::vector<LayerStates<Real>>& raw,
                              const PrefillOptions& opts = {}) const {
    if (raw.empty()) throw std::invalid_argument("prefill needs >= 1 layer");
    const std::size_t total = layout_.total();
    const std::size_t hidden = heads_.hidden();
    for (const LayerStates<Real>& s : raw) {
      require_shape(s.q, total, hidden, "prefill Q");
      require_shape(s.k, total, hidden, "prefill K");
      require_shape(s.v, total, hidden, "prefill V");
      require_finite(s.q, "prefill Q");
      require_finite(s.k, "prefill K");
      require_finite(s.v, "prefill V");
    }

    PrefillResult<Real> result;
    result.cache.layers.resize(raw.size());
    result.outputs.resize(raw.size());
    if (opts.capture_question_weights) {
      if (opts.trace_layer >= raw.size()) {
        throw std::invalid_argument("trace layer out of range");
      }
      result.question_weights = MatrixT<double>(part_.question.size(), total);
    }

    for (std::size_t layer = 0; layer < raw.size(); ++layer) {
      LayerStates<Real> rotated = raw[layer];
      rotate(rotated);

      CacheLayer<Real>& cache = result.cache.layers[layer];
      cache.k = MatrixT<Real>(total, hidden);
      cache.v = MatrixT<Real>(total, hidden);
      MatrixT<Real>& out = result.outputs[layer];
      out = MatrixT<Real>(total, hidden);

      encode_sink(rotated, cache, out);
      encode_all_blocks(rotated, cache, out, opts.order, opts.shuffle_seed);
      MatrixT<double>* capture =
          opts.capture_question_weights && layer == opts.trace_layer
              ? &result.question_weights
              : nullptr;
      answer_question(rotated, cache, out, capture);
    }

    result.cache.prefill_rows = total;
    result.cache.prefill_done = true;
    result.cache.next_position = map_.next_id;
    return result;
  }

  // Appends one token to every layer of the cache and returns its per-layer
  // attention outputs. The token takes the next sequential position id.
  std::vector<MatrixT<Real>> decode_step(
      const std::vector<LayerStates<Real>>& token, KVCache<Real>& cache) const {
    if (!cache.prefill_done) {
      throw std::runtime_error("decode_step called before prefill");
    }
    if (token.size() != cache.layers.size()) {
      throw std::invalid_argument("decode_step: layer count mismatch");
    }
    const TokenPos pos{cache.next_position, cache.next_position,
                       cache.next_position};
    std::vector<MatrixT<Real>> outputs(token.size());
    for (std::size_t layer = 0; layer < token.size(); ++layer) {
      const LayerStates<Real>& t = token[layer];
      require_shape(t.q, 1, heads_.hidden(), "decode Q");
      require_shape(t.k, 1, heads_.hidden(), "decode K");
      require_shape(t.v, 1, heads_.hidden(), "decode V");

      MatrixT<Real> q_rot = t.q;
      MatrixT<Real> k_rot = t.k;
      std::span<const TokenPos> pspan(&pos, 1);
      rotate_matrix(q_rot, pspan);
      rotate_matrix(k_rot, pspan);

      CacheLayer<Real>& cl = cache.layers[layer];
      cl.k.append_row(k_rot.row_span(0));
      cl.v.append_row(t.v.row_span(0));
      cl.filled = cl.k.rows();

      detail::KeySegment seg{0, cl.k.rows(), false};
      outputs[layer] = MatrixT<Real>(1, heads_.hidden());
      std::vector<Real> logits;
      detail::attend_row(q_rot, std::size_t(0), cl.k, cl.v, &seg, 1, heads_,
                         static_cast<Real>(config_.temperature),
                         outputs[layer].row(0), logits, nullptr, 0);
    }
    ++cache.next_position;
    return outputs;
  }

 private:
  bool anchored() const {
    return config_.sink_mode == SinkMode::kAnchorFirstBlock;
  }

  void attend_block(std::size_t i, const LayerStates<Real>& rotated,
                    const CacheLayer<Real>& cache, MatrixT<Real>& out) const {
    detail::KeySegment segs[3];
    const std::size_t n_segs = block_segments(i, segs);
    attend_span(rotated.q, part_.context_blocks[i], cache, segs, n_segs, out,
                nullptr);
  }

  // Key segments for context block b, in ascending global order.
  std::size_t block_segments(std::size_t b, detail::KeySegment* segs) const {
    std::size_t n = 0;
    if (config_.sink_mode != SinkMode::kNone && !part_.sink.empty()) {
      segs[n++] = {part_.sink.begin, part_.sink.end, false};
    }
    if (anchored() && b > 0) {
      segs[n++] = {part_.context_blocks[0].begin, part_.context_blocks[0].end,
                   false};
    }
    segs[n++] = {part_.context_blocks[b].begin, part_.context_blocks[b].end,
                 true};
    return n;
  }

  void commit_rows(const LayerStates<Real>& rotated, CacheLayer<Real>& cache,
                   const TokenRange& range) const {
    const std::size_t hidden = heads_.hidden();
    for (std::size_t r = range.begin; r < range.end; ++r) {
      std::copy_n(rotated.k.row(r), hidden, cache.k.row(r));
      std::copy_n(rotated.v.row(r), hidden, cache.v.row(r));
    }
  }

  void attend_span(const MatrixT<Real>& q_rot, const TokenRange& rows,
                   const CacheLayer<Real>& cache,
                   const detail::KeySegment* segs, std::size_t n_segs,
                   MatrixT<Real>& out, MatrixT<double>* capture) const {
    std::string error;
    bool failed = false;
#pragma omp parallel
    {
      std::vector<Real> logits;
#pragma omp for schedule(dynamic, 16)
      for (std::size_t r = rows.begin; r < rows.end; ++r) {
        try {
          detail::attend_row(q_rot, r, cache.k, cache.v, segs, n_segs, heads_,
                             static_cast<Real>(config_.temperature), out.row(r),
                             logits, capture, r - rows.begin);
        } catch (const std::exception& e) {
#pragma omp critical
          {
            if (!failed) {
              failed = true;
              error = e.what();
            }
          }
        }
      }
    }
    if (failed) throw std::runtime_error(error);
  }

  void rotate_matrix(MatrixT<Real>& m, std::span<const TokenPos> pos) const {
    const std::size_t d = heads_.head_dim;
    const MRopeSplit* split =
        config_.scheme == RopeScheme::kMRope3D ? &split_ : nullptr;
    for (std::size_t h = 0; h < heads_.num_heads; ++h) {
      detail::rotate_rows(m.data().data() + h * d, m.cols(), m.rows(), d, pos,
                          split, config_.rope_base);
    }
  }

  SequenceLayout layout_;
  MethodConfig config_;
  HeadLayout heads_;
  BlockPartition part_;
  PositionMap map_;
  MRopeSplit split_;
};

}  // namespace pevlm
