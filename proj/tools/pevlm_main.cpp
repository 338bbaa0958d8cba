// Command-line front end: verification suites, desk-scale benchmarks,
// attention-weight traces and cost sweeps. CSV goes to --out (or stdout);
// human-readable summaries go to stderr when stdout carries the CSV.
#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pevlm/costmodel.hpp"
#include "pevlm/engine.hpp"
#include "pevlm/synth.hpp"
#include "pevlm/trace.hpp"
#include "pevlm/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitUsage = 2;

struct Options {
  std::uint64_t seed = 42;
  bool float64 = false;
  std::string out;

  std::size_t sys_len = 4;
  std::size_t frames = 8;
  std::size_t tokens_per_frame = 16;
  std::size_t question_len = 8;

  std::string preset = "pevlm";
  std::size_t sink_frames = 1;
  std::size_t block_frames = 2;
  std::string position_mode;  // empty = preset default
  std::string scheme = "rope1d";
  double temperature = 1.0;
  std::size_t window = 64;
  double rope_base = 10000.0;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;

  bool split_by_tokens = false;
  std::size_t block_tokens = 0;

  std::size_t heads = 1;
  std::size_t hidden = 64;
  std::size_t layers = 1;

  std::size_t repeat = 5;
  std::string sweep = "none";
  std::vector<std::size_t> sweep_values;

  std::size_t verify_configs = 30;
  bool inject_fault = false;

  std::vector<std::size_t> sink_frames_list;
  std::vector<std::size_t> block_frames_list;
  double budget_seconds = 0.0;
  double throughput = 0.0;

  std::size_t trace_layer = 0;

  bool temperature_given = false;
  bool position_mode_given = false;
  bool sink_frames_given = false;
  bool block_frames_given = false;
};

pevlm::SequenceLayout layout_from(const Options& o) {
  return pevlm::build_layout(o.sys_len, o.frames, o.tokens_per_frame,
                             o.question_len);
}

pevlm::MethodConfig method_from(const Options& o) {
  pevlm::MethodConfig cfg = pevlm::make_method(
      pevlm::parse_preset(o.preset), o.frames, o.sink_frames, o.block_frames,
      o.temperature_given ? o.temperature : 1.0);
  if (o.position_mode_given) {
    cfg.position_mode = pevlm::parse_position_mode(o.position_mode);
  }
  if (o.temperature_given) cfg.temperature = o.temperature;
  cfg.scheme = pevlm::parse_scheme(o.scheme);
  cfg.rope_base = o.rope_base;
  cfg.grid_h = o.grid_h;
  cfg.grid_w = o.grid_w;
  cfg.frame_aligned = !o.split_by_tokens;
  cfg.block_tokens = o.block_tokens;
  return cfg;
}

// Stream pair: CSV destination plus the summary stream that never collides
// with it.
struct OutStreams {
  std::unique_ptr<std::ofstream> file;
  std::ostream* csv = nullptr;
  std::ostream* info = nullptr;
};

OutStreams open_streams(const Options& o) {
  OutStreams s;
  if (!o.out.empty()) {
    s.file = std::make_unique<std::ofstream>(o.out);
    if (!*s.file) throw std::runtime_error("cannot open output file: " + o.out);
    s.csv = s.file.get();
    s.info = &std::cout;
  } else {
    s.csv = &std::cout;
    s.info = &std::cerr;
  }
  return s;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int cmd_verify(const Options& o) {
  pevlm::VerifyOptions vo;
  vo.seed = o.seed;
  vo.float64 = o.float64;
  vo.inject_fault = o.inject_fault;
  vo.num_configs = o.verify_configs;
  const auto results = pevlm::run_verification(vo);
  bool all_passed = true;
  for (const pevlm::CheckResult& r : results) {
    std::printf("%s %-26s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str());
    all_passed = all_passed && r.passed;
  }
  std::printf("%zu/%zu checks passed (%s precision)\n",
              static_cast<std::size_t>(
                  std::count_if(results.begin(), results.end(),
                                [](const auto& r) { return r.passed; })),
              results.size(), o.float64 ? "64-bit" : "32-bit");
  return all_passed ? kExitOk : kExitVerifyFailure;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

template <typename Real>
double median_attention_ms(const pevlm::Engine<Real>& engine,
                           const std::vector<pevlm::LayerStates<Real>>& raw,
                           std::size_t repeat) {
  using clock = std::chrono::steady_clock;
  const std::size_t total = engine.layout().total();
  const std::size_t hidden = engine.heads().hidden();

  std::vector<pevlm::LayerStates<Real>> rotated = raw;
  for (auto& layer : rotated) engine.rotate(layer);

  pevlm::CacheLayer<Real> cache;
  cache.k = pevlm::MatrixT<Real>(total, hidden);
  cache.v = pevlm::MatrixT<Real>(total, hidden);
  pevlm::MatrixT<Real> out(total, hidden);

  std::vector<double> times;
  // one warmup plus `repeat` timed runs, strictly one at a time
  for (std::size_t run = 0; run < repeat + 1; ++run) {
    const auto t0 = clock::now();
    for (const auto& layer : rotated) {
      cache.filled = 0;
      engine.encode_sink(layer, cache, out);
      engine.encode_all_blocks(layer, cache, out);
      engine.answer_question(layer, cache, out);
    }
    const auto t1 = clock::now();
    if (run == 0) continue;
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

template <typename Real>
int run_bench(const Options& o) {
  if (o.repeat < 3) {
    std::cerr << "bench requires --repeat >= 3\n";
    return kExitUsage;
  }
  const pevlm::SequenceLayout layout = layout_from(o);
  const pevlm::HeadLayout heads =
      pevlm::make_head_layout(o.hidden, o.heads);
  auto states = pevlm::random_states<Real>(o.seed, layout.total(), o.hidden,
                                           o.layers);

  std::vector<std::size_t> points = o.sweep_values;
  if (o.sweep == "none" || points.empty()) {
    points = {o.sweep == "sink-frames" ? o.sink_frames : o.block_frames};
  }

  pevlm::MethodConfig full_cfg =
      pevlm::make_method(pevlm::Preset::kFull, o.frames, 0, o.frames);
  full_cfg.scheme = pevlm::parse_scheme(o.scheme);
  pevlm::Engine<Real> full_engine(layout, full_cfg, heads);
  const double t_full = median_attention_ms(full_engine, states, o.repeat);
  if (t_full < 0.1) {
    std::cerr << "warning: timer resolution may be insufficient at this size "
                 "(full attention median "
              << t_full << " ms)\n";
  }

  OutStreams streams = open_streams(o);
  *streams.csv << "sink_frames,block_frames,L,H,op_full,op_pevlm,"
                  "predicted_speedup,t_full_ms,t_pevlm_ms,measured_speedup\n";

  for (std::size_t value : points) {
    Options point = o;
    if (o.sweep == "sink-frames") {
      point.sink_frames = value;
    } else if (o.sweep == "block-frames") {
      point.block_frames = value;
    }
    pevlm::MethodConfig cfg = method_from(point);
    pevlm::Engine<Real> engine(layout, cfg, heads);
    const double t_method = median_attention_ms(engine, states, o.repeat);

    const std::uint64_t ops_full =
        pevlm::op_full(layout.total(), heads.hidden());
    const std::uint64_t ops_method = pevlm::op_pevlm_layout(
        layout, cfg.effective_sink_frames(), cfg.block_frames, heads.hidden());
    const double predicted =
        static_cast<double>(ops_full) / static_cast<double>(ops_method);
    const double measured = t_full / t_method;

    *streams.csv << engine.blocks().sink_frames << ','
                 << engine.blocks().block_frames << ',' << layout.total() << ','
                 << heads.hidden() << ',' << ops_full << ',' << ops_method
                 << ',' << fmt_double(predicted) << ',' << fmt_double(t_full)
                 << ',' << fmt_double(t_method) << ','
                 << fmt_double(measured) << '\n';
    *streams.info << "bench: sink_frames=" << engine.blocks().sink_frames
                  << " block_frames=" << engine.blocks().block_frames
                  << " predicted=" << fmt_double(predicted)
                  << "x measured=" << fmt_double(measured) << "x ("
                  << fmt_double(t_full) << " ms vs " << fmt_double(t_method)
                  << " ms, median of " << o.repeat << ")\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// trace
// ---------------------------------------------------------------------------

template <typename Real>
int run_trace(const Options& o) {
  const pevlm::SequenceLayout layout = layout_from(o);
  const pevlm::HeadLayout heads = pevlm::make_head_layout(o.hidden, o.heads);
  pevlm::MethodConfig cfg = method_from(o);
  pevlm::Engine<Real> engine(layout, cfg, heads);
  auto states = pevlm::random_states<Real>(o.seed, layout.total(), o.hidden,
                                           o.layers);

  pevlm::MatrixT<double> weights;
  if (layout.question_len > 0) {
    pevlm::PrefillOptions po;
    po.capture_question_weights = true;
    po.trace_layer = o.trace_layer;
    auto run = engine.prefill(states, po);
    weights = run.question_weights;
  } else {
    // No question block: trace the final token's attention row instead.
    engine.prefill(states);
    pevlm::LayerStates<Real> rotated = states.at(o.trace_layer);
    engine.rotate(rotated);
    pevlm::MaskSpec mask = pevlm::encode_mask(engine.blocks(), cfg);
    const std::size_t row = layout.total() - 1;
    weights = pevlm::MatrixT<double>(1, layout.total());
    const std::size_t d = heads.head_dim;
    for (std::size_t h = 0; h < heads.num_heads; ++h) {
      std::vector<Real> logits;
      std::vector<std::size_t> keys;
      const Real inv_sqrt_d = Real(1) / std::sqrt(Real(d));
      for (std::size_t j = 0; j < layout.total(); ++j) {
        if (!mask.allowed(row, j)) continue;
        keys.push_back(j);
        Real acc = Real(0);
        for (std::size_t c = 0; c < d; ++c) {
          acc += rotated.q.at(row, h * d + c) * rotated.k.at(j, h * d + c);
        }
        logits.push_back(acc * inv_sqrt_d);
      }
      auto probs = pevlm::stable_softmax<Real>(
          logits, static_cast<Real>(cfg.temperature));
      for (std::size_t i = 0; i < keys.size(); ++i) {
        weights.at(0, keys[i]) += double(probs[i]) / heads.num_heads;
      }
    }
  }

  pevlm::AttnTrace trace = pevlm::build_trace(weights, engine.blocks(), o.window);

  OutStreams streams = open_streams(o);
  *streams.csv << "token,segment,mean_weight,moving_avg\n";
  for (std::size_t k = 0; k < trace.mean_weight.size(); ++k) {
    *streams.csv << k << ',' << trace.segment[k] << ','
                 << fmt_double(trace.mean_weight[k]) << ','
                 << fmt_double(trace.moving_avg[k]) << '\n';
  }
  *streams.info << "trace: preset=" << pevlm::preset_name(cfg.preset)
                << " queries=" << trace.num_queries << " window=" << o.window
                << " layer=" << o.trace_layer
                << " mass=" << fmt_double(trace.total_mass) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// cost
// ---------------------------------------------------------------------------

int run_cost(const Options& o) {
  const pevlm::SequenceLayout layout = layout_from(o);

  std::vector<std::size_t> sinks = o.sink_frames_list;
  std::vector<std::size_t> blocks = o.block_frames_list;
  if (sinks.empty()) sinks = {o.sink_frames};
  if (blocks.empty()) blocks = {o.block_frames};

  OutStreams streams = open_streams(o);
  *streams.csv << "S,B,N,Q,H,op_full,op_pevlm,predicted_speedup\n";
  for (std::size_t sf : sinks) {
    for (std::size_t bf : blocks) {
      const pevlm::BlockPartition part = pevlm::partition(layout, sf, bf);
      try {
        const std::uint64_t ops_method =
            pevlm::op_pevlm_layout(layout, sf, bf, o.hidden);
        const std::uint64_t ops_full =
            pevlm::op_full(layout.total(), o.hidden);
        const double speedup = ops_method == 0
                                   ? 0.0
                                   : static_cast<double>(ops_full) /
                                         static_cast<double>(ops_method);
        *streams.csv << part.sink.size() << ','
                     << bf * layout.tokens_per_frame << ','
                     << part.context_blocks.size() << ','
                     << part.question.size() << ',' << o.hidden << ','
                     << ops_full << ',' << ops_method << ','
                     << fmt_double(speedup) << '\n';
      } catch (const std::overflow_error& e) {
        *streams.csv << part.sink.size() << ','
                     << bf * layout.tokens_per_frame << ','
                     << part.context_blocks.size() << ','
                     << part.question.size() << ',' << o.hidden
                     << ",overflow,overflow,overflow\n";
        *streams.info << "cost: overflow at sink_frames=" << sf
                      << " block_frames=" << bf << ": " << e.what() << "\n";
      }
    }
  }

  if (o.budget_seconds > 0.0 && o.throughput > 0.0) {
    std::vector<pevlm::BudgetCandidate> grid;
    for (std::size_t sf : sinks) {
      for (std::size_t bf : blocks) grid.push_back({sf, bf});
    }
    auto ranked = pevlm::latency_budget_search(o.budget_seconds, o.throughput,
                                               layout, grid, o.hidden);
    std::size_t feasible = 0;
    for (const pevlm::BudgetEntry& e : ranked) feasible += e.feasible ? 1 : 0;
    *streams.info << "budget search: " << feasible << "/" << ranked.size()
                  << " configs feasible under " << o.budget_seconds << " s\n";
    if (feasible == 0) {
      *streams.info << "budget search: empty feasible set\n";
    }
    for (const pevlm::BudgetEntry& e : ranked) {
      *streams.info << "  " << (e.feasible ? "feasible  " : "infeasible")
                    << " sink_frames=" << e.sink_frames
                    << " block_frames=" << e.block_frames << " ops=" << e.ops
                    << " est_latency=" << fmt_double(e.est_latency_s) << " s\n";
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"block-parallel attention prefill testbed"};
  app.require_subcommand(1);

  Options o;
  app.set_config("--config");
  app.add_option("--seed", o.seed, "random seed for synthetic states");
  app.add_flag("--float64", o.float64, "run in 64-bit precision");
  app.add_option("--out", o.out, "output CSV path (default: stdout)");

  app.add_option("--sys-len", o.sys_len, "system prompt tokens");
  app.add_option("--frames", o.frames, "video frame count");
  app.add_option("--tokens-per-frame", o.tokens_per_frame, "tokens per frame");
  app.add_option("--question-len", o.question_len, "question tokens");

  app.add_option("--preset", o.preset, "full|pevlm|ape|star|block");
  auto* sink_opt =
      app.add_option("--sink-frames", o.sink_frames, "frames in the sink block");
  auto* block_opt = app.add_option("--block-frames", o.block_frames,
                                   "frames per context block");
  auto* pos_opt = app.add_option("--position-mode", o.position_mode,
                                 "sequential|reused (default: preset)");
  app.add_option("--scheme", o.scheme, "rope1d|mrope3d");
  auto* temp_opt =
      app.add_option("--temperature", o.temperature, "attention temperature");
  app.add_option("--window", o.window, "trace moving-average window");
  app.add_option("--rope-base", o.rope_base, "rotary base");
  app.add_option("--grid-h", o.grid_h, "visual grid height (0 = derive)");
  app.add_option("--grid-w", o.grid_w, "visual grid width (0 = derive)");
  app.add_flag("--split-by-tokens", o.split_by_tokens,
               "ablation: cut context blocks by token count, not frames");
  app.add_option("--block-tokens", o.block_tokens,
                 "tokens per context block when splitting by tokens");

  app.add_option("--heads", o.heads, "attention heads");
  app.add_option("--hidden", o.hidden, "hidden size");
  app.add_option("--layers", o.layers, "toy layer count");

  app.add_option("--repeat", o.repeat, "bench repeats (median reported)");
  app.add_option("--sweep", o.sweep, "none|block-frames|sink-frames");
  app.add_option("--sweep-values", o.sweep_values, "sweep points")
      ->delimiter(',');

  app.add_option("--configs", o.verify_configs, "verify: random config count");
  app.add_flag("--inject-fault", o.inject_fault,
               "verify: flip one oracle mask bit (suite must fail)");

  app.add_option("--sink-frames-list", o.sink_frames_list,
                 "cost: sink_frames sweep")
      ->delimiter(',');
  app.add_option("--block-frames-list", o.block_frames_list,
                 "cost: block_frames sweep")
      ->delimiter(',');
  app.add_option("--budget-seconds", o.budget_seconds,
                 "cost: latency budget for the config search");
  app.add_option("--throughput", o.throughput,
                 "cost: sustained attention throughput in ops/s");

  app.add_option("--trace-layer", o.trace_layer, "trace: layer to aggregate");

  CLI::App* verify = app.add_subcommand("verify", "run the verification suite");
  CLI::App* bench =
      app.add_subcommand("bench", "wall-time full vs block-parallel attention");
  CLI::App* trace = app.add_subcommand("trace", "received-attention trace CSV");
  CLI::App* cost = app.add_subcommand("cost", "operation-count sweep CSV");
  for (CLI::App* sub : {verify, bench, trace, cost}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  o.temperature_given = temp_opt->count() > 0;
  o.position_mode_given = pos_opt->count() > 0;
  o.sink_frames_given = sink_opt->count() > 0;
  o.block_frames_given = block_opt->count() > 0;

  try {
    if (verify->parsed()) return cmd_verify(o);
    if (bench->parsed()) {
      return o.float64 ? run_bench<double>(o) : run_bench<float>(o);
    }
    if (trace->parsed()) {
      return o.float64 ? run_trace<double>(o) : run_trace<float>(o);
    }
    if (cost->parsed()) return run_cost(o);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerifyFailure;
  }
  return kExitUsage;
}
