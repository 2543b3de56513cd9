/* Copyright 2026 The pdshard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Runs every acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion. Exit status is the number of failures.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "pdshard/optimizer.hpp"
#include "pdshard/perf_model.hpp"
#include "pdshard/sim_engine.hpp"
#include "test_support.hpp"

using namespace pdshard;
using namespace pdshard::testing;

namespace {

constexpr perf::CostMode kRoof = perf::CostMode::kRoofline;

// Every simulated report is replayed; criterion 9 reports the tally.
struct ReplayTally {
  int reports = 0;
  int failures = 0;
  std::string first_violation;
} tally;

sim::SimReport track(sim::SimReport r) {
  ++tally.reports;
  const sim::ReplayVerdict v = sim::replay_check(r);
  if (!v.ok && tally.failures++ == 0) tally.first_violation = v.violation;
  return r;
}

sim::SimReport run(const ModelSpec& m, const HardwareSpec& hw, const std::vector<Request>& w,
                   sim::Policy policy, const ParallelismConfig& p, const ParallelismConfig& d,
                   const sim::SimOptions& opt = {}) {
  return track(sim::simulate(m, hw, w, policy, p, d, opt));
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Outcome& o) {
  std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
  if (!o.pass) ++failures;
}

Outcome stage_preference() {
  const ModelSpec m = model_34b();
  const HardwareSpec hw = hw_a10(4);
  const double b = 8, s = 1024;
  const ParallelismConfig pp4{1, 4, 1}, tp4{4, 1, 1};
  const double prefill_ratio = perf::stage_time(m, hw, tp4, b, s, perf::Phase::kPrefill, kRoof) /
                               perf::stage_time(m, hw, pp4, b, s, perf::Phase::kPrefill, kRoof);
  // tokens/s is the reciprocal of throughput_inverse.
  const double decode_ratio =
      perf::throughput_inverse(m, hw, pp4, b, s, perf::Phase::kDecode, kRoof) /
      perf::throughput_inverse(m, hw, tp4, b, s, perf::Phase::kDecode, kRoof);
  return {prefill_ratio >= 1.2 && decode_ratio >= 1.2,
          fmt::format("b={} s={}: prefill tp4/pp4 stage {:.3f}x, decode tp4/pp4 tokens/s {:.3f}x "
                      "(need >= 1.2 each)",
                      b, s, prefill_ratio, decode_ratio)};
}

Outcome max_batch() {
  const std::int64_t anchor = max_batch_size(model_70b(), hw_40gib(4), {4, 1, 1}, 4096);
  Gen gen(0xacce55);
  int checked = 0, bad = 0;
  for (int i = 0; i < 2000 && checked < 250; ++i) {
    const ModelSpec m = gen.model();
    const std::int64_t tp = gen.pick<std::int64_t>({1, 2, 4, 8});
    const std::int64_t pp = gen.pick<std::int64_t>({1, 2, 4});
    if (m.num_kv_heads % tp != 0 || m.num_layers % (2 * pp) != 0) continue;
    const std::int64_t seq = gen.range(1, 8192);
    if (total_weight_bytes(m) < kv_bytes_per_token(m) * static_cast<Bytes>(seq)) continue;
    HardwareSpec base = gen.hardware(tp * pp);
    if (base.gpu_memory * static_cast<Bytes>(tp * pp) < total_weight_bytes(m)) {
      base.gpu_memory = total_weight_bytes(m) / static_cast<Bytes>(tp * pp) + kGiB;
    }
    const std::int64_t b1 = max_batch_size(m, base, {tp, pp, 1}, seq);
    const std::int64_t k = gen.range(2, 4);
    HardwareSpec wide = base;
    wide.num_gpus = tp * pp * k;
    HardwareSpec deep = base;
    deep.num_gpus = tp * pp * 2;
    const bool linear = max_batch_size(m, wide, {tp, pp, k}, seq) == k * b1;
    const bool super = max_batch_size(m, deep, {tp, 2 * pp, 1}, seq) > 2 * b1;
    if (!linear || !super) ++bad;
    ++checked;
  }
  return {anchor == 16 && checked >= 200 && bad == 0,
          fmt::format("70B on 40 GiB tp4 s=4096 gives {} (need 16); {} random cases, {} violate "
                      "DP linearity or TP*PP super-linearity",
                      anchor, checked, bad)};
}

Outcome disaggregation_mismatch() {
  const ModelSpec m = model_70b();
  // Chat-like shape: input and output of comparable length.
  const opt::WorkloadShape shape{1024, 1024, 2000};
  auto best = [&](const HardwareSpec& hw, bool prefill) {
    double t = 1e300;
    for (const auto& cfg : opt::enumerate_configs(m, hw)) {
      if (opt::objective_batch(m, hw, cfg, shape) < 1) continue;
      t = std::min(t, prefill ? opt::prefill_seconds_per_request(m, hw, cfg, shape)
                              : opt::decode_seconds_per_request(m, hw, cfg, shape));
    }
    return t;
  };
  const double prefill4 = best(hw_40gib(4), true);
  const double decode4 = best(hw_40gib(4), false);
  const double decode8 = best(hw_40gib(8), false);
  const double mismatch = decode4 / prefill4;
  const double share = decode8 / decode4;
  return {mismatch > 3.0 && share < 0.35,
          fmt::format("prefill/decode throughput on 4 GPUs {:.2f}x (need > 3); decode 4 vs 8 GPUs "
                      "{:.1f}% (need < 35%)",
                      mismatch, 100 * share)};
}

Outcome closed_form() {
  Gen gen(404);
  int cases = 0, outside = 0;
  double worst = 0.0;
  for (int i = 0; i < 30; ++i) {
    const ModelSpec m = model_e();
    HardwareSpec hw = hw_e(4);
    hw.host_link_bandwidth = 1e30;
    const std::vector<ParallelismConfig> configs = {{1, 4, 1}, {2, 2, 1}, {4, 1, 1},
                                                    {1, 2, 2}, {2, 1, 2}, {1, 1, 4}};
    const ParallelismConfig cfg = gen.pick(configs);
    const std::int64_t in = gen.range(64, 1024), out = gen.range(16, 128);
    const std::int64_t batch = cfg.pp * cfg.dp * gen.range(1, 8);
    hw.gpu_memory = total_weight_bytes(m) / static_cast<Bytes>(cfg.tp * cfg.pp) +
                    kv_bytes_per_token(m) * static_cast<Bytes>((in + out) * batch) /
                        static_cast<Bytes>(cfg.gpus());
    sim::SimOptions opt;
    opt.overlap = false;
    opt.prefill_token_budget = 0;
    opt.mode = gen.range(0, 1) ? perf::CostMode::kAdditive : kRoof;
    const sim::SimReport r = run(m, hw, uniform(batch * gen.range(1, 3), in, out),
                                 sim::Policy::kDecodePrioritized, cfg, cfg, opt);
    const double b = static_cast<double>(batch);
    const double per_request =
        perf::throughput_inverse(m, hw, cfg, b, static_cast<double>(in), perf::Phase::kPrefill,
                                 opt.mode) +
        static_cast<double>(out) *
            perf::throughput_inverse(m, hw, cfg, b, static_cast<double>(in) + out / 2.0,
                                     perf::Phase::kDecode, opt.mode);
    const double predicted = static_cast<double>(out) / per_request;
    const double err = std::abs(r.tokens_per_second - predicted) / predicted;
    worst = std::max(worst, err);
    if (err > 0.05) ++outside;
    ++cases;
  }
  return {cases >= 20 && outside == 0,
          fmt::format("{} fixtures, worst relative error {:.4f}% (need <= 5%)", cases,
                      100 * worst)};
}

Outcome transition_law() {
  // Prompt 64 tokens (256 B), full 128 tokens (512 B).
  const sim::SimReport hand = run(tiny_model(), tiny_hw(1024, 1024), uniform(8, 64, 64),
                                  sim::Policy::kTransitionMinimizing, {1, 1, 1}, {1, 1, 1});
  Gen gen(505);
  int cases = 0, bad = 0;
  for (int i = 0; i < 200 && cases < 60; ++i) {
    const std::int64_t in = gen.range(1, 64), out = gen.range(1, 32);
    const Bytes k = 4 * static_cast<Bytes>(in);
    const std::int64_t per_host = gen.range(1, 6);
    const std::int64_t n = gen.range(per_host + 1, 5 * per_host + 3);
    const Bytes full = 4 * static_cast<Bytes>(in + out);
    const Bytes gpu_kv = full * static_cast<Bytes>(gen.range(1, 4));
    const Bytes cpu_kv = std::max<Bytes>(k * static_cast<Bytes>(per_host), full);
    if (cpu_kv % k != 0) continue;  // the law counts whole prompts per host fill
    const sim::SimReport r = run(tiny_model(), tiny_hw(gpu_kv, cpu_kv), uniform(n, in, out),
                                 sim::Policy::kTransitionMinimizing, {1, 1, 1}, {1, 1, 1});
    const std::int64_t phases = (static_cast<Bytes>(n) * k + cpu_kv - 1) / cpu_kv;
    if (r.transitions != 2 * phases - 1) ++bad;
    ++cases;
  }
  return {hand.transitions == 3 && cases >= 20 && bad == 0,
          fmt::format("hand oracle {} transitions (need 3); 2*ceil(n*k/C)-1 violated in {} of {} "
                      "random fixtures",
                      hand.transitions, bad, cases)};
}

Outcome overlap() {
  Gen gen(606);
  int cases = 0, slower = 0, bad_walls = 0;
  for (int i = 0; i < 100; ++i) {
    const Fixture f = random_fixture(gen);
    sim::SimOptions on, off;
    off.overlap = false;
    const sim::SimReport a =
        run(f.model, f.hw, f.work, sim::Policy::kTransitionMinimizing, f.cfg_p, f.cfg_d, on);
    const sim::SimReport b =
        run(f.model, f.hw, f.work, sim::Policy::kTransitionMinimizing, f.cfg_p, f.cfg_d, off);
    if (a.makespan > b.makespan * (1 + 1e-12)) ++slower;
    for (const auto& e : a.event_log) {
      if (e.kind == sim::EventKind::kPrefillStep && e.wall != std::max(e.compute, e.transfer)) {
        ++bad_walls;
      }
    }
    ++cases;
  }
  return {slower == 0 && bad_walls == 0,
          fmt::format("{} fixtures: {} slower with overlap, {} prefill steps with wall != "
                      "max(compute, transfer)",
                      cases, slower, bad_walls)};
}

Outcome mixed_dominance() {
  Gen gen(707);
  int cases = 0, worse = 0;
  for (int i = 0; i < 400 && cases < 200; ++i) {
    const ModelSpec m = gen.model();
    const HardwareSpec hw = gen.hardware(gen.pick<std::int64_t>({1, 2, 4, 8}));
    const opt::WorkloadShape shape{static_cast<double>(gen.range(16, 4096)),
                                   static_cast<double>(gen.range(1, 2048)), gen.range(1, 4000)};
    try {
      const auto s = opt::best_static(m, hw, shape);
      const auto x = opt::best_mixed(m, hw, shape);
      if (x.predicted_inverse_throughput > s.predicted_inverse_throughput) ++worse;
      ++cases;
    } catch (const Error&) {
      // No feasible config for this draw.
    }
  }

  const ModelSpec m = model_34b();
  const HardwareSpec hw = hw_a10(8);
  const std::int64_t n = 2000;
  const opt::WorkloadShape shape{1024, 1024, n};
  auto s = opt::best_static(m, hw, shape);
  auto x = opt::best_mixed(m, hw, shape);
  const auto w = uniform(n, 1024, 1024);
  track(opt::confirm_plan(m, hw, w, s));
  track(opt::confirm_plan(m, hw, w, x));
  const double gain = *x.simulated_tokens_per_second / *s.simulated_tokens_per_second;
  return {cases >= 100 && worse == 0 && x.cfg_p.tp < x.cfg_d.tp && gain >= 1.05,
          fmt::format("{} random fixtures, {} with mixed > static; A10x8 balanced: mixed {} -> {}, "
                      "static {}, simulated gain {:.3f}x (need tp_p < tp_d, >= 1.05x)",
                      cases, worse, to_string(x.cfg_p), to_string(x.cfg_d), to_string(s.cfg_p),
                      gain)};
}

Outcome sensitivity() {
  const HardwareSpec hw = hw_a10(8);
  const std::vector<double> grid = {0.1, 0.2, 0.5, 1, 2, 5, 10, 20, 50};
  // Summarization-like shape: inputs much longer than outputs.
  const auto net = opt::sweep(model_34b(), hw, {2048, 256, 500}, opt::SweepAxis::kAllReduceScale,
                              grid);
  bool monotone = true, dominated = true;
  std::string tps;
  for (size_t i = 0; i < net.size(); ++i) {
    const auto tp = net[i].static_plan.cfg_p.tp;
    tps += fmt::format("{}{}", i ? "," : "", tp);
    if (i > 0 && tp < net[i - 1].static_plan.cfg_p.tp) monotone = false;
    if (net[i].mixed_plan.predicted_inverse_throughput >
        net[i].static_plan.predicted_inverse_throughput) {
      dominated = false;
    }
  }
  const bool crossover = net.front().static_plan.cfg_p.tp < net.back().static_plan.cfg_p.tp;

  // Ratio 0 maps to one output token.
  const auto pd = opt::sweep(model_70b(), hw, {3000, 300, 500}, opt::SweepAxis::kPdRatio,
                             {0, 0.1, 0.2, 0.5, 1, 2});
  for (const auto& r : pd) {
    if (r.mixed_plan.predicted_inverse_throughput > r.static_plan.predicted_inverse_throughput) {
      dominated = false;
    }
  }
  const auto& p0 = pd.front();
  const double rel = std::abs(p0.mixed_plan.predicted_inverse_throughput -
                              p0.static_plan.predicted_inverse_throughput) /
                     p0.static_plan.predicted_inverse_throughput;
  return {monotone && crossover && dominated && rel <= 0.10 && p0.static_plan.cfg_p.tp == 1,
          fmt::format("static tp over all-reduce scale [{}] (need non-decreasing with a change); "
                      "mixed <= static at every point: {}; s_out=1 mixed vs static {:.2f}% "
                      "(need <= 10%), static {}",
                      tps, dominated ? "yes" : "no", 100 * rel, to_string(p0.static_plan.cfg_p))};
}

Outcome determinism() {
  Gen gen(909);
  int runs = 0, differ = 0;
  for (int i = 0; i < 20; ++i) {
    const Fixture f = random_fixture(gen);
    for (auto policy : {sim::Policy::kTransitionMinimizing, sim::Policy::kDecodePrioritized}) {
      sim::SimOptions opt;
      opt.seed = 42;
      opt.force_mixed = true;
      const auto a = run(f.model, f.hw, f.work, policy, f.cfg_p, f.cfg_d, opt);
      const auto b = run(f.model, f.hw, f.work, policy, f.cfg_p, f.cfg_d, opt);
      if (sim::events_to_csv(a.event_log) != sim::events_to_csv(b.event_log) ||
          sim::report_to_json(a, true) != sim::report_to_json(b, true)) {
        ++differ;
      }
      ++runs;
    }
  }
  return {differ == 0 && tally.failures == 0,
          fmt::format("{} repeated runs, {} differ; replay_check failed on {} of {} reports{}",
                      runs, differ, tally.failures, tally.reports,
                      tally.failures ? " (" + tally.first_violation + ")" : "")};
}

template <typename F>
void guarded(int id, const char* name, F&& f) {
  try {
    report(id, name, f());
  } catch (const std::exception& e) {
    report(id, name, {false, fmt::format("threw: {}", e.what())});
  }
}

}  // namespace

int main() {
  guarded(1, "stage-preference ordering", stage_preference);
  guarded(2, "max-batch formula", max_batch);
  guarded(3, "disaggregation mismatch", disaggregation_mismatch);
  guarded(4, "simulator matches closed form", closed_form);
  guarded(5, "transition-count law", transition_law);
  guarded(6, "overlap never slows the run", overlap);
  guarded(7, "mixed dominance", mixed_dominance);
  guarded(8, "sensitivity sweeps", sensitivity);
  // Runs last so its replay tally covers every report above.
  guarded(9, "determinism and conservation", determinism);
  return failures;
}
