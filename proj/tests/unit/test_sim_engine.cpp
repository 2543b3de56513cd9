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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "pdshard/perf_model.hpp"
#include "pdshard/sim_engine.hpp"
#include "test_support.hpp"

using namespace pdshard;
using namespace pdshard::sim;
using namespace pdshard::testing;

namespace {

std::int64_t count_kind(const SimReport& r, EventKind kind) {
  return std::count_if(r.event_log.begin(), r.event_log.end(),
                       [&](const Event& e) { return e.kind == kind; });
}

}  // namespace

TEST_CASE("unit request under decode-prioritized") {
  const ModelSpec m = model_e();
  const HardwareSpec hw = hw_e(1);
  const SimReport r =
      simulate(m, hw, uniform(1, 8, 1), Policy::kDecodePrioritized, {1, 1, 1}, {1, 1, 1});
  const double expected =
      perf::stage_time(m, hw, {1, 1, 1}, 1, 8, perf::Phase::kPrefill, perf::CostMode::kRoofline) +
      perf::stage_time(m, hw, {1, 1, 1}, 1, 8, perf::Phase::kDecode, perf::CostMode::kRoofline);
  CHECK(r.makespan == doctest::Approx(expected).epsilon(1e-12));
  CHECK(r.transitions == 1);
  CHECK(r.output_tokens == 1);
  CHECK(replay_check(r).ok);
}

TEST_CASE("unit request under transition-minimizing adds a swap round trip") {
  const ModelSpec m = model_e();
  const HardwareSpec hw = hw_e(1);
  const SimReport r =
      simulate(m, hw, uniform(1, 8, 1), Policy::kTransitionMinimizing, {1, 1, 1}, {1, 1, 1});
  const double swap = 8.0 * static_cast<double>(kv_bytes_per_token(m)) / hw.host_link_bandwidth;
  const double expected =
      perf::stage_time(m, hw, {1, 1, 1}, 1, 8, perf::Phase::kPrefill, perf::CostMode::kRoofline) +
      2 * swap +
      perf::stage_time(m, hw, {1, 1, 1}, 1, 8, perf::Phase::kDecode, perf::CostMode::kRoofline);
  CHECK(r.makespan == doctest::Approx(expected).epsilon(1e-12));
  CHECK(r.prefill_time + r.decode_time + r.reshard_time + r.stalled_transfer_time ==
        doctest::Approx(r.makespan).epsilon(1e-12));
  CHECK(replay_check(r).ok);
}

TEST_CASE("eight requests, host holds four, GPU holds two") {
  // Prompt 64 tokens (256 B), full 128 tokens (512 B).
  const HardwareSpec hw = tiny_hw(1024, 1024);
  const SimReport r = simulate(tiny_model(), hw, uniform(8, 64, 64),
                               Policy::kTransitionMinimizing, {1, 1, 1}, {1, 1, 1});
  CHECK(r.transitions == 3);
  CHECK(r.prefill_phases == 2);

  // Prefill steps grouped by the phase they ran in.
  std::vector<std::int64_t> per_phase;
  for (const auto& e : r.event_log) {
    if (e.kind == EventKind::kPhase && e.count == kPhasePrefill) per_phase.push_back(0);
    if (e.kind == EventKind::kPrefillStep) per_phase.back() += e.count;
  }
  CHECK(per_phase == std::vector<std::int64_t>{4, 4});
  CHECK(replay_check(r).ok);
}

TEST_CASE("transition law for homogeneous workloads") {
  Gen gen(11);
  for (int i = 0; i < 40; ++i) {
    const std::int64_t in = gen.range(1, 64);
    const std::int64_t out = gen.range(1, 32);
    const Bytes k = 4 * static_cast<Bytes>(in);
    const std::int64_t per_host = gen.range(1, 6);
    const std::int64_t n = gen.range(per_host + 1, 5 * per_host + 3);
    const Bytes full = 4 * static_cast<Bytes>(in + out);
    const Bytes gpu_kv = full * static_cast<Bytes>(gen.range(1, 4));
    const Bytes cpu_kv = std::max<Bytes>(k * static_cast<Bytes>(per_host), full);
    const std::int64_t m = static_cast<std::int64_t>(cpu_kv / k);
    if (static_cast<Bytes>(m) * k != cpu_kv) continue;  // law needs C to be a multiple of k
    const SimReport r = simulate(tiny_model(), tiny_hw(gpu_kv, cpu_kv), uniform(n, in, out),
                                 Policy::kTransitionMinimizing, {1, 1, 1}, {1, 1, 1});
    const std::int64_t phases = (n + m - 1) / m;
    CHECK(r.transitions == 2 * phases - 1);
    CHECK(replay_check(r).ok);
  }
}

TEST_CASE("requests that can never be buffered are rejected") {
  CHECK_THROWS_AS(simulate(tiny_model(), tiny_hw(4096, 100), uniform(1, 64, 64),
                           Policy::kTransitionMinimizing, {1, 1, 1}, {1, 1, 1}),
                  Error);
  CHECK_THROWS_AS(simulate(tiny_model(), tiny_hw(100, 4096), uniform(1, 64, 64),
                           Policy::kDecodePrioritized, {1, 1, 1}, {1, 1, 1}),
                  Error);
  CHECK_THROWS_AS(simulate(tiny_model(), tiny_hw(4096, 4096), {}, Policy::kDecodePrioritized,
                           {1, 1, 1}, {1, 1, 1}),
                  Error);
}

TEST_CASE("config combinations") {
  const ModelSpec m = model_e();
  const HardwareSpec hw = hw_e(4);
  const auto w = uniform(4, 32, 4);
  CHECK_THROWS_AS(simulate(m, hw, w, Policy::kPrefillPrioritized, {1, 4, 1}, {4, 1, 1}), Error);
  CHECK_THROWS_AS(simulate(m, hw, w, Policy::kTransitionMinimizing, {2, 1, 2}, {4, 1, 1}), Error);
  CHECK_THROWS_AS(simulate(m, hw, w, Policy::kTransitionMinimizing, {3, 1, 1}, {4, 1, 1}), Error);
  SimOptions forced;
  forced.force_mixed = true;
  CHECK_NOTHROW(simulate(m, hw, w, Policy::kPrefillPrioritized, {1, 4, 1}, {4, 1, 1}, forced));
}

TEST_CASE("overlap never slows the run and step walls follow the rule") {
  Gen gen(5);
  for (int i = 0; i < 40; ++i) {
    const Fixture f = random_fixture(gen);
    SimOptions on, off;
    off.overlap = false;
    const SimReport a = simulate(f.model, f.hw, f.work, Policy::kTransitionMinimizing, f.cfg_p,
                                 f.cfg_d, on);
    const SimReport b = simulate(f.model, f.hw, f.work, Policy::kTransitionMinimizing, f.cfg_p,
                                 f.cfg_d, off);
    CHECK(a.makespan <= b.makespan * (1 + 1e-12));
    for (const auto& e : a.event_log) {
      if (e.kind == EventKind::kPrefillStep) CHECK(e.wall == std::max(e.compute, e.transfer));
    }
    for (const auto& e : b.event_log) {
      if (e.kind == EventKind::kPrefillStep) {
        CHECK(e.wall == doctest::Approx(e.compute + e.transfer).epsilon(1e-12));
      }
    }
    for (const auto* r : {&a, &b}) {
      const ReplayVerdict v = replay_check(*r);
      CHECK_MESSAGE(v.ok, v.violation);
      CHECK(r->prefill_time + r->decode_time + r->reshard_time <= r->makespan * (1 + 1e-12));
      CHECK(r->prefill_time + r->decode_time + r->reshard_time + r->stalled_transfer_time ==
            doctest::Approx(r->makespan).epsilon(1e-9));
    }
  }
}

TEST_CASE("every policy conserves KV and tokens") {
  Gen gen(6);
  for (int i = 0; i < 30; ++i) {
    Fixture f = random_fixture(gen);
    SimOptions opt;
    opt.force_mixed = true;
    opt.layout = gen.range(0, 1) ? KVLayout::kNHD : KVLayout::kHND;
    opt.charge_p2p = gen.range(0, 1) == 1;
    opt.full_duplex = gen.range(0, 1) == 1;
    opt.mode = gen.range(0, 1) ? perf::CostMode::kAdditive : perf::CostMode::kRoofline;
    std::int64_t tokens = 0;
    for (const auto& r : f.work) tokens += r.output_len;
    for (Policy p : {Policy::kPrefillPrioritized, Policy::kDecodePrioritized,
                     Policy::kTransitionMinimizing}) {
      const SimReport r = simulate(f.model, f.hw, f.work, p, f.cfg_p, f.cfg_d, opt);
      const ReplayVerdict v = replay_check(r);
      CHECK_MESSAGE(v.ok, v.violation);
      CHECK(r.output_tokens == tokens);
      CHECK(count_kind(r, EventKind::kPrefillDone) == static_cast<std::int64_t>(f.work.size()));
      CHECK(count_kind(r, EventKind::kDecode) == tokens);
      CHECK(r.transitions >= 0);
    }
  }
}

TEST_CASE("determinism") {
  Gen gen(8);
  for (int i = 0; i < 10; ++i) {
    const Fixture f = random_fixture(gen);
    const SimReport a = simulate(f.model, f.hw, f.work, Policy::kTransitionMinimizing, f.cfg_p,
                                 f.cfg_d);
    const SimReport b = simulate(f.model, f.hw, f.work, Policy::kTransitionMinimizing, f.cfg_p,
                                 f.cfg_d);
    CHECK(a.event_log == b.event_log);
    CHECK(events_to_csv(a.event_log) == events_to_csv(b.event_log));
    CHECK(report_to_json(a, true) == report_to_json(b, true));
  }
}

TEST_CASE("policy orderings on homogeneous mixed-config workloads") {
  Gen gen(21);
  for (int i = 0; i < 40; ++i) {
    Fixture f = random_fixture(gen);
    if (f.cfg_p == f.cfg_d) f.cfg_d = f.cfg_p.tp == 4 ? ParallelismConfig{1, 4, 1}
                                                      : ParallelismConfig{4, 1, 1};
    const Request first = f.work.front();
    for (auto& r : f.work) r = {r.id, first.input_len, first.output_len};
    // Tiered buffering presumes a host tier at least as large as GPU KV.
    f.hw.host_memory_per_gpu =
        std::max(f.hw.host_memory_per_gpu, kv_budget_per_gpu(f.model, f.hw, f.cfg_p));
    SimOptions opt;
    opt.force_mixed = true;
    const SimReport tm = simulate(f.model, f.hw, f.work, Policy::kTransitionMinimizing, f.cfg_p,
                                  f.cfg_d, opt);
    const SimReport pp = simulate(f.model, f.hw, f.work, Policy::kPrefillPrioritized, f.cfg_p,
                                  f.cfg_d, opt);
    const SimReport dp = simulate(f.model, f.hw, f.work, Policy::kDecodePrioritized, f.cfg_p,
                                  f.cfg_d, opt);
    CHECK(tm.reshard_time <= pp.reshard_time);
    CHECK(tm.mean_decode_micro_batch >= dp.mean_decode_micro_batch);
  }
}

TEST_CASE("decode-prioritized matches the closed form with free transfers") {
  Gen gen(13);
  for (int i = 0; i < 20; ++i) {
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
    const std::int64_t n = batch * gen.range(1, 3);
    SimOptions opt;
    opt.overlap = false;
    opt.prefill_token_budget = 0;
    opt.mode = gen.range(0, 1) ? perf::CostMode::kAdditive : perf::CostMode::kRoofline;
    const SimReport r = simulate(m, hw, uniform(n, in, out), Policy::kDecodePrioritized, cfg, cfg,
                                 opt);
    const double b = static_cast<double>(batch);
    const double per_request =
        perf::throughput_inverse(m, hw, cfg, b, static_cast<double>(in), perf::Phase::kPrefill,
                                 opt.mode) +
        static_cast<double>(out) *
            perf::throughput_inverse(m, hw, cfg, b, static_cast<double>(in) + out / 2.0,
                                     perf::Phase::kDecode, opt.mode);
    const double predicted = static_cast<double>(out) / per_request;
    CHECK(std::abs(r.tokens_per_second - predicted) / predicted <= 0.05);
  }
}

TEST_CASE("replay catches constructed violations") {
  const SimReport good = simulate(tiny_model(), tiny_hw(1024, 1024), uniform(4, 32, 4),
                                  Policy::kTransitionMinimizing, {1, 1, 1}, {1, 1, 1});
  REQUIRE(replay_check(good).ok);

  SimReport early = good;
  Event decode;
  decode.kind = EventKind::kDecode;
  decode.seq_id = 0;
  early.event_log.insert(early.event_log.begin(), decode);
  const ReplayVerdict v1 = replay_check(early);
  CHECK_FALSE(v1.ok);
  CHECK(v1.violation.find("decode before residency") != std::string::npos);
  CHECK(v1.event_index == 0);

  SimReport overflow = good;
  overflow.cpu_capacity = 64;
  const ReplayVerdict v2 = replay_check(overflow);
  CHECK_FALSE(v2.ok);
  CHECK(v2.violation.find("tier overflow") != std::string::npos);

  SimReport backwards = good;
  backwards.event_log.back().time = -1.0;
  CHECK(replay_check(backwards).violation.find("timestamps decreasing") != std::string::npos);

  SimReport twice = good;
  for (const auto& e : good.event_log) {
    if (e.kind == EventKind::kPrefillAdmit) {
      twice.event_log.push_back(e);
      twice.event_log.back().time = good.event_log.back().time;
      break;
    }
  }
  CHECK(replay_check(twice).violation.find("prefill twice") != std::string::npos);

  SimReport unknown = good;
  unknown.event_log.front().seq_id = 99;
  unknown.event_log.front().kind = EventKind::kDecode;
  CHECK_THROWS_AS(replay_check(unknown), Error);
}

TEST_CASE("event csv shape") {
  const SimReport r = simulate(tiny_model(), tiny_hw(1024, 1024), uniform(2, 8, 2),
                               Policy::kDecodePrioritized, {1, 1, 1}, {1, 1, 1});
  const std::string csv = events_to_csv(r.event_log);
  CHECK(csv.rfind("timestamp_s,event,seq_id,gpu_id,bytes\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') ==
        static_cast<std::ptrdiff_t>(r.event_log.size() + 1));
}
