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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pdshard/core_types.hpp"
#include "pdshard/perf_model.hpp"

// Deterministic discrete-event simulation of an offline generation run.
//
// Time is a monotone virtual clock. The fleet is modeled in aggregate: KV
// capacities are fleet totals and host transfers use the combined bandwidth of
// all per-GPU links. A decode step advances one micro-batch, i.e. 1/PP of the
// resident sequences; one round of PP steps advances every resident sequence
// once. Prefill produces the KV of the prompt; each of the output_len decode
// steps of a sequence appends one token.
namespace pdshard::sim {

enum class Policy { kPrefillPrioritized, kDecodePrioritized, kTransitionMinimizing };

std::string_view to_string(Policy policy);
Policy parse_policy(std::string_view text);  // prefill | decode | transition-min

struct SimOptions {
  bool overlap = true;
  perf::CostMode mode = perf::CostMode::kRoofline;
  bool charge_p2p = false;
  KVLayout layout = KVLayout::kHND;
  // Host-link efficiency applied when the layout forces strided copies.
  double nhd_efficiency = 0.5;
  bool full_duplex = true;
  bool force_mixed = false;
  // Max prompt tokens per prefill step; 0 packs to the KV limit only. A
  // request longer than the budget runs alone.
  std::int64_t prefill_token_budget = 16384;
  std::uint64_t seed = 0;
};

enum class EventKind {
  kPrefillAdmit,
  kPrefillDone,
  kSwapOutBegin,
  kSwapOutEnd,
  kSwapInBegin,
  kSwapInEnd,
  kDecode,
  kFinish,
  kGpuReserve,
  kGpuRelease,
  kCpuReserve,
  kCpuRelease,
  kPrefillStep,
  kDecodeStep,
  kTransferWait,
  kPhase,
  kReshardBegin,
  kWeightLoad,
  kReshardEnd,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

// seq_id indexes SimReport::sequences (not the trace's request id).
struct Event {
  Seconds time = 0.0;
  EventKind kind = EventKind::kPhase;
  std::int64_t seq_id = -1;
  std::int64_t gpu_id = -1;
  Bytes bytes = 0;
  // Step events only.
  Seconds begin = 0.0;
  Seconds compute = 0.0;
  Seconds transfer = 0.0;
  Seconds wall = 0.0;
  std::int64_t count = 0;  // sequences in the step; phase code for kPhase

  friend bool operator==(const Event&, const Event&) = default;
};

// kPhase payload codes.
inline constexpr std::int64_t kPhasePrefill = 0;
inline constexpr std::int64_t kPhaseDecode = 1;

struct SequenceInfo {
  std::int64_t request_id = 0;
  std::int64_t input_len = 0;
  std::int64_t output_len = 0;
};

struct SimReport {
  Policy policy = Policy::kTransitionMinimizing;
  ParallelismConfig cfg_p;
  ParallelismConfig cfg_d;
  SimOptions options;
  Bytes gpu_capacity = 0;
  Bytes cpu_capacity = 0;
  Bytes kv_bytes_per_token = 0;

  Seconds makespan = 0.0;
  double requests_per_second = 0.0;
  double tokens_per_second = 0.0;  // generated tokens
  Seconds prefill_time = 0.0;
  Seconds decode_time = 0.0;
  Seconds reshard_time = 0.0;
  Seconds stalled_transfer_time = 0.0;
  std::int64_t transitions = 0;
  std::int64_t prefill_phases = 0;
  std::int64_t prefill_steps = 0;
  std::int64_t decode_steps = 0;
  std::int64_t output_tokens = 0;
  double mean_decode_micro_batch = 0.0;

  std::vector<SequenceInfo> sequences;
  std::vector<Event> event_log;
};

SimReport simulate(const ModelSpec& model, const HardwareSpec& hw,
                   const std::vector<Request>& workload, Policy policy,
                   const ParallelismConfig& cfg_p, const ParallelismConfig& cfg_d,
                   const SimOptions& options = {});

struct ReplayVerdict {
  bool ok = true;
  std::string violation;
  std::int64_t event_index = -1;
};

// Re-derives conservation and capacity from the event log alone. Throws
// Error(kMalformedLog) for structurally broken logs (unknown sequence ids).
ReplayVerdict replay_check(const SimReport& report);

// Structured outputs.
std::string report_to_json(const SimReport& report, bool include_events = false);
void write_events_csv(std::ostream& out, const std::vector<Event>& events);
std::string events_to_csv(const std::vector<Event>& events);

}  // namespace pdshard::sim
