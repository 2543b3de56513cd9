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

#include <fmt/format.h>

#include "pdshard/sim_engine.hpp"

namespace pdshard::sim {

namespace {

enum class Where { kPending, kAdmitted, kGpu, kOut, kCpu, kIn, kReleased };

struct SeqLedger {
  Where where = Where::kPending;
  std::int64_t prefills = 0;
  std::int64_t decodes = 0;
  Bytes gpu = 0;
  Bytes cpu = 0;
};

bool carries_sequence(EventKind kind) {
  switch (kind) {
    case EventKind::kPrefillStep:
    case EventKind::kDecodeStep:
    case EventKind::kTransferWait:
    case EventKind::kPhase:
    case EventKind::kReshardBegin:
    case EventKind::kWeightLoad:
    case EventKind::kReshardEnd:
      return false;
    default:
      return true;
  }
}

ReplayVerdict violation(std::int64_t index, std::string what) {
  return {false, std::move(what), index};
}

}  // namespace

ReplayVerdict replay_check(const SimReport& report) {
  const auto n = static_cast<std::int64_t>(report.sequences.size());
  std::vector<SeqLedger> seqs(static_cast<size_t>(n));
  Bytes gpu = 0;
  Bytes cpu = 0;
  Seconds prev = 0.0;

  for (std::int64_t i = 0; i < static_cast<std::int64_t>(report.event_log.size()); ++i) {
    const Event& e = report.event_log[static_cast<size_t>(i)];
    if (e.time < prev) {
      return violation(i, fmt::format("timestamps decreasing ({} after {})", e.time, prev));
    }
    prev = e.time;
    if (!carries_sequence(e.kind)) continue;
    if (e.seq_id < 0 || e.seq_id >= n) {
      throw Error(ErrorKind::kMalformedLog,
                  fmt::format("event {} ({}) references unknown sequence {}", i,
                              to_string(e.kind), e.seq_id));
    }
    SeqLedger& s = seqs[static_cast<size_t>(e.seq_id)];
    const auto& info = report.sequences[static_cast<size_t>(e.seq_id)];
    auto expect = [&](Where want, std::string_view what) -> std::optional<ReplayVerdict> {
      if (s.where != want) {
        return violation(i, fmt::format("{} for sequence {}", what, e.seq_id));
      }
      return std::nullopt;
    };
    std::optional<ReplayVerdict> bad;
    switch (e.kind) {
      case EventKind::kPrefillAdmit:
        if (s.where != Where::kPending) {
          return violation(i, fmt::format("prefill twice for sequence {}", e.seq_id));
        }
        s.where = Where::kAdmitted;
        break;
      case EventKind::kPrefillDone:
        if ((bad = expect(Where::kAdmitted, "prefill without admission"))) return *bad;
        ++s.prefills;
        s.where = Where::kGpu;
        break;
      case EventKind::kSwapOutBegin:
        if ((bad = expect(Where::kGpu, "swap-out of non-resident KV"))) return *bad;
        s.where = Where::kOut;
        break;
      case EventKind::kSwapOutEnd:
        if ((bad = expect(Where::kOut, "swap-out completion without start"))) return *bad;
        s.where = Where::kCpu;
        break;
      case EventKind::kSwapInBegin:
        if ((bad = expect(Where::kCpu, "swap-in of KV not in host tier"))) return *bad;
        s.where = Where::kIn;
        break;
      case EventKind::kSwapInEnd:
        if ((bad = expect(Where::kIn, "swap-in completion without start"))) return *bad;
        s.where = Where::kGpu;
        break;
      case EventKind::kDecode:
        if ((bad = expect(Where::kGpu, "decode before residency"))) return *bad;
        if (++s.decodes > info.output_len) {
          return violation(i, fmt::format("sequence {} decoded more than output_len", e.seq_id));
        }
        break;
      case EventKind::kFinish:
        if ((bad = expect(Where::kGpu, "finish of non-resident sequence"))) return *bad;
        if (s.decodes != info.output_len) {
          return violation(i, fmt::format("sequence {} finished after {} of {} tokens", e.seq_id,
                                          s.decodes, info.output_len));
        }
        s.where = Where::kReleased;
        break;
      case EventKind::kGpuReserve:
        gpu += e.bytes;
        s.gpu += e.bytes;
        if (gpu > report.gpu_capacity) {
          return violation(i, fmt::format("tier overflow: GPU KV {} > {}", gpu,
                                          report.gpu_capacity));
        }
        break;
      case EventKind::kGpuRelease:
        if (e.bytes > s.gpu || e.bytes > gpu) {
          return violation(i, fmt::format("KV not conserved: GPU release of {} B for sequence {}",
                                          e.bytes, e.seq_id));
        }
        gpu -= e.bytes;
        s.gpu -= e.bytes;
        break;
      case EventKind::kCpuReserve:
        cpu += e.bytes;
        s.cpu += e.bytes;
        if (cpu > report.cpu_capacity) {
          return violation(i, fmt::format("tier overflow: host KV {} > {}", cpu,
                                          report.cpu_capacity));
        }
        break;
      case EventKind::kCpuRelease:
        if (e.bytes > s.cpu || e.bytes > cpu) {
          return violation(i, fmt::format("KV not conserved: host release of {} B for sequence {}",
                                          e.bytes, e.seq_id));
        }
        cpu -= e.bytes;
        s.cpu -= e.bytes;
        break;
      default:
        break;
    }
  }

  const std::int64_t end = static_cast<std::int64_t>(report.event_log.size());
  for (std::int64_t id = 0; id < n; ++id) {
    const SeqLedger& s = seqs[static_cast<size_t>(id)];
    const auto& info = report.sequences[static_cast<size_t>(id)];
    if (s.prefills != 1) {
      return violation(end, fmt::format("sequence {} prefilled {} times", id, s.prefills));
    }
    if (s.decodes != info.output_len || s.where != Where::kReleased) {
      return violation(end, fmt::format("sequence {} decoded {} of {} tokens", id, s.decodes,
                                        info.output_len));
    }
    if (s.gpu != 0 || s.cpu != 0) {
      return violation(end, fmt::format("KV not conserved for sequence {}", id));
    }
  }
  if (gpu != 0 || cpu != 0) {
    return violation(end, "KV not conserved at end of log");
  }
  return {};
}

}  // namespace pdshard::sim
