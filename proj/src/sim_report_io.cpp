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
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "pdshard/sim_engine.hpp"

namespace pdshard::sim {

std::string report_to_json(const SimReport& r, bool include_events) {
  nlohmann::ordered_json j;
  j["policy"] = std::string(to_string(r.policy));
  j["prefill_cfg"] = to_string(r.cfg_p);
  j["decode_cfg"] = to_string(r.cfg_d);
  j["options"] = {
      {"overlap", r.options.overlap},
      {"mode", std::string(perf::to_string(r.options.mode))},
      {"charge_p2p", r.options.charge_p2p},
      {"layout", std::string(to_string(r.options.layout))},
      {"nhd_efficiency", r.options.nhd_efficiency},
      {"full_duplex", r.options.full_duplex},
      {"force_mixed", r.options.force_mixed},
      {"prefill_token_budget", r.options.prefill_token_budget},
      {"seed", r.options.seed},
  };
  j["gpu_kv_capacity_bytes"] = r.gpu_capacity;
  j["cpu_kv_capacity_bytes"] = r.cpu_capacity;
  j["kv_bytes_per_token"] = r.kv_bytes_per_token;
  j["num_requests"] = r.sequences.size();
  j["output_tokens"] = r.output_tokens;
  j["makespan_s"] = r.makespan;
  j["requests_per_second"] = r.requests_per_second;
  j["tokens_per_second"] = r.tokens_per_second;
  j["prefill_time_s"] = r.prefill_time;
  j["decode_time_s"] = r.decode_time;
  j["reshard_time_s"] = r.reshard_time;
  j["stalled_transfer_time_s"] = r.stalled_transfer_time;
  j["transitions"] = r.transitions;
  j["prefill_phases"] = r.prefill_phases;
  j["prefill_steps"] = r.prefill_steps;
  j["decode_steps"] = r.decode_steps;
  j["mean_decode_micro_batch"] = r.mean_decode_micro_batch;
  j["event_count"] = r.event_log.size();
  if (include_events) {
    auto& events = j["events"] = nlohmann::ordered_json::array();
    for (const auto& e : r.event_log) {
      events.push_back({{"t", e.time},
                        {"event", std::string(to_string(e.kind))},
                        {"seq_id", e.seq_id},
                        {"gpu_id", e.gpu_id},
                        {"bytes", e.bytes},
                        {"wall", e.wall}});
    }
  }
  return j.dump(2);
}

void write_events_csv(std::ostream& out, const std::vector<Event>& events) {
  out << "timestamp_s,event,seq_id,gpu_id,bytes\n";
  for (const auto& e : events) {
    out << fmt::format("{:.17g},{},{},{},{}\n", e.time, to_string(e.kind), e.seq_id, e.gpu_id,
                       e.bytes);
  }
}

std::string events_to_csv(const std::vector<Event>& events) {
  std::ostringstream os;
  write_events_csv(os, events);
  return os.str();
}

}  // namespace pdshard::sim
