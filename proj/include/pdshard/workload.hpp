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
#include <string>
#include <vector>

#include "pdshard/core_types.hpp"

namespace pdshard {

struct WorkloadSummary {
  std::int64_t count = 0;
  double mean_input = 0.0;
  double median_input = 0.0;
  double mean_output = 0.0;
  double median_output = 0.0;
};

struct WorkloadTrace {
  std::vector<Request> requests;

  WorkloadSummary summary() const;
};

// Newline-delimited JSON records: {"input_len": N, "output_len": N, "id": N}.
// "id" is optional; missing ids are the record's zero-based position. Blank
// lines are skipped. Errors name the 1-based line.
WorkloadTrace parse_trace(const std::string& path);
WorkloadTrace parse_trace(std::istream& in, const std::string& source_name);

void write_trace(std::ostream& out, const WorkloadTrace& trace);
void write_trace(const std::string& path, const WorkloadTrace& trace);

enum class TraceKind { kConstant, kRatio };

struct TraceGenSpec {
  TraceKind kind = TraceKind::kConstant;
  std::int64_t count = 1;
  std::int64_t input_len = 1;
  std::int64_t output_len = 1;  // kConstant
  double ratio = 0.0;           // kRatio: output_len = max(1, round(ratio * input_len))
  std::uint64_t seed = 0;
};

// Uniform-length synthetic workloads. Both kinds are fully determined by
// their lengths, so `seed` only labels the trace.
WorkloadTrace gen_trace(const TraceGenSpec& spec);

}  // namespace pdshard
