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

#include "pdshard/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include "json.hpp"
#include <numeric>
#include <fmt/format.h>

namespace pdshard {

namespace {

double median(std::vector<std::int64_t> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n % 2 == 1) return static_cast<double>(v[n / 2]);
  return 0.5 * static_cast<double>(v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<std::int64_t>& v) {
  if (v.empty()) return 0.0;
  const double sum = std::accumulate(v.begin(), v.end(), 0.0,
                                     [](double a, std::int64_t b) { return a + static_cast<double>(b); });
  return sum / static_cast<double>(v.size());
}

std::int64_t positive_int_field(const nlohmann::json& rec, const char* key,
                                const std::string& where) {
  auto it = rec.find(key);
  if (it == rec.end()) {
    throw Error(ErrorKind::kTrace, fmt::format("{}: missing field '{}'", where, key));
  }
  if (!it->is_number_integer()) {
    throw Error(ErrorKind::kTrace, fmt::format("{}: field '{}' must be an integer", where, key));
  }
  const auto value = it->get<std::int64_t>();
  if (value < 1) {
    throw Error(ErrorKind::kTrace,
                fmt::format("{}: field '{}' must be >= 1, got {}", where, key, value));
  }
  return value;
}

}  // namespace

WorkloadSummary WorkloadTrace::summary() const {
  std::vector<std::int64_t> in, out;
  in.reserve(requests.size());
  out.reserve(requests.size());
  for (const auto& r : requests) {
    in.push_back(r.input_len);
    out.push_back(r.output_len);
  }
  return {static_cast<std::int64_t>(requests.size()), mean(in), median(in), mean(out),
          median(out)};
}

WorkloadTrace parse_trace(std::istream& in, const std::string& source_name) {
  WorkloadTrace trace;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = fmt::format("{}:{}", source_name, line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::kTrace, fmt::format("{}: malformed record ({})", where, e.what()));
    }
    if (!rec.is_object()) {
      throw Error(ErrorKind::kTrace, fmt::format("{}: record must be an object", where));
    }
    Request r;
    r.input_len = positive_int_field(rec, "input_len", where);
    r.output_len = positive_int_field(rec, "output_len", where);
    if (auto it = rec.find("id"); it != rec.end()) {
      if (!it->is_number_integer()) {
        throw Error(ErrorKind::kTrace, fmt::format("{}: field 'id' must be an integer", where));
      }
      r.id = it->get<std::int64_t>();
    } else {
      r.id = static_cast<std::int64_t>(trace.requests.size());
    }
    trace.requests.push_back(r);
  }
  return trace;
}

WorkloadTrace parse_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kIo, fmt::format("cannot open trace file '{}'", path));
  }
  return parse_trace(in, path);
}

void write_trace(std::ostream& out, const WorkloadTrace& trace) {
  for (const auto& r : trace.requests) {
    out << fmt::format("{{\"id\":{},\"input_len\":{},\"output_len\":{}}}\n", r.id, r.input_len,
                       r.output_len);
  }
}

void write_trace(const std::string& path, const WorkloadTrace& trace) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorKind::kIo, fmt::format("cannot write trace file '{}'", path));
  }
  write_trace(out, trace);
}

WorkloadTrace gen_trace(const TraceGenSpec& spec) {
  if (spec.count < 1) throw Error(ErrorKind::kTrace, "trace needs at least one request");
  if (spec.input_len < 1) throw Error(ErrorKind::kTrace, "input length must be >= 1");
  std::int64_t out_len = spec.output_len;
  if (spec.kind == TraceKind::kRatio) {
    if (!(spec.ratio >= 0.0) || !std::isfinite(spec.ratio)) {
      throw Error(ErrorKind::kTrace, "ratio must be a non-negative finite number");
    }
    out_len = std::max<std::int64_t>(
        1, std::llround(spec.ratio * static_cast<double>(spec.input_len)));
  } else if (out_len < 1) {
    throw Error(ErrorKind::kTrace, "output length must be >= 1");
  }
  WorkloadTrace trace;
  trace.requests.reserve(static_cast<size_t>(spec.count));
  for (std::int64_t i = 0; i < spec.count; ++i) {
    trace.requests.push_back({i, spec.input_len, out_len});
  }
  return trace;
}

}  // namespace pdshard
