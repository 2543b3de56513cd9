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

#include "pdshard/core_types.hpp"

#include <charconv>
#include <cmath>
#include <fmt/format.h>

namespace pdshard {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config_error";
    case ErrorKind::kInfeasibleConfig: return "infeasible_config";
    case ErrorKind::kUnsupportedTransition: return "unsupported_transition";
    case ErrorKind::kTrace: return "trace_error";
    case ErrorKind::kSimulation: return "simulation_error";
    case ErrorKind::kMalformedLog: return "malformed_log";
    case ErrorKind::kIo: return "io_error";
  }
  return "unknown";
}

namespace {

void require_positive(std::int64_t v, std::string_view name) {
  if (v <= 0) {
    throw Error(ErrorKind::kConfig,
                fmt::format("{} must be positive, got {}", name, v));
  }
}

void require_positive(double v, std::string_view name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorKind::kConfig,
                fmt::format("{} must be a positive finite number, got {}", name, v));
  }
}

}  // namespace

void ModelSpec::validate() const {
  require_positive(num_layers, "num_layers");
  require_positive(params_per_layer, "params_per_layer");
  require_positive(bytes_per_param, "bytes_per_param");
  require_positive(num_query_heads, "num_query_heads");
  require_positive(num_kv_heads, "num_kv_heads");
  require_positive(head_dim, "head_dim");
  require_positive(allreduces_per_layer, "allreduces_per_layer");
  if (activation_bytes_per_token < 0) {
    throw Error(ErrorKind::kConfig, "activation_bytes_per_token must be positive");
  }
  if (num_query_heads % num_kv_heads != 0) {
    throw Error(ErrorKind::kConfig,
                fmt::format("num_query_heads ({}) must be a multiple of num_kv_heads ({})",
                            num_query_heads, num_kv_heads));
  }
}

void HardwareSpec::validate() const {
  require_positive(num_gpus, "num_gpus");
  require_positive(hbm_bandwidth, "hbm_bandwidth");
  require_positive(peak_flops, "peak_flops");
  require_positive(static_cast<std::int64_t>(gpu_memory), "gpu_memory");
  require_positive(static_cast<std::int64_t>(host_memory_per_gpu), "host_memory_per_gpu");
  require_positive(host_link_bandwidth, "host_link_bandwidth");
  if (const auto* ring = std::get_if<RingAllReduce>(&allreduce_model)) {
    require_positive(ring->interconnect_bandwidth, "interconnect_bandwidth");
    return;
  }
  const auto& table = std::get<ExplicitAllReduce>(allreduce_model).bandwidth_by_tp;
  if (table.empty()) {
    throw Error(ErrorKind::kConfig, "explicit all-reduce map is empty");
  }
  double previous = 0.0;
  bool first = true;
  for (const auto& [tp, bw] : table) {
    require_positive(tp, "all-reduce map TP key");
    require_positive(bw, "all-reduce bandwidth");
    if (!first && bw > previous) {
      throw Error(ErrorKind::kConfig,
                  fmt::format("all-reduce bandwidth must be non-increasing in TP "
                              "(TP={} has {} > {})", tp, bw, previous));
    }
    previous = bw;
    first = false;
  }
}

double HardwareSpec::allreduce_bandwidth(std::int64_t tp) const {
  if (tp < 2) {
    throw Error(ErrorKind::kConfig, "all-reduce bandwidth is undefined for TP < 2");
  }
  if (const auto* ring = std::get_if<RingAllReduce>(&allreduce_model)) {
    // A ring moves 2(TP-1)/TP of the buffer through each link.
    const double t = static_cast<double>(tp);
    return ring->interconnect_bandwidth * t / (2.0 * (t - 1.0));
  }
  const auto& table = std::get<ExplicitAllReduce>(allreduce_model).bandwidth_by_tp;
  auto it = table.find(tp);
  if (it == table.end()) {
    throw Error(ErrorKind::kConfig,
                fmt::format("explicit all-reduce map has no entry for TP={}", tp));
  }
  return it->second;
}

double HardwareSpec::p2p_bandwidth() const {
  if (std::holds_alternative<RingAllReduce>(allreduce_model)) {
    return allreduce_bandwidth(2);
  }
  const auto& table = std::get<ExplicitAllReduce>(allreduce_model).bandwidth_by_tp;
  auto it = table.find(2);
  return it != table.end() ? it->second : host_link_bandwidth;
}

HardwareSpec HardwareSpec::with_allreduce_scale(double scale) const {
  require_positive(scale, "all-reduce scale");
  HardwareSpec out = *this;
  if (auto* ring = std::get_if<RingAllReduce>(&out.allreduce_model)) {
    ring->interconnect_bandwidth *= scale;
  } else {
    for (auto& [tp, bw] : std::get<ExplicitAllReduce>(out.allreduce_model).bandwidth_by_tp) {
      bw *= scale;
    }
  }
  return out;
}

std::string to_string(const ParallelismConfig& cfg) {
  return fmt::format("tp{}.pp{}.dp{}", cfg.tp, cfg.pp, cfg.dp);
}

ParallelismConfig parse_parallelism(std::string_view text) {
  ParallelismConfig cfg;
  bool seen_tp = false, seen_pp = false, seen_dp = false;
  std::string_view rest = text;
  while (!rest.empty()) {
    auto dot = rest.find('.');
    std::string_view part = rest.substr(0, dot);
    rest = dot == std::string_view::npos ? std::string_view{} : rest.substr(dot + 1);
    if (part.size() < 3) {
      throw Error(ErrorKind::kConfig, fmt::format("bad parallelism spec '{}'", text));
    }
    std::string_view key = part.substr(0, 2);
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(part.data() + 2, part.data() + part.size(), value);
    if (ec != std::errc{} || ptr != part.data() + part.size() || value <= 0) {
      throw Error(ErrorKind::kConfig, fmt::format("bad parallelism spec '{}'", text));
    }
    if (key == "tp" && !seen_tp) {
      cfg.tp = value;
      seen_tp = true;
    } else if (key == "pp" && !seen_pp) {
      cfg.pp = value;
      seen_pp = true;
    } else if (key == "dp" && !seen_dp) {
      cfg.dp = value;
      seen_dp = true;
    } else {
      throw Error(ErrorKind::kConfig, fmt::format("bad parallelism spec '{}'", text));
    }
  }
  if (!seen_tp || !seen_pp) {
    throw Error(ErrorKind::kConfig,
                fmt::format("parallelism spec '{}' needs tp and pp (dp defaults to 1)", text));
  }
  return cfg;
}

std::string_view to_string(KVLayout layout) {
  return layout == KVLayout::kHND ? "HND" : "NHD";
}

std::string_view to_string(Feasibility f) {
  switch (f) {
    case Feasibility::kFeasible: return "feasible";
    case Feasibility::kFleetMismatch: return "fleet mismatch";
    case Feasibility::kTpExceedsKvHeads: return "tp exceeds kv heads";
    case Feasibility::kTpNotDividingKvHeads: return "tp does not divide kv heads";
    case Feasibility::kPpNotDividingLayers: return "pp does not divide layers";
    case Feasibility::kWeightsDoNotFit: return "weights do not fit";
  }
  return "unknown";
}

Bytes total_weight_bytes(const ModelSpec& model) {
  return static_cast<Bytes>(model.bytes_per_param) *
         static_cast<Bytes>(model.params_per_layer) *
         static_cast<Bytes>(model.num_layers);
}

Verdict validate_config(const ModelSpec& model, const HardwareSpec& hw,
                        const ParallelismConfig& cfg) {
  if (cfg.tp <= 0 || cfg.pp <= 0 || cfg.dp <= 0 || cfg.gpus() != hw.num_gpus) {
    return {Feasibility::kFleetMismatch,
            fmt::format("fleet mismatch: {} uses {} GPUs, fleet has {}", to_string(cfg),
                        cfg.gpus(), hw.num_gpus)};
  }
  if (cfg.tp > model.num_kv_heads) {
    return {Feasibility::kTpExceedsKvHeads,
            fmt::format("tp={} exceeds num_kv_heads={}", cfg.tp, model.num_kv_heads)};
  }
  if (model.num_kv_heads % cfg.tp != 0) {
    return {Feasibility::kTpNotDividingKvHeads,
            fmt::format("tp={} does not divide num_kv_heads={}", cfg.tp, model.num_kv_heads)};
  }
  if (model.num_layers % cfg.pp != 0) {
    return {Feasibility::kPpNotDividingLayers,
            fmt::format("pp={} does not divide num_layers={}", cfg.pp, model.num_layers)};
  }
  const Bytes replica_memory = hw.gpu_memory * static_cast<Bytes>(cfg.gpus_per_replica());
  const Bytes weights = total_weight_bytes(model);
  if (replica_memory < weights) {
    return {Feasibility::kWeightsDoNotFit,
            fmt::format("weights do not fit: {} bytes per replica < {} bytes of weights",
                        replica_memory, weights)};
  }
  return {};
}

Bytes kv_bytes_per_token(const ModelSpec& model) {
  return 2 * static_cast<Bytes>(model.bytes_per_param) * static_cast<Bytes>(model.num_kv_heads) *
         static_cast<Bytes>(model.head_dim) * static_cast<Bytes>(model.num_layers);
}

Bytes kv_budget_per_gpu(const ModelSpec& model, const HardwareSpec& hw,
                        const ParallelismConfig& cfg) {
  const Bytes shard = total_weight_bytes(model) / static_cast<Bytes>(cfg.gpus_per_replica());
  return hw.gpu_memory > shard ? hw.gpu_memory - shard : 0;
}

Bytes fleet_kv_budget(const ModelSpec& model, const HardwareSpec& hw,
                      const ParallelismConfig& cfg) {
  const Bytes replica_memory = hw.gpu_memory * static_cast<Bytes>(cfg.gpus_per_replica());
  const Bytes weights = total_weight_bytes(model);
  if (replica_memory <= weights) return 0;
  return static_cast<Bytes>(cfg.dp) * (replica_memory - weights);
}

std::int64_t max_batch_size(const ModelSpec& model, const HardwareSpec& hw,
                            const ParallelismConfig& cfg, std::int64_t seq_len) {
  const Verdict verdict = validate_config(model, hw, cfg);
  if (!verdict.feasible()) {
    throw Error(ErrorKind::kInfeasibleConfig, verdict.reason);
  }
  if (seq_len < 1) {
    throw Error(ErrorKind::kConfig, "seq_len must be >= 1");
  }
  const Bytes per_sequence = kv_bytes_per_token(model) * static_cast<Bytes>(seq_len);
  const Bytes replica_memory = hw.gpu_memory * static_cast<Bytes>(cfg.gpus_per_replica());
  const Bytes spare = replica_memory - total_weight_bytes(model);
  // A sequence lives on exactly one replica, so each replica is floored on
  // its own.
  return cfg.dp * static_cast<std::int64_t>(spare / per_sequence);
}

}  // namespace pdshard
