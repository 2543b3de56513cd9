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

#include "pdshard/config_io.hpp"

#include <fmt/format.h>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace pdshard::io {

using nlohmann::json;

namespace {

json parse_document(const std::string& text, std::string_view what) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) {
      throw Error(ErrorKind::kConfig, fmt::format("{} document must be a JSON object", what));
    }
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kConfig, fmt::format("malformed {} document: {}", what, e.what()));
  }
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, std::string_view what) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw Error(ErrorKind::kConfig, fmt::format("unknown {} field '{}'", what, key));
    }
  }
}

template <typename T>
T get_required(const json& j, const char* key, std::string_view what) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw Error(ErrorKind::kConfig, fmt::format("{} is missing field '{}'", what, key));
  }
  if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) {
      throw Error(ErrorKind::kConfig, fmt::format("{} field '{}' must be an integer", what, key));
    }
  } else {
    if (!it->is_number()) {
      throw Error(ErrorKind::kConfig, fmt::format("{} field '{}' must be a number", what, key));
    }
  }
  return it->get<T>();
}

template <typename T>
T get_optional(const json& j, const char* key, T fallback, std::string_view what) {
  return j.contains(key) ? get_required<T>(j, key, what) : fallback;
}

}  // namespace

ModelSpec model_from_json(const std::string& text) {
  const json j = parse_document(text, "model");
  reject_unknown(j,
                 {"num_layers", "params_per_layer", "bytes_per_param", "num_query_heads",
                  "num_kv_heads", "head_dim", "activation_bytes_per_token",
                  "allreduces_per_layer"},
                 "model");
  ModelSpec m;
  m.num_layers = get_required<std::int64_t>(j, "num_layers", "model");
  m.params_per_layer = get_required<std::int64_t>(j, "params_per_layer", "model");
  m.bytes_per_param = get_optional<std::int64_t>(j, "bytes_per_param", 2, "model");
  m.num_query_heads = get_required<std::int64_t>(j, "num_query_heads", "model");
  m.num_kv_heads = get_required<std::int64_t>(j, "num_kv_heads", "model");
  m.head_dim = get_required<std::int64_t>(j, "head_dim", "model");
  m.activation_bytes_per_token =
      get_optional<std::int64_t>(j, "activation_bytes_per_token", 0, "model");
  if (j.contains("activation_bytes_per_token") && m.activation_bytes_per_token <= 0) {
    throw Error(ErrorKind::kConfig, "activation_bytes_per_token must be positive");
  }
  m.allreduces_per_layer = get_optional<std::int64_t>(j, "allreduces_per_layer", 1, "model");
  m.validate();
  return m;
}

HardwareSpec hardware_from_json(const std::string& text) {
  const json j = parse_document(text, "hardware");
  reject_unknown(j,
                 {"num_gpus", "hbm_bandwidth", "peak_flops", "gpu_memory", "host_memory_per_gpu",
                  "host_link_bandwidth", "allreduce_model"},
                 "hardware");
  HardwareSpec hw;
  hw.num_gpus = get_required<std::int64_t>(j, "num_gpus", "hardware");
  hw.hbm_bandwidth = get_required<double>(j, "hbm_bandwidth", "hardware");
  hw.peak_flops = get_required<double>(j, "peak_flops", "hardware");
  hw.gpu_memory = get_required<std::uint64_t>(j, "gpu_memory", "hardware");
  hw.host_memory_per_gpu = get_required<std::uint64_t>(j, "host_memory_per_gpu", "hardware");
  hw.host_link_bandwidth = get_required<double>(j, "host_link_bandwidth", "hardware");

  auto it = j.find("allreduce_model");
  if (it == j.end() || !it->is_object()) {
    throw Error(ErrorKind::kConfig, "hardware needs an 'allreduce_model' object");
  }
  const json& ar = *it;
  if (ar.contains("interconnect_bandwidth") == ar.contains("bandwidth_by_tp")) {
    throw Error(ErrorKind::kConfig,
                "allreduce_model needs exactly one of 'interconnect_bandwidth' or "
                "'bandwidth_by_tp'");
  }
  reject_unknown(ar, {"interconnect_bandwidth", "bandwidth_by_tp"}, "allreduce_model");
  if (ar.contains("interconnect_bandwidth")) {
    hw.allreduce_model =
        RingAllReduce{get_required<double>(ar, "interconnect_bandwidth", "allreduce_model")};
  } else {
    const json& table = ar["bandwidth_by_tp"];
    if (!table.is_object()) {
      throw Error(ErrorKind::kConfig, "bandwidth_by_tp must map TP degree to bandwidth");
    }
    ExplicitAllReduce explicit_model;
    for (const auto& [key, value] : table.items()) {
      std::int64_t tp = 0;
      try {
        size_t used = 0;
        tp = std::stoll(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        throw Error(ErrorKind::kConfig, fmt::format("bandwidth_by_tp key '{}' is not a TP degree", key));
      }
      if (!value.is_number()) {
        throw Error(ErrorKind::kConfig, fmt::format("bandwidth_by_tp[{}] must be a number", key));
      }
      explicit_model.bandwidth_by_tp[tp] = value.get<double>();
    }
    hw.allreduce_model = explicit_model;
  }
  hw.validate();
  return hw;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelSpec load_model(const std::string& path) { return model_from_json(read_file(path)); }

HardwareSpec load_hardware(const std::string& path) {
  return hardware_from_json(read_file(path));
}

std::string model_to_json(const ModelSpec& m) {
  nlohmann::ordered_json j;
  j["num_layers"] = m.num_layers;
  j["params_per_layer"] = m.params_per_layer;
  j["bytes_per_param"] = m.bytes_per_param;
  j["num_query_heads"] = m.num_query_heads;
  j["num_kv_heads"] = m.num_kv_heads;
  j["head_dim"] = m.head_dim;
  j["activation_bytes_per_token"] = m.activation_bytes();
  j["allreduces_per_layer"] = m.allreduces_per_layer;
  return j.dump(2);
}

std::string hardware_to_json(const HardwareSpec& hw) {
  nlohmann::ordered_json j;
  j["num_gpus"] = hw.num_gpus;
  j["hbm_bandwidth"] = hw.hbm_bandwidth;
  j["peak_flops"] = hw.peak_flops;
  j["gpu_memory"] = hw.gpu_memory;
  j["host_memory_per_gpu"] = hw.host_memory_per_gpu;
  j["host_link_bandwidth"] = hw.host_link_bandwidth;
  if (const auto* ring = std::get_if<RingAllReduce>(&hw.allreduce_model)) {
    j["allreduce_model"] = {{"interconnect_bandwidth", ring->interconnect_bandwidth}};
  } else {
    nlohmann::ordered_json table;
    for (const auto& [tp, bw] : std::get<ExplicitAllReduce>(hw.allreduce_model).bandwidth_by_tp) {
      table[std::to_string(tp)] = bw;
    }
    j["allreduce_model"] = {{"bandwidth_by_tp", table}};
  }
  return j.dump(2);
}

std::string breakdown_to_json(const perf::CostBreakdown& b, const ParallelismConfig& cfg,
                              perf::Phase phase, double batch, double seq_len,
                              Seconds stage_time, Seconds throughput_inverse) {
  nlohmann::ordered_json j;
  j["config"] = to_string(cfg);
  j["phase"] = std::string(perf::to_string(phase));
  j["mode"] = std::string(perf::to_string(b.mode));
  j["global_batch"] = batch;
  j["micro_batch"] = batch / static_cast<double>(cfg.pp * cfg.dp);
  j["seq_len"] = seq_len;
  j["t_dm_linear_s"] = b.t_dm_linear;
  j["t_dm_attn_s"] = b.t_dm_attn;
  j["t_comp_linear_s"] = b.t_comp_linear;
  j["t_comp_attn_s"] = b.t_comp_attn;
  j["t_comm_s"] = b.t_comm;
  j["layer_time_s"] = b.layer_time;
  j["stage_time_s"] = stage_time;
  j["throughput_inverse_s"] = throughput_inverse;
  return j.dump(2);
}

std::string plan_to_text(const reshard::ShardMap& map, const reshard::TransferPlan& plan) {
  std::string out = fmt::format("# {} -> {}  wall_time_s={:.9g}  kv=via-host-tier\n",
                                to_string(plan.from), to_string(plan.to), plan.wall_time);
  out += "gpu_id,replica,layers,heads,weight_bytes,bytes_to_load\n";
  for (size_t i = 0; i < map.entries.size(); ++i) {
    const auto& e = map.entries[i];
    const Bytes load = i < plan.loads.size() ? plan.loads[i].bytes_to_load : 0;
    out += fmt::format("{},{},[{}:{}),[{}:{}),{},{}\n", e.gpu_id, e.replica_id, e.layers.begin,
                       e.layers.end, e.kv_heads.begin, e.kv_heads.end, e.weight_bytes, load);
  }
  return out;
}

}  // namespace pdshard::io
