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

#include "pdshard/perf_model.hpp"

#include <algorithm>
#include <fmt/format.h>

namespace pdshard::perf {

std::string_view to_string(Phase phase) {
  return phase == Phase::kPrefill ? "prefill" : "decode";
}

std::string_view to_string(CostMode mode) {
  return mode == CostMode::kRoofline ? "roofline" : "additive";
}

Phase parse_phase(std::string_view text) {
  if (text == "prefill") return Phase::kPrefill;
  if (text == "decode") return Phase::kDecode;
  throw Error(ErrorKind::kConfig, fmt::format("unknown phase '{}'", text));
}

CostMode parse_cost_mode(std::string_view text) {
  if (text == "roofline") return CostMode::kRoofline;
  if (text == "additive") return CostMode::kAdditive;
  throw Error(ErrorKind::kConfig, fmt::format("unknown cost mode '{}'", text));
}

namespace {

double d(std::int64_t v) { return static_cast<double>(v); }

}  // namespace

Seconds linear_dm_time(const ModelSpec& model, const HardwareSpec& hw,
                       const ParallelismConfig& cfg) {
  const double bytes = d(model.bytes_per_param) * d(model.params_per_layer);
  return bytes / (hw.hbm_bandwidth * d(cfg.tp));
}

Seconds attn_dm_time(const ModelSpec& model, const HardwareSpec& hw,
                     const ParallelismConfig& cfg, double batch, double seq_len,
                     Phase phase) {
  const double bpp = d(model.bytes_per_param);
  const double hd = d(model.head_dim);
  double bytes = 0.0;
  if (phase == Phase::kPrefill) {
    bytes = bpp * batch * seq_len * (d(model.num_query_heads) + 2.0 * d(model.num_kv_heads)) * hd;
  } else {
    bytes = 2.0 * bpp * batch * seq_len * d(model.num_kv_heads) * hd;
  }
  return bytes / (hw.hbm_bandwidth * d(cfg.tp));
}

ComputeTime compute_time(const ModelSpec& model, const HardwareSpec& hw,
                         const ParallelismConfig& cfg, double batch, double seq_len,
                         Phase phase) {
  const double w = d(model.params_per_layer);
  const double hq = d(model.num_query_heads);
  const double hd = d(model.head_dim);
  const double rate = hw.peak_flops * d(cfg.tp);
  ComputeTime out;
  if (phase == Phase::kPrefill) {
    out.linear = 2.0 * w * batch * seq_len / rate;
    out.attn = batch * hq * seq_len * seq_len * hd * hd / rate;
  } else {
    out.linear = 2.0 * w * batch / rate;
    out.attn = 2.0 * batch * hq * seq_len * hd * hd / rate;
  }
  return out;
}

double allreduce_tokens(double batch, double seq_len, Phase phase) {
  return phase == Phase::kPrefill ? batch * seq_len : batch;
}

Seconds allreduce_time(const ModelSpec& model, const HardwareSpec& hw,
                       const ParallelismConfig& cfg, double tokens) {
  if (cfg.tp == 1 || tokens <= 0.0) return 0.0;
  const double bytes = tokens * d(model.activation_bytes()) * d(model.allreduces_per_layer);
  return bytes / hw.allreduce_bandwidth(cfg.tp);
}

CostBreakdown layer_time(const ModelSpec& model, const HardwareSpec& hw,
                         const ParallelismConfig& cfg, double micro_batch,
                         double seq_len, Phase phase, CostMode mode) {
  CostBreakdown out;
  out.mode = mode;
  out.t_dm_linear = linear_dm_time(model, hw, cfg);
  out.t_dm_attn = attn_dm_time(model, hw, cfg, micro_batch, seq_len, phase);
  const ComputeTime comp = compute_time(model, hw, cfg, micro_batch, seq_len, phase);
  out.t_comp_linear = comp.linear;
  out.t_comp_attn = comp.attn;
  out.t_comm = allreduce_time(model, hw, cfg, allreduce_tokens(micro_batch, seq_len, phase));
  if (mode == CostMode::kRoofline) {
    out.layer_time = std::max(out.t_dm_linear, out.t_comp_linear) +
                     std::max(out.t_dm_attn, out.t_comp_attn) + out.t_comm;
  } else {
    out.layer_time =
        out.t_dm_linear + out.t_comp_linear + out.t_dm_attn + out.t_comp_attn + out.t_comm;
  }
  return out;
}

Seconds stage_time(const ModelSpec& model, const HardwareSpec& hw,
                   const ParallelismConfig& cfg, double global_batch, double seq_len,
                   Phase phase, CostMode mode) {
  const double micro = global_batch / (d(cfg.pp) * d(cfg.dp));
  const CostBreakdown layer = layer_time(model, hw, cfg, micro, seq_len, phase, mode);
  return d(model.num_layers) / d(cfg.pp) * layer.layer_time;
}

Seconds throughput_inverse(const ModelSpec& model, const HardwareSpec& hw,
                           const ParallelismConfig& cfg, double global_batch,
                           double seq_len, Phase phase, CostMode mode) {
  if (global_batch <= 0.0) {
    throw Error(ErrorKind::kConfig, "throughput_inverse needs a positive global batch");
  }
  return stage_time(model, hw, cfg, global_batch, seq_len, phase, mode) /
         (global_batch / d(cfg.pp));
}

}  // namespace pdshard::perf
