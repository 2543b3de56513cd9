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

#include <string_view>

#include "pdshard/core_types.hpp"

// Analytical per-layer runtime model for a decoder layer under (TP, PP, DP).
//
// All component times are for one device executing one forward pass over a
// micro-batch; they are already divided by TP. Stage-level helpers take the
// global batch and derive the micro-batch as global / (PP * DP).
//
// The attention FLOP counts (b*h_q*s^2*d^2 for prefill, 2*b*h_q*s*d^2 for
// decode) are kept exactly as the cost model states them, even though a
// textbook count would be b*h_q*s^2*d. Calibrated fixtures depend on them.
namespace pdshard::perf {

enum class Phase { kPrefill, kDecode };
enum class CostMode { kRoofline, kAdditive };

std::string_view to_string(Phase phase);
std::string_view to_string(CostMode mode);
Phase parse_phase(std::string_view text);
CostMode parse_cost_mode(std::string_view text);

struct CostBreakdown {
  Seconds t_dm_linear = 0.0;
  Seconds t_dm_attn = 0.0;
  Seconds t_comp_linear = 0.0;
  Seconds t_comp_attn = 0.0;
  Seconds t_comm = 0.0;
  Seconds layer_time = 0.0;
  CostMode mode = CostMode::kRoofline;
};

struct ComputeTime {
  Seconds linear = 0.0;
  Seconds attn = 0.0;
};

// Weight streaming for one layer: bytes_per_param * W / (B_HBM * TP).
Seconds linear_dm_time(const ModelSpec& model, const HardwareSpec& hw,
                       const ParallelismConfig& cfg);

Seconds attn_dm_time(const ModelSpec& model, const HardwareSpec& hw,
                     const ParallelismConfig& cfg, double batch, double seq_len,
                     Phase phase);

ComputeTime compute_time(const ModelSpec& model, const HardwareSpec& hw,
                         const ParallelismConfig& cfg, double batch, double seq_len,
                         Phase phase);

// `tokens` is the micro-batch token count on the device: b*s in prefill, b in
// decode. Zero when TP == 1.
Seconds allreduce_time(const ModelSpec& model, const HardwareSpec& hw,
                       const ParallelismConfig& cfg, double tokens);

// Tokens pushed through the all-reduce for a micro-batch.
double allreduce_tokens(double batch, double seq_len, Phase phase);

CostBreakdown layer_time(const ModelSpec& model, const HardwareSpec& hw,
                         const ParallelismConfig& cfg, double micro_batch,
                         double seq_len, Phase phase, CostMode mode);

// (L/PP) * layer_time(global_batch / (PP*DP)): the steady-state interval
// between micro-batch completions at the last pipeline stage.
Seconds stage_time(const ModelSpec& model, const HardwareSpec& hw,
                   const ParallelismConfig& cfg, double global_batch, double seq_len,
                   Phase phase, CostMode mode);

// stage_time / (global_batch / PP): seconds per request (prefill) or per
// generated token of one request (decode).
Seconds throughput_inverse(const ModelSpec& model, const HardwareSpec& hw,
                           const ParallelismConfig& cfg, double global_batch,
                           double seq_len, Phase phase, CostMode mode);

}  // namespace pdshard::perf
