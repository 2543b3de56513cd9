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

#include <string>

#include "pdshard/core_types.hpp"
#include "pdshard/perf_model.hpp"
#include "pdshard/reshard_planner.hpp"

// JSON documents for model/hardware descriptions and the inspection outputs
// of the CLI. Keys are the snake_case field names of the structs; unknown
// keys are rejected.
namespace pdshard::io {

ModelSpec model_from_json(const std::string& text);
HardwareSpec hardware_from_json(const std::string& text);
ModelSpec load_model(const std::string& path);
HardwareSpec load_hardware(const std::string& path);

std::string model_to_json(const ModelSpec& model);
std::string hardware_to_json(const HardwareSpec& hw);

std::string breakdown_to_json(const perf::CostBreakdown& b, const ParallelismConfig& cfg,
                              perf::Phase phase, double batch, double seq_len,
                              Seconds stage_time, Seconds throughput_inverse);

// One row per GPU: gpu_id, replica, layers, kv heads, weight bytes, bytes to
// load for the transition.
std::string plan_to_text(const reshard::ShardMap& map, const reshard::TransferPlan& plan);

std::string read_file(const std::string& path);

}  // namespace pdshard::io
