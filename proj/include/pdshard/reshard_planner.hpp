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
#include <vector>

#include "pdshard/core_types.hpp"

namespace pdshard::reshard {

// Half-open [begin, end).
struct Range {
  std::int64_t begin = 0;
  std::int64_t end = 0;

  std::int64_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  friend bool operator==(const Range&, const Range&) = default;
};

Range intersect(const Range& a, const Range& b);

struct ShardEntry {
  std::int64_t gpu_id = 0;
  std::int64_t replica_id = 0;
  std::int64_t stage = 0;    // pipeline stage within the replica
  std::int64_t tp_rank = 0;  // tensor-parallel rank within the stage
  Range layers;
  Range kv_heads;
  Bytes weight_bytes = 0;
};

// GPU ids are assigned replica-major, then stage, then TP rank:
// gpu_id = replica * (TP*PP) + stage * TP + tp_rank.
struct ShardMap {
  ParallelismConfig cfg;
  std::vector<ShardEntry> entries;
};

ShardMap shard_map(const ModelSpec& model, const ParallelismConfig& cfg);

struct GpuLoad {
  std::int64_t gpu_id = 0;
  Bytes bytes_to_load = 0;
};

struct TransferPlan {
  ParallelismConfig from;
  ParallelismConfig to;
  std::vector<GpuLoad> loads;
  Seconds wall_time = 0.0;
  // KV cache moves through the host tier during swapping and is charged by
  // the simulator, never here.
  bool kv_via_host_tier = true;

  Bytes total_bytes() const;
};

// Every GPU loads its complete new weight shard from host memory over its own
// link. Throws Error(kUnsupportedTransition) if DP differs.
TransferPlan weight_reload_plan(const ModelSpec& model, const HardwareSpec& hw,
                                const ParallelismConfig& from, const ParallelismConfig& to);

// One block of a sequence's KV cache, owned by one GPU of one replica.
struct KvShard {
  std::int64_t gpu_id = 0;
  Range layers;
  Range kv_heads;
  Bytes bytes = 0;
};

struct KvRoute {
  std::vector<KvShard> swap_out;  // pushed to host under the prefill config
  std::vector<KvShard> swap_in;   // pulled from host under the decode config
};

// Shard descriptors for a sequence with `kv_tokens` materialized tokens living
// on `replica` (the same replica index on both sides, since DP is fixed).
KvRoute kv_reshard_route(const ModelSpec& model, const ParallelismConfig& cfg_p,
                         const ParallelismConfig& cfg_d, std::int64_t kv_tokens,
                         std::int64_t replica = 0);

// Contiguous memory runs needed to copy one (layer, sequence) KV shard when
// heads are split TP ways.
std::int64_t contiguous_runs(KVLayout layout, std::int64_t seq_len, std::int64_t kv_heads,
                             std::int64_t tp);

}  // namespace pdshard::reshard
