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

#include "pdshard/reshard_planner.hpp"

#include <algorithm>
#include <fmt/format.h>

namespace pdshard::reshard {

Range intersect(const Range& a, const Range& b) {
  return {std::max(a.begin, b.begin), std::min(a.end, b.end)};
}

namespace {

void require_divisible(const ModelSpec& model, const ParallelismConfig& cfg) {
  if (cfg.tp <= 0 || cfg.pp <= 0 || cfg.dp <= 0) {
    throw Error(ErrorKind::kConfig, fmt::format("invalid parallelism {}", to_string(cfg)));
  }
  if (model.num_kv_heads % cfg.tp != 0) {
    throw Error(ErrorKind::kConfig, fmt::format("tp={} does not divide num_kv_heads={}",
                                                cfg.tp, model.num_kv_heads));
  }
  if (model.num_layers % cfg.pp != 0) {
    throw Error(ErrorKind::kConfig, fmt::format("pp={} does not divide num_layers={}",
                                                cfg.pp, model.num_layers));
  }
}

// KV bytes of one (layers x heads) block for `tokens` tokens.
Bytes kv_block_bytes(const ModelSpec& model, const Range& layers, const Range& heads,
                     std::int64_t tokens) {
  return 2 * static_cast<Bytes>(model.bytes_per_param) * static_cast<Bytes>(model.head_dim) *
         static_cast<Bytes>(layers.size()) * static_cast<Bytes>(heads.size()) *
         static_cast<Bytes>(tokens);
}

}  // namespace

ShardMap shard_map(const ModelSpec& model, const ParallelismConfig& cfg) {
  require_divisible(model, cfg);
  const std::int64_t layers_per_stage = model.num_layers / cfg.pp;
  const std::int64_t heads_per_rank = model.num_kv_heads / cfg.tp;
  const Bytes weight_share = total_weight_bytes(model) / static_cast<Bytes>(cfg.tp * cfg.pp);

  ShardMap map;
  map.cfg = cfg;
  map.entries.reserve(static_cast<size_t>(cfg.gpus()));
  for (std::int64_t r = 0; r < cfg.dp; ++r) {
    for (std::int64_t s = 0; s < cfg.pp; ++s) {
      for (std::int64_t t = 0; t < cfg.tp; ++t) {
        ShardEntry e;
        e.gpu_id = r * cfg.tp * cfg.pp + s * cfg.tp + t;
        e.replica_id = r;
        e.stage = s;
        e.tp_rank = t;
        e.layers = {s * layers_per_stage, (s + 1) * layers_per_stage};
        e.kv_heads = {t * heads_per_rank, (t + 1) * heads_per_rank};
        e.weight_bytes = weight_share;
        map.entries.push_back(e);
      }
    }
  }
  return map;
}

Bytes TransferPlan::total_bytes() const {
  Bytes total = 0;
  for (const auto& l : loads) total += l.bytes_to_load;
  return total;
}

TransferPlan weight_reload_plan(const ModelSpec& model, const HardwareSpec& hw,
                                const ParallelismConfig& from, const ParallelismConfig& to) {
  if (from.dp != to.dp) {
    throw Error(ErrorKind::kUnsupportedTransition,
                fmt::format("cannot change data parallelism during re-sharding ({} -> {})",
                            to_string(from), to_string(to)));
  }
  require_divisible(model, from);
  require_divisible(model, to);

  TransferPlan plan;
  plan.from = from;
  plan.to = to;
  const ShardMap target = shard_map(model, to);
  plan.loads.reserve(target.entries.size());
  const bool noop = from == to;
  for (const auto& e : target.entries) {
    plan.loads.push_back({e.gpu_id, noop ? Bytes{0} : e.weight_bytes});
  }
  Bytes worst = 0;
  for (const auto& l : plan.loads) worst = std::max(worst, l.bytes_to_load);
  plan.wall_time = static_cast<double>(worst) / hw.host_link_bandwidth;
  return plan;
}

namespace {

std::vector<KvShard> replica_shards(const ModelSpec& model, const ParallelismConfig& cfg,
                                    std::int64_t kv_tokens, std::int64_t replica) {
  std::vector<KvShard> out;
  for (const auto& e : shard_map(model, cfg).entries) {
    if (e.replica_id != replica) continue;
    out.push_back({e.gpu_id, e.layers, e.kv_heads,
                   kv_block_bytes(model, e.layers, e.kv_heads, kv_tokens)});
  }
  return out;
}

}  // namespace

KvRoute kv_reshard_route(const ModelSpec& model, const ParallelismConfig& cfg_p,
                         const ParallelismConfig& cfg_d, std::int64_t kv_tokens,
                         std::int64_t replica) {
  if (cfg_p.dp != cfg_d.dp) {
    throw Error(ErrorKind::kUnsupportedTransition,
                "KV routing requires equal data parallelism on both sides");
  }
  if (replica < 0 || replica >= cfg_p.dp) {
    throw Error(ErrorKind::kConfig, fmt::format("replica {} out of range", replica));
  }
  if (kv_tokens < 0) {
    throw Error(ErrorKind::kConfig, "kv_tokens must be non-negative");
  }
  return {replica_shards(model, cfg_p, kv_tokens, replica),
          replica_shards(model, cfg_d, kv_tokens, replica)};
}

std::int64_t contiguous_runs(KVLayout layout, std::int64_t seq_len, std::int64_t kv_heads,
                             std::int64_t tp) {
  if (tp <= 0 || kv_heads % tp != 0) {
    throw Error(ErrorKind::kConfig,
                fmt::format("tp={} does not divide kv_heads={}", tp, kv_heads));
  }
  if (layout == KVLayout::kHND || tp == 1) return 1;
  return seq_len;
}

}  // namespace pdshard::reshard
