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
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace pdshard {

using Bytes = std::uint64_t;
using Seconds = double;

enum class ErrorKind {
  kConfig,
  kInfeasibleConfig,
  kUnsupportedTransition,
  kTrace,
  kSimulation,
  kMalformedLog,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// Every failure surfaced by the library carries a machine-readable kind so the
// CLI can report it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Transformer architecture constants. Per-layer quantities are for one decoder
// layer; whole-model quantities multiply by num_layers.
struct ModelSpec {
  std::int64_t num_layers = 0;
  std::int64_t params_per_layer = 0;
  std::int64_t bytes_per_param = 2;
  std::int64_t num_query_heads = 0;
  std::int64_t num_kv_heads = 0;
  std::int64_t head_dim = 0;
  // Bytes all-reduced per token per layer. Zero means "use the default",
  // bytes_per_param * num_query_heads * head_dim.
  std::int64_t activation_bytes_per_token = 0;
  std::int64_t allreduces_per_layer = 1;

  std::int64_t activation_bytes() const {
    return activation_bytes_per_token > 0
               ? activation_bytes_per_token
               : bytes_per_param * num_query_heads * head_dim;
  }

  // Throws Error(kConfig) naming the first violated invariant.
  void validate() const;
};

struct RingAllReduce {
  double interconnect_bandwidth = 0.0;
};

// Measured effective all-reduce bandwidth keyed by TP degree.
struct ExplicitAllReduce {
  std::map<std::int64_t, double> bandwidth_by_tp;
};

using AllReduceModel = std::variant<RingAllReduce, ExplicitAllReduce>;

struct HardwareSpec {
  std::int64_t num_gpus = 0;
  double hbm_bandwidth = 0.0;
  double peak_flops = 0.0;
  Bytes gpu_memory = 0;
  Bytes host_memory_per_gpu = 0;
  double host_link_bandwidth = 0.0;
  AllReduceModel allreduce_model = RingAllReduce{};

  void validate() const;

  // Effective all-reduce bandwidth for a TP group of the given size (tp >= 2).
  double allreduce_bandwidth(std::int64_t tp) const;

  // Bandwidth used for pipeline-stage activation hand-off; equals B_ar(2).
  double p2p_bandwidth() const;

  // Copy with the all-reduce bandwidth model multiplied by `scale`; the host
  // link is untouched.
  HardwareSpec with_allreduce_scale(double scale) const;
};

struct ParallelismConfig {
  std::int64_t tp = 1;
  std::int64_t pp = 1;
  std::int64_t dp = 1;

  std::int64_t gpus() const { return tp * pp * dp; }
  std::int64_t gpus_per_replica() const { return tp * pp; }
  friend bool operator==(const ParallelismConfig&,
                         const ParallelismConfig&) = default;
};

// "tp2.pp2.dp1" <-> ParallelismConfig.
std::string to_string(const ParallelismConfig& cfg);
ParallelismConfig parse_parallelism(std::string_view text);

struct Request {
  std::int64_t id = 0;
  std::int64_t input_len = 1;
  std::int64_t output_len = 1;
  friend bool operator==(const Request&, const Request&) = default;
};

enum class KVLayout { kNHD, kHND };

std::string_view to_string(KVLayout layout);

enum class Feasibility {
  kFeasible,
  kFleetMismatch,
  kTpExceedsKvHeads,
  kTpNotDividingKvHeads,
  kPpNotDividingLayers,
  kWeightsDoNotFit,
};

struct Verdict {
  Feasibility status = Feasibility::kFeasible;
  std::string reason;

  bool feasible() const { return status == Feasibility::kFeasible; }
};

std::string_view to_string(Feasibility f);

Bytes total_weight_bytes(const ModelSpec& model);

Verdict validate_config(const ModelSpec& model, const HardwareSpec& hw,
                        const ParallelismConfig& cfg);

// K and V for every layer, one token.
Bytes kv_bytes_per_token(const ModelSpec& model);

// Per-GPU memory left for KV cache once the weight shard is resident.
Bytes kv_budget_per_gpu(const ModelSpec& model, const HardwareSpec& hw,
                        const ParallelismConfig& cfg);

// Aggregate KV budget across the fleet: DP * (M * TP * PP - weights).
Bytes fleet_kv_budget(const ModelSpec& model, const HardwareSpec& hw,
                      const ParallelismConfig& cfg);

// Largest global batch whose KV at `seq_len` tokens fits. Throws
// Error(kInfeasibleConfig) when validate_config rejects the config.
std::int64_t max_batch_size(const ModelSpec& model, const HardwareSpec& hw,
                            const ParallelismConfig& cfg, std::int64_t seq_len);

}  // namespace pdshard
