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
#include <optional>
#include <string_view>
#include <vector>

#include "pdshard/core_types.hpp"
#include "pdshard/perf_model.hpp"
#include "pdshard/sim_engine.hpp"
#include "pdshard/workload.hpp"

namespace pdshard::opt {

// Representative request used by the analytic objective.
struct WorkloadShape {
  double input_len = 1.0;
  double output_len = 1.0;
  std::int64_t count = 1;

  // Context length charged to every decode step: input + output / 2.
  double decode_context() const { return input_len + output_len / 2.0; }
};

WorkloadShape shape_of(const WorkloadSummary& summary);

struct OptimizerOptions {
  perf::CostMode mode = perf::CostMode::kRoofline;
};

struct StrategyPlan {
  ParallelismConfig cfg_p;
  ParallelismConfig cfg_d;
  // Objective: analytic seconds per request, reshard amortization included.
  Seconds predicted_inverse_throughput = 0.0;
  Seconds prefill_term = 0.0;
  Seconds decode_term = 0.0;
  Seconds reshard_amortization = 0.0;
  std::int64_t batch = 0;
  std::optional<double> simulated_tokens_per_second;
  std::optional<Seconds> simulated_seconds_per_request;

  bool is_static() const { return cfg_p == cfg_d; }
};

// All feasible (tp, pp, dp) that use the whole fleet, ordered by (tp, pp, dp).
std::vector<ParallelismConfig> enumerate_configs(const ModelSpec& model, const HardwareSpec& hw);

// Global batch the objective runs at: min(b_max at full context, count).
// Zero if not even one request fits.
std::int64_t objective_batch(const ModelSpec& model, const HardwareSpec& hw,
                             const ParallelismConfig& cfg, const WorkloadShape& shape);

Seconds prefill_seconds_per_request(const ModelSpec& model, const HardwareSpec& hw,
                                    const ParallelismConfig& cfg, const WorkloadShape& shape,
                                    const OptimizerOptions& options = {});

Seconds decode_seconds_per_request(const ModelSpec& model, const HardwareSpec& hw,
                                   const ParallelismConfig& cfg, const WorkloadShape& shape,
                                   const OptimizerOptions& options = {});

// ceil(total prompt KV / host tier) round trips of weight reloads, spread over
// the workload. Zero when the configs match.
Seconds reshard_amortization(const ModelSpec& model, const HardwareSpec& hw,
                             const ParallelismConfig& cfg_p, const ParallelismConfig& cfg_d,
                             const WorkloadShape& shape);

StrategyPlan evaluate_plan(const ModelSpec& model, const HardwareSpec& hw,
                           const ParallelismConfig& cfg_p, const ParallelismConfig& cfg_d,
                           const WorkloadShape& shape, const OptimizerOptions& options = {});

// Best single config for both stages. Ties go to larger tp, then smaller pp.
StrategyPlan best_static(const ModelSpec& model, const HardwareSpec& hw,
                         const WorkloadShape& shape, const OptimizerOptions& options = {});

// Best (prefill, decode) pair with equal dp. Never worse than best_static.
StrategyPlan best_mixed(const ModelSpec& model, const HardwareSpec& hw,
                        const WorkloadShape& shape, const OptimizerOptions& options = {});

// Simulates the plan on `workload`: transition-minimizing for mixed plans,
// prefill-prioritized for static ones. Fills the simulated_* fields.
sim::SimReport confirm_plan(const ModelSpec& model, const HardwareSpec& hw,
                            const std::vector<Request>& workload, StrategyPlan& plan,
                            const sim::SimOptions& options = {});

enum class SweepAxis { kAllReduceScale, kPdRatio };

SweepAxis parse_sweep_axis(std::string_view text);  // allreduce-scale | pd-ratio

struct SweepRow {
  double axis_value = 0.0;
  StrategyPlan static_plan;
  StrategyPlan mixed_plan;
};

// kAllReduceScale scales the all-reduce bandwidth model only. kPdRatio sets
// output_len = max(1, round(value * input_len)) at the shape's input_len.
std::vector<SweepRow> sweep(const ModelSpec& model, const HardwareSpec& hw,
                            const WorkloadShape& shape, SweepAxis axis,
                            const std::vector<double>& grid,
                            const OptimizerOptions& options = {});

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace pdshard::opt
