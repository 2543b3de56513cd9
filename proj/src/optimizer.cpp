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

#include "pdshard/optimizer.hpp"

#include <cmath>
#include <fmt/format.h>
#include <ostream>
#include <tuple>

#include "pdshard/reshard_planner.hpp"

namespace pdshard::opt {

WorkloadShape shape_of(const WorkloadSummary& summary) {
  if (summary.count < 1) throw Error(ErrorKind::kTrace, "workload is empty");
  return {summary.mean_input, summary.mean_output, summary.count};
}

std::vector<ParallelismConfig> enumerate_configs(const ModelSpec& model, const HardwareSpec& hw) {
  std::vector<ParallelismConfig> out;
  const std::int64_t n = hw.num_gpus;
  for (std::int64_t tp = 1; tp <= n; ++tp) {
    if (n % tp != 0) continue;
    for (std::int64_t pp = 1; pp <= n / tp; ++pp) {
      if ((n / tp) % pp != 0) continue;
      const ParallelismConfig cfg{tp, pp, n / (tp * pp)};
      if (validate_config(model, hw, cfg).feasible()) out.push_back(cfg);
    }
  }
  return out;
}

std::int64_t objective_batch(const ModelSpec& model, const HardwareSpec& hw,
                             const ParallelismConfig& cfg, const WorkloadShape& shape) {
  const auto full = static_cast<std::int64_t>(std::ceil(shape.input_len + shape.output_len));
  const std::int64_t b_max = max_batch_size(model, hw, cfg, std::max<std::int64_t>(1, full));
  return std::min(b_max, std::max<std::int64_t>(1, shape.count));
}

Seconds prefill_seconds_per_request(const ModelSpec& model, const HardwareSpec& hw,
                                    const ParallelismConfig& cfg, const WorkloadShape& shape,
                                    const OptimizerOptions& options) {
  const auto b = static_cast<double>(objective_batch(model, hw, cfg, shape));
  if (b < 1.0) throw Error(ErrorKind::kInfeasibleConfig, "no request fits in GPU KV");
  return perf::throughput_inverse(model, hw, cfg, b, shape.input_len, perf::Phase::kPrefill,
                                  options.mode);
}

Seconds decode_seconds_per_request(const ModelSpec& model, const HardwareSpec& hw,
                                   const ParallelismConfig& cfg, const WorkloadShape& shape,
                                   const OptimizerOptions& options) {
  const auto b = static_cast<double>(objective_batch(model, hw, cfg, shape));
  if (b < 1.0) throw Error(ErrorKind::kInfeasibleConfig, "no request fits in GPU KV");
  return shape.output_len * perf::throughput_inverse(model, hw, cfg, b, shape.decode_context(),
                                                     perf::Phase::kDecode, options.mode);
}

Seconds reshard_amortization(const ModelSpec& model, const HardwareSpec& hw,
                             const ParallelismConfig& cfg_p, const ParallelismConfig& cfg_d,
                             const WorkloadShape& shape) {
  if (cfg_p == cfg_d) return 0.0;
  const double n = static_cast<double>(std::max<std::int64_t>(1, shape.count));
  const double total_kv = n * static_cast<double>(kv_bytes_per_token(model)) * shape.input_len;
  const double host = static_cast<double>(hw.host_memory_per_gpu) * static_cast<double>(hw.num_gpus);
  const double round_trips = std::max(1.0, std::ceil(total_kv / host));
  const Seconds reload_d = reshard::weight_reload_plan(model, hw, cfg_p, cfg_d).wall_time;
  const Seconds reload_p = reshard::weight_reload_plan(model, hw, cfg_d, cfg_p).wall_time;
  return round_trips * (reload_p + reload_d) / n;
}

StrategyPlan evaluate_plan(const ModelSpec& model, const HardwareSpec& hw,
                           const ParallelismConfig& cfg_p, const ParallelismConfig& cfg_d,
                           const WorkloadShape& shape, const OptimizerOptions& options) {
  StrategyPlan plan;
  plan.cfg_p = cfg_p;
  plan.cfg_d = cfg_d;
  plan.batch = objective_batch(model, hw, cfg_d, shape);
  plan.prefill_term = prefill_seconds_per_request(model, hw, cfg_p, shape, options);
  plan.decode_term = decode_seconds_per_request(model, hw, cfg_d, shape, options);
  plan.reshard_amortization = reshard_amortization(model, hw, cfg_p, cfg_d, shape);
  plan.predicted_inverse_throughput =
      plan.prefill_term + plan.decode_term + plan.reshard_amortization;
  return plan;
}

namespace {

bool usable(const ModelSpec& model, const HardwareSpec& hw, const ParallelismConfig& cfg,
            const WorkloadShape& shape) {
  return objective_batch(model, hw, cfg, shape) >= 1;
}

// Smaller is better: objective, then dp 1 before replication, then larger tp,
// then smaller pp.
auto rank(const StrategyPlan& p) {
  return std::make_tuple(p.predicted_inverse_throughput, p.cfg_d.dp, -p.cfg_d.tp, p.cfg_d.pp,
                         -p.cfg_p.tp, p.cfg_p.pp);
}

}  // namespace

StrategyPlan best_static(const ModelSpec& model, const HardwareSpec& hw,
                         const WorkloadShape& shape, const OptimizerOptions& options) {
  std::optional<StrategyPlan> best;
  for (const auto& cfg : enumerate_configs(model, hw)) {
    if (!usable(model, hw, cfg, shape)) continue;
    StrategyPlan p = evaluate_plan(model, hw, cfg, cfg, shape, options);
    if (!best || rank(p) < rank(*best)) best = p;
  }
  if (!best) throw Error(ErrorKind::kInfeasibleConfig, "no feasible parallelism config");
  return *best;
}

StrategyPlan best_mixed(const ModelSpec& model, const HardwareSpec& hw,
                        const WorkloadShape& shape, const OptimizerOptions& options) {
  std::vector<ParallelismConfig> configs;
  for (const auto& cfg : enumerate_configs(model, hw)) {
    if (usable(model, hw, cfg, shape)) configs.push_back(cfg);
  }
  if (configs.empty()) throw Error(ErrorKind::kInfeasibleConfig, "no feasible parallelism config");
  std::optional<StrategyPlan> best;
  for (const auto& cfg_p : configs) {
    for (const auto& cfg_d : configs) {
      if (cfg_p.dp != cfg_d.dp) continue;
      StrategyPlan p = evaluate_plan(model, hw, cfg_p, cfg_d, shape, options);
      if (!best || rank(p) < rank(*best)) best = p;
    }
  }
  return *best;
}

sim::SimReport confirm_plan(const ModelSpec& model, const HardwareSpec& hw,
                            const std::vector<Request>& workload, StrategyPlan& plan,
                            const sim::SimOptions& options) {
  const sim::Policy policy = plan.is_static() ? sim::Policy::kPrefillPrioritized
                                              : sim::Policy::kTransitionMinimizing;
  sim::SimReport report = sim::simulate(model, hw, workload, policy, plan.cfg_p, plan.cfg_d, options);
  plan.simulated_tokens_per_second = report.tokens_per_second;
  plan.simulated_seconds_per_request =
      report.makespan / static_cast<double>(report.sequences.size());
  return report;
}

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "allreduce-scale") return SweepAxis::kAllReduceScale;
  if (text == "pd-ratio") return SweepAxis::kPdRatio;
  throw Error(ErrorKind::kConfig, fmt::format("unknown sweep axis '{}'", text));
}

std::vector<SweepRow> sweep(const ModelSpec& model, const HardwareSpec& hw,
                            const WorkloadShape& shape, SweepAxis axis,
                            const std::vector<double>& grid, const OptimizerOptions& options) {
  if (grid.empty()) throw Error(ErrorKind::kConfig, "sweep grid is empty");
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (double v : grid) {
    if (!(v > 0.0) && !(axis == SweepAxis::kPdRatio && v == 0.0)) {
      throw Error(ErrorKind::kConfig, fmt::format("sweep grid value {} must be positive", v));
    }
    HardwareSpec point_hw = hw;
    WorkloadShape point_shape = shape;
    if (axis == SweepAxis::kAllReduceScale) {
      point_hw = hw.with_allreduce_scale(v);
    } else {
      point_shape.output_len = std::max(1.0, std::round(v * shape.input_len));
    }
    rows.push_back({v, best_static(model, point_hw, point_shape, options),
                    best_mixed(model, point_hw, point_shape, options)});
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "axis_value,static_tp,static_pp,static_dp,static_obj_s,mixed_tp_p,mixed_pp_p,"
         "mixed_tp_d,mixed_pp_d,mixed_obj_s\n";
  for (const auto& r : rows) {
    const auto& s = r.static_plan;
    const auto& m = r.mixed_plan;
    out << fmt::format("{},{},{},{},{:.9e},{},{},{},{},{:.9e}\n", r.axis_value, s.cfg_p.tp,
                       s.cfg_p.pp, s.cfg_p.dp, s.predicted_inverse_throughput, m.cfg_p.tp,
                       m.cfg_p.pp, m.cfg_d.tp, m.cfg_d.pp, m.predicted_inverse_throughput);
  }
}

}  // namespace pdshard::opt
