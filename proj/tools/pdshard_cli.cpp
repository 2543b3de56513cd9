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

#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pdshard/config_io.hpp"
#include "pdshard/core_types.hpp"
#include "pdshard/optimizer.hpp"
#include "pdshard/perf_model.hpp"
#include "pdshard/reshard_planner.hpp"
#include "pdshard/sim_engine.hpp"
#include "pdshard/workload.hpp"

namespace {

using namespace pdshard;

void print_error(std::string_view kind, std::string_view message) {
  nlohmann::ordered_json j;
  j["error"] = std::string(kind);
  j["message"] = std::string(message);
  std::cerr << j.dump() << "\n";
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfig, fmt::format("bad grid value '{}'", item));
    }
  }
  if (out.empty()) throw Error(ErrorKind::kConfig, "grid is empty");
  return out;
}

nlohmann::ordered_json plan_json(const opt::StrategyPlan& p) {
  nlohmann::ordered_json j;
  j["prefill_cfg"] = to_string(p.cfg_p);
  j["decode_cfg"] = to_string(p.cfg_d);
  j["objective_s_per_request"] = p.predicted_inverse_throughput;
  j["prefill_term_s"] = p.prefill_term;
  j["decode_term_s"] = p.decode_term;
  j["reshard_amortization_s"] = p.reshard_amortization;
  j["batch"] = p.batch;
  if (p.simulated_tokens_per_second) {
    j["simulated_tokens_per_second"] = *p.simulated_tokens_per_second;
    j["simulated_s_per_request"] = *p.simulated_seconds_per_request;
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, fmt::format("cannot write '{}'", path));
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analytical cost model and simulator for prefill/decode re-sharding"};
  app.require_subcommand(1);

  std::string model_path, hw_path, trace_path;
  auto add_model_hw = [&](CLI::App* sub) {
    sub->add_option("--model", model_path, "Model description (JSON)")->required();
    sub->add_option("--hw", hw_path, "Hardware description (JSON)")->required();
  };

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Per-layer cost breakdown for one config");
  add_model_hw(analyze);
  std::int64_t tp = 1, pp = 1, dp = 1, batch = 1, seqlen = 1;
  std::string phase_text = "decode", mode_text = "roofline";
  analyze->add_option("--tp", tp)->capture_default_str();
  analyze->add_option("--pp", pp)->capture_default_str();
  analyze->add_option("--dp", dp)->capture_default_str();
  analyze->add_option("--phase", phase_text)->check(CLI::IsMember({"prefill", "decode"}))
      ->capture_default_str();
  analyze->add_option("--batch", batch, "Global batch")->capture_default_str();
  analyze->add_option("--seqlen", seqlen)->capture_default_str();
  analyze->add_option("--mode", mode_text)->check(CLI::IsMember({"roofline", "additive"}))
      ->capture_default_str();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Simulate a trace and print the report");
  add_model_hw(simulate);
  std::string policy_text = "transition-min", prefill_cfg = "tp1.pp1.dp1",
              decode_cfg = "tp1.pp1.dp1", events_csv;
  bool no_overlap = false, nhd = false, p2p = false, force_mixed = false, with_events = false;
  std::int64_t token_budget = sim::SimOptions{}.prefill_token_budget;
  simulate->add_option("--trace", trace_path)->required();
  simulate->add_option("--policy", policy_text)
      ->check(CLI::IsMember({"prefill", "decode", "transition-min"}))
      ->capture_default_str();
  simulate->add_option("--prefill-cfg", prefill_cfg)->capture_default_str();
  simulate->add_option("--decode-cfg", decode_cfg)->capture_default_str();
  simulate->add_option("--mode", mode_text)->check(CLI::IsMember({"roofline", "additive"}))
      ->capture_default_str();
  simulate->add_option("--prefill-token-budget", token_budget)->capture_default_str();
  simulate->add_flag("--no-overlap", no_overlap);
  simulate->add_flag("--nhd", nhd, "Store host KV in NHD layout");
  simulate->add_flag("--p2p", p2p, "Charge pipeline stage hand-off");
  simulate->add_flag("--force-mixed", force_mixed);
  simulate->add_flag("--with-events", with_events, "Embed the event log in the report");
  simulate->add_option("--events-csv", events_csv);

  // optimize
  auto* optimize = app.add_subcommand("optimize", "Best static and mixed plans for a trace");
  add_model_hw(optimize);
  bool confirm_sim = false;
  optimize->add_option("--trace", trace_path)->required();
  optimize->add_option("--mode", mode_text)->check(CLI::IsMember({"roofline", "additive"}))
      ->capture_default_str();
  optimize->add_flag("--confirm-sim", confirm_sim);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Sensitivity sweep to CSV");
  add_model_hw(sweep);
  std::string axis_text, grid_text, out_path;
  sweep->add_option("--trace", trace_path)->required();
  sweep->add_option("--axis", axis_text)
      ->check(CLI::IsMember({"allreduce-scale", "pd-ratio"}))
      ->required();
  sweep->add_option("--grid", grid_text, "Comma-separated values")->required();
  sweep->add_option("--out", out_path)->required();
  sweep->add_option("--mode", mode_text)->check(CLI::IsMember({"roofline", "additive"}))
      ->capture_default_str();

  // gen-trace
  auto* gen = app.add_subcommand("gen-trace", "Synthesize a uniform-length trace");
  std::string kind_text = "constant";
  std::int64_t n = 1, input_len = 1;
  std::optional<std::int64_t> output_len;
  std::optional<double> ratio;
  std::uint64_t seed = 0;
  gen->add_option("--kind", kind_text)->check(CLI::IsMember({"constant", "ratio"}))
      ->capture_default_str();
  gen->add_option("--n", n)->required();
  gen->add_option("--input-len", input_len)->required();
  auto* out_opt = gen->add_option("--output-len", output_len);
  auto* ratio_opt = gen->add_option("--ratio", ratio);
  out_opt->excludes(ratio_opt);
  gen->add_option("--seed", seed)->capture_default_str();
  gen->add_option("--out", out_path)->required();

  // plan
  auto* plan = app.add_subcommand("plan", "Shard map and weight reload plan for a transition");
  add_model_hw(plan);
  std::string from_cfg, to_cfg;
  plan->add_option("--from", from_cfg)->required();
  plan->add_option("--to", to_cfg)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage_error", e.what());
    return 2;
  }

  try {
    if (*analyze) {
      const ModelSpec model = io::load_model(model_path);
      const HardwareSpec hw = io::load_hardware(hw_path);
      const ParallelismConfig cfg{tp, pp, dp};
      const Verdict v = validate_config(model, hw, cfg);
      if (!v.feasible()) throw Error(ErrorKind::kInfeasibleConfig, v.reason);
      if (batch < 1 || seqlen < 1) throw Error(ErrorKind::kConfig, "batch and seqlen must be >= 1");
      const auto phase = perf::parse_phase(phase_text);
      const auto mode = perf::parse_cost_mode(mode_text);
      const auto b = static_cast<double>(batch);
      const auto s = static_cast<double>(seqlen);
      const auto layer = perf::layer_time(model, hw, cfg, b / static_cast<double>(pp * dp), s,
                                          phase, mode);
      std::cout << io::breakdown_to_json(layer, cfg, phase, b, s,
                                         perf::stage_time(model, hw, cfg, b, s, phase, mode),
                                         perf::throughput_inverse(model, hw, cfg, b, s, phase, mode))
                << "\n";
    } else if (*simulate) {
      const ModelSpec model = io::load_model(model_path);
      const HardwareSpec hw = io::load_hardware(hw_path);
      const WorkloadTrace trace = parse_trace(trace_path);
      sim::SimOptions options;
      options.overlap = !no_overlap;
      options.layout = nhd ? KVLayout::kNHD : KVLayout::kHND;
      options.charge_p2p = p2p;
      options.force_mixed = force_mixed;
      options.mode = perf::parse_cost_mode(mode_text);
      options.prefill_token_budget = token_budget;
      const auto report = sim::simulate(model, hw, trace.requests, sim::parse_policy(policy_text),
                                        parse_parallelism(prefill_cfg),
                                        parse_parallelism(decode_cfg), options);
      if (!events_csv.empty()) write_text(events_csv, sim::events_to_csv(report.event_log));
      std::cout << sim::report_to_json(report, with_events) << "\n";
    } else if (*optimize) {
      const ModelSpec model = io::load_model(model_path);
      const HardwareSpec hw = io::load_hardware(hw_path);
      const WorkloadTrace trace = parse_trace(trace_path);
      opt::OptimizerOptions options;
      options.mode = perf::parse_cost_mode(mode_text);
      const auto shape = opt::shape_of(trace.summary());
      auto best_static = opt::best_static(model, hw, shape, options);
      auto best_mixed = opt::best_mixed(model, hw, shape, options);
      if (confirm_sim) {
        sim::SimOptions sim_options;
        sim_options.mode = options.mode;
        opt::confirm_plan(model, hw, trace.requests, best_static, sim_options);
        opt::confirm_plan(model, hw, trace.requests, best_mixed, sim_options);
      }
      nlohmann::ordered_json j;
      j["workload"] = {{"count", shape.count},
                       {"mean_input_len", shape.input_len},
                       {"mean_output_len", shape.output_len}};
      j["best_static"] = plan_json(best_static);
      j["best_mixed"] = plan_json(best_mixed);
      std::cout << j.dump(2) << "\n";
    } else if (*sweep) {
      const ModelSpec model = io::load_model(model_path);
      const HardwareSpec hw = io::load_hardware(hw_path);
      const WorkloadTrace trace = parse_trace(trace_path);
      opt::OptimizerOptions options;
      options.mode = perf::parse_cost_mode(mode_text);
      const auto rows = opt::sweep(model, hw, opt::shape_of(trace.summary()),
                                   opt::parse_sweep_axis(axis_text), parse_grid(grid_text),
                                   options);
      std::ostringstream csv;
      opt::write_sweep_csv(csv, rows);
      write_text(out_path, csv.str());
    } else if (*gen) {
      TraceGenSpec spec;
      spec.kind = kind_text == "ratio" ? TraceKind::kRatio : TraceKind::kConstant;
      spec.count = n;
      spec.input_len = input_len;
      spec.seed = seed;
      if (spec.kind == TraceKind::kRatio) {
        if (!ratio) throw Error(ErrorKind::kConfig, "--kind ratio needs --ratio");
        spec.ratio = *ratio;
      } else {
        if (!output_len) throw Error(ErrorKind::kConfig, "--kind constant needs --output-len");
        spec.output_len = *output_len;
      }
      write_trace(out_path, gen_trace(spec));
    } else if (*plan) {
      const ModelSpec model = io::load_model(model_path);
      const HardwareSpec hw = io::load_hardware(hw_path);
      const auto from = parse_parallelism(from_cfg);
      const auto to = parse_parallelism(to_cfg);
      for (const auto& cfg : {from, to}) {
        const Verdict v = validate_config(model, hw, cfg);
        if (!v.feasible()) throw Error(ErrorKind::kInfeasibleConfig, v.reason);
      }
      std::cout << io::plan_to_text(reshard::shard_map(model, to),
                                    reshard::weight_reload_plan(model, hw, from, to));
    }
  } catch (const Error& e) {
    print_error(to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal_error", e.what());
    return 1;
  }
  return 0;
}
