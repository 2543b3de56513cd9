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

#include "pdshard/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fmt/format.h>

#include "pdshard/reshard_planner.hpp"

namespace pdshard::sim {

std::string_view to_string(Policy policy) {
  switch (policy) {
    case Policy::kPrefillPrioritized: return "prefill";
    case Policy::kDecodePrioritized: return "decode";
    case Policy::kTransitionMinimizing: return "transition-min";
  }
  return "unknown";
}

Policy parse_policy(std::string_view text) {
  if (text == "prefill") return Policy::kPrefillPrioritized;
  if (text == "decode") return Policy::kDecodePrioritized;
  if (text == "transition-min") return Policy::kTransitionMinimizing;
  throw Error(ErrorKind::kConfig, fmt::format("unknown policy '{}'", text));
}

namespace {

constexpr std::pair<EventKind, std::string_view> kEventNames[] = {
    {EventKind::kPrefillAdmit, "prefill_admit"},
    {EventKind::kPrefillDone, "prefill_done"},
    {EventKind::kSwapOutBegin, "swap_out_begin"},
    {EventKind::kSwapOutEnd, "swap_out_end"},
    {EventKind::kSwapInBegin, "swap_in_begin"},
    {EventKind::kSwapInEnd, "swap_in_end"},
    {EventKind::kDecode, "decode"},
    {EventKind::kFinish, "finish"},
    {EventKind::kGpuReserve, "gpu_reserve"},
    {EventKind::kGpuRelease, "gpu_release"},
    {EventKind::kCpuReserve, "cpu_reserve"},
    {EventKind::kCpuRelease, "cpu_release"},
    {EventKind::kPrefillStep, "prefill_step"},
    {EventKind::kDecodeStep, "decode_step"},
    {EventKind::kTransferWait, "transfer_wait"},
    {EventKind::kPhase, "phase"},
    {EventKind::kReshardBegin, "reshard_begin"},
    {EventKind::kWeightLoad, "weight_load"},
    {EventKind::kReshardEnd, "reshard_end"},
};

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kEventNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (const auto& [k, name] : kEventNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

namespace {

enum class Residency { kPending, kAdmitted, kGpu, kSwappingOut, kCpu, kSwappingIn, kReleased };

struct SeqState {
  Request req;
  Residency where = Residency::kPending;
  std::int64_t context = 0;
  std::int64_t decoded = 0;
  Bytes gpu_bytes = 0;
  Bytes cpu_bytes = 0;
};

struct Transfer {
  Seconds end = 0.0;
  std::int64_t seq = 0;
};

struct ChunkCost {
  Seconds seconds = 0.0;
  double micro_batch = 0.0;
};

enum class PackStop { kNone, kPendingEmpty, kGpuFull, kCpuFull, kBudget };

class Engine {
 public:
  Engine(const ModelSpec& model, const HardwareSpec& hw, const std::vector<Request>& workload,
         Policy policy, const ParallelismConfig& cfg_p, const ParallelismConfig& cfg_d,
         const SimOptions& options)
      : model_(model), hw_(hw), policy_(policy), cfg_p_(cfg_p), cfg_d_(cfg_d), opt_(options) {
    validate_inputs(workload);
    kvpt_ = kv_bytes_per_token(model_);
    gpu_cap_ = fleet_kv_budget(model_, hw_, cfg_p_);
    cpu_cap_ = hw_.host_memory_per_gpu * static_cast<Bytes>(hw_.num_gpus);
    seqs_.reserve(workload.size());
    for (const auto& r : workload) {
      SeqState s;
      s.req = r;
      seqs_.push_back(s);
    }
    check_request_sizes();
    cur_ = cfg_p_;
  }

  SimReport run() {
    emit_phase(kPhasePrefill);
    ++report_.prefill_phases;
    switch (policy_) {
      case Policy::kTransitionMinimizing: run_transition_minimizing(); break;
      case Policy::kDecodePrioritized: run_decode_prioritized(); break;
      case Policy::kPrefillPrioritized: run_prefill_prioritized(); break;
    }
    if (gpu_used_ != 0 || cpu_used_ != 0) {
      throw Error(ErrorKind::kSimulation,
                  fmt::format("KV not conserved at end of run (gpu {} B, cpu {} B)", gpu_used_,
                              cpu_used_));
    }
    return finish_report();
  }

 private:
  // ---- setup -------------------------------------------------------------

  void validate_inputs(const std::vector<Request>& workload) {
    if (workload.empty()) throw Error(ErrorKind::kSimulation, "workload is empty");
    model_.validate();
    hw_.validate();
    for (const auto* cfg : {&cfg_p_, &cfg_d_}) {
      const Verdict v = validate_config(model_, hw_, *cfg);
      if (!v.feasible()) throw Error(ErrorKind::kInfeasibleConfig, v.reason);
    }
    if (cfg_p_.dp != cfg_d_.dp) {
      throw Error(ErrorKind::kUnsupportedTransition,
                  "prefill and decode configs must share the same data parallelism");
    }
    if (cfg_p_ != cfg_d_ && policy_ != Policy::kTransitionMinimizing && !opt_.force_mixed) {
      throw Error(ErrorKind::kConfig,
                  "distinct prefill/decode configs need transition-min policy or force_mixed");
    }
    if (opt_.prefill_token_budget < 0) {
      throw Error(ErrorKind::kConfig, "prefill_token_budget must be >= 0");
    }
    if (!(opt_.nhd_efficiency > 0.0 && opt_.nhd_efficiency <= 1.0)) {
      throw Error(ErrorKind::kConfig, "nhd_efficiency must be in (0, 1]");
    }
    for (const auto& r : workload) {
      if (r.input_len < 1 || r.output_len < 1) {
        throw Error(ErrorKind::kSimulation,
                    fmt::format("request {} has non-positive lengths", r.id));
      }
    }
  }

  void check_request_sizes() const {
    for (const auto& s : seqs_) {
      const Bytes full = full_bytes(s);
      if (full > cpu_cap_) {
        throw Error(ErrorKind::kSimulation,
                    fmt::format("request {} needs {} B of KV, more than the host tier ({} B)",
                                s.req.id, full, cpu_cap_));
      }
      if (full > gpu_cap_) {
        throw Error(ErrorKind::kSimulation,
                    fmt::format("request {} needs {} B of KV, more than GPU KV capacity ({} B)",
                                s.req.id, full, gpu_cap_));
      }
    }
  }

  Bytes prompt_bytes(const SeqState& s) const {
    return kvpt_ * static_cast<Bytes>(s.req.input_len);
  }
  Bytes full_bytes(const SeqState& s) const {
    return kvpt_ * static_cast<Bytes>(s.req.input_len + s.req.output_len);
  }

  // ---- event plumbing ----------------------------------------------------

  void emit(Event e) { report_.event_log.push_back(e); }

  void emit_seq(EventKind kind, std::int64_t seq, Bytes bytes = 0) {
    Event e;
    e.time = now_;
    e.kind = kind;
    e.seq_id = seq;
    e.bytes = bytes;
    emit(e);
  }

  void emit_phase(std::int64_t code) {
    Event e;
    e.time = now_;
    e.kind = EventKind::kPhase;
    e.count = code;
    emit(e);
  }

  void reserve_gpu(std::int64_t seq, Bytes bytes) {
    if (gpu_used_ + bytes > gpu_cap_) {
      throw Error(ErrorKind::kSimulation, "internal: GPU KV tier overcommitted");
    }
    gpu_used_ += bytes;
    seqs_[seq].gpu_bytes = bytes;
    emit_seq(EventKind::kGpuReserve, seq, bytes);
  }

  void release_gpu(std::int64_t seq) {
    const Bytes b = seqs_[seq].gpu_bytes;
    gpu_used_ -= b;
    seqs_[seq].gpu_bytes = 0;
    emit_seq(EventKind::kGpuRelease, seq, b);
  }

  void reserve_cpu(std::int64_t seq, Bytes bytes) {
    if (cpu_used_ + bytes > cpu_cap_) {
      throw Error(ErrorKind::kSimulation, "internal: host KV tier overcommitted");
    }
    cpu_used_ += bytes;
    seqs_[seq].cpu_bytes = bytes;
    emit_seq(EventKind::kCpuReserve, seq, bytes);
  }

  void release_cpu(std::int64_t seq) {
    const Bytes b = seqs_[seq].cpu_bytes;
    cpu_used_ -= b;
    seqs_[seq].cpu_bytes = 0;
    emit_seq(EventKind::kCpuRelease, seq, b);
  }

  // ---- host transfers ----------------------------------------------------

  Seconds& channel_free_at(bool outbound) {
    if (!opt_.full_duplex) return link_free_at_;
    return outbound ? out_free_at_ : in_free_at_;
  }

  double link_efficiency(const ParallelismConfig& cfg) const {
    const std::int64_t runs =
        reshard::contiguous_runs(opt_.layout, 2, model_.num_kv_heads, cfg.tp);
    return runs == 1 ? 1.0 : opt_.nhd_efficiency;
  }

  Seconds transfer_seconds(Bytes bytes, const ParallelismConfig& cfg) const {
    const double bw = static_cast<double>(hw_.num_gpus) * hw_.host_link_bandwidth *
                      link_efficiency(cfg);
    return static_cast<double>(bytes) / bw;
  }

  void start_swap_out(std::int64_t seq) {
    auto& s = seqs_[seq];
    Seconds& free_at = channel_free_at(true);
    const Seconds start = std::max(now_, free_at);
    const Seconds end = start + transfer_seconds(s.cpu_bytes, cfg_p_);
    free_at = end;
    s.where = Residency::kSwappingOut;
    emit_seq(EventKind::kSwapOutBegin, seq, s.cpu_bytes);
    out_queue_.push_back({end, seq});
  }

  void start_swap_in(std::int64_t seq) {
    auto& s = seqs_[seq];
    reserve_gpu(seq, full_bytes(s));
    Seconds& free_at = channel_free_at(false);
    const Seconds start = std::max(now_, free_at);
    const Seconds end = start + transfer_seconds(s.cpu_bytes, cfg_d_);
    free_at = end;
    s.where = Residency::kSwappingIn;
    emit_seq(EventKind::kSwapInBegin, seq, s.cpu_bytes);
    in_queue_.push_back({end, seq});
  }

  void complete_swap_out(std::int64_t seq) {
    emit_seq(EventKind::kSwapOutEnd, seq, seqs_[seq].cpu_bytes);
    release_gpu(seq);
    seqs_[seq].where = Residency::kCpu;
    cpu_fifo_.push_back(seq);
  }

  void complete_swap_in(std::int64_t seq) {
    emit_seq(EventKind::kSwapInEnd, seq, seqs_[seq].cpu_bytes);
    release_cpu(seq);
    seqs_[seq].where = Residency::kGpu;
    ready_.push_back(seq);
  }

  // Moves the clock to `t`, retiring every transfer that ends on the way.
  void advance_to(Seconds t) {
    while (true) {
      const bool has_out = !out_queue_.empty() && out_queue_.front().end <= t;
      const bool has_in = !in_queue_.empty() && in_queue_.front().end <= t;
      if (!has_out && !has_in) break;
      const bool take_out =
          has_out && (!has_in || out_queue_.front().end <= in_queue_.front().end);
      auto& q = take_out ? out_queue_ : in_queue_;
      const Transfer tr = q.front();
      q.pop_front();
      now_ = std::max(now_, tr.end);
      if (take_out) {
        complete_swap_out(tr.seq);
      } else {
        complete_swap_in(tr.seq);
      }
    }
    now_ = std::max(now_, t);
  }

  Seconds last_end(const std::deque<Transfer>& q) const {
    return q.empty() ? now_ : std::max(now_, q.back().end);
  }

  void wait_for_transfers(Seconds until) {
    if (until <= now_) return;
    Event e;
    e.kind = EventKind::kTransferWait;
    e.begin = now_;
    e.wall = until - now_;
    e.transfer = e.wall;
    advance_to(until);
    e.time = now_;
    emit(e);
    report_.stalled_transfer_time += e.wall;
  }

  // ---- cost --------------------------------------------------------------

  // Splits `seqs` into micro-batches of ceil(n / (PP*DP)) sequences per device;
  // the remainder forms a final smaller micro-batch.
  std::vector<std::vector<std::int64_t>> micro_batches(const std::vector<std::int64_t>& seqs,
                                                       const ParallelismConfig& cfg) const {
    std::vector<std::vector<std::int64_t>> out;
    if (seqs.empty()) return out;
    const auto n = static_cast<std::int64_t>(seqs.size());
    const std::int64_t per_device = (n + cfg.pp * cfg.dp - 1) / (cfg.pp * cfg.dp);
    const std::int64_t chunk = per_device * cfg.dp;
    for (std::int64_t i = 0; i < n; i += chunk) {
      const std::int64_t end = std::min(n, i + chunk);
      out.emplace_back(seqs.begin() + i, seqs.begin() + end);
    }
    return out;
  }

  ChunkCost chunk_cost(const std::vector<std::int64_t>& chunk, const ParallelismConfig& cfg,
                       perf::Phase phase) const {
    std::int64_t ctx = 0;
    for (auto seq : chunk) {
      const auto& s = seqs_[seq];
      ctx = std::max(ctx, phase == perf::Phase::kPrefill ? s.req.input_len : s.context);
    }
    const auto n = static_cast<std::int64_t>(chunk.size());
    const double micro = static_cast<double>((n + cfg.dp - 1) / cfg.dp);
    const double seq_len = static_cast<double>(ctx);
    const auto layer = perf::layer_time(model_, hw_, cfg, micro, seq_len, phase, opt_.mode);
    Seconds t = static_cast<double>(model_.num_layers) / static_cast<double>(cfg.pp) *
                layer.layer_time;
    if (opt_.charge_p2p && cfg.pp > 1) {
      const double tokens = perf::allreduce_tokens(micro, seq_len, phase);
      t += tokens * static_cast<double>(model_.activation_bytes()) / hw_.p2p_bandwidth();
    }
    return {t, micro};
  }

  // ---- prefill -----------------------------------------------------------

  // Greedy in trace order; never reorders past a request that does not fit.
  std::vector<std::int64_t> pack_prefill(bool via_host, PackStop* stop) const {
    std::vector<std::int64_t> batch;
    Bytes gpu = gpu_used_;
    Bytes cpu = cpu_used_;
    std::int64_t tokens = 0;
    *stop = PackStop::kNone;
    for (std::int64_t i = next_pending_; i < static_cast<std::int64_t>(seqs_.size()); ++i) {
      const auto& s = seqs_[i];
      const Bytes need_gpu = via_host ? prompt_bytes(s) : full_bytes(s);
      if (via_host && cpu + prompt_bytes(s) > cpu_cap_) {
        *stop = PackStop::kCpuFull;
        break;
      }
      if (gpu + need_gpu > gpu_cap_) {
        *stop = PackStop::kGpuFull;
        break;
      }
      if (opt_.prefill_token_budget > 0 && !batch.empty() &&
          tokens + s.req.input_len > opt_.prefill_token_budget) {
        *stop = PackStop::kBudget;
        break;
      }
      batch.push_back(i);
      gpu += need_gpu;
      if (via_host) cpu += prompt_bytes(s);
      tokens += s.req.input_len;
    }
    if (batch.empty() && *stop == PackStop::kNone) *stop = PackStop::kPendingEmpty;
    return batch;
  }

  // Runs one prefill step over `batch` under cfg_p. With `via_host` the
  // produced KV is swapped out to the host tier; with overlap on, those
  // transfers run during the next step.
  void prefill_step(const std::vector<std::int64_t>& batch, bool via_host) {
    const Seconds begin = now_;
    for (auto seq : batch) {
      auto& s = seqs_[seq];
      emit_seq(EventKind::kPrefillAdmit, seq);
      reserve_gpu(seq, via_host ? prompt_bytes(s) : full_bytes(s));
      if (via_host) reserve_cpu(seq, prompt_bytes(s));
      s.where = Residency::kAdmitted;
    }
    next_pending_ += static_cast<std::int64_t>(batch.size());

    Seconds compute = 0.0;
    for (const auto& mb : micro_batches(batch, cfg_p_)) {
      const ChunkCost c = chunk_cost(mb, cfg_p_, perf::Phase::kPrefill);
      compute += c.seconds;
      last_step_cost_ = c.seconds;
    }

    Seconds transfer = 0.0;
    Seconds wall = compute;
    if (via_host && opt_.overlap) {
      transfer = std::max(0.0, last_end(out_queue_) - begin);
      wall = std::max(compute, transfer);
    }
    advance_to(begin + compute);
    for (auto seq : batch) {
      auto& s = seqs_[seq];
      s.context = s.req.input_len;
      emit_seq(EventKind::kPrefillDone, seq);
      if (via_host) {
        s.where = Residency::kGpu;  // until its swap-out starts below
      } else {
        s.where = Residency::kGpu;
        ready_.push_back(seq);
      }
    }
    if (via_host && !opt_.overlap) {
      for (auto seq : batch) start_swap_out(seq);
      transfer = last_end(out_queue_) - now_;
      wall = compute + transfer;
    }
    advance_to(begin + wall);
    if (via_host && opt_.overlap) {
      for (auto seq : batch) start_swap_out(seq);
    }

    Event e;
    e.time = now_;
    e.kind = EventKind::kPrefillStep;
    e.begin = begin;
    e.compute = compute;
    e.transfer = transfer;
    e.wall = wall;
    e.count = static_cast<std::int64_t>(batch.size());
    emit(e);
    report_.prefill_time += compute;
    report_.stalled_transfer_time += wall - compute;
    ++report_.prefill_steps;
  }

  // ---- decode ------------------------------------------------------------

  void issue_prefetches() {
    bool issued = false;
    while (!cpu_fifo_.empty()) {
      const std::int64_t seq = cpu_fifo_.front();
      if (gpu_used_ + full_bytes(seqs_[seq]) > gpu_cap_) break;
      cpu_fifo_.pop_front();
      start_swap_in(seq);
      issued = true;
    }
    if (issued && !opt_.overlap) wait_for_transfers(last_end(in_queue_));
  }

  // Swap-ins issued during a round join the next one in full, so arrivals
  // never split a wave across rounds.
  void join_swap_ins() {
    if (!in_queue_.empty()) wait_for_transfers(last_end(in_queue_));
  }

  // One pass over the resident set: PP micro-batches (fewer if the set is
  // small), each advancing its sequences by one token.
  void decode_round() {
    const std::vector<std::int64_t> snapshot = ready_;
    const auto batches = micro_batches(snapshot, cfg_d_);
    Seconds sum = 0.0;
    Seconds longest = 0.0;
    for (const auto& mb : batches) {
      const Seconds begin = now_;
      const ChunkCost c = chunk_cost(mb, cfg_d_, perf::Phase::kDecode);
      advance_to(begin + c.seconds);
      for (auto seq : mb) {
        auto& s = seqs_[seq];
        ++s.context;
        ++s.decoded;
        emit_seq(EventKind::kDecode, seq);
        if (s.decoded == s.req.output_len) {
          emit_seq(EventKind::kFinish, seq);
          release_gpu(seq);
          s.where = Residency::kReleased;
        }
      }
      Event e;
      e.time = now_;
      e.kind = EventKind::kDecodeStep;
      e.begin = begin;
      e.compute = c.seconds;
      e.wall = c.seconds;
      e.count = static_cast<std::int64_t>(mb.size());
      emit(e);
      report_.decode_time += c.seconds;
      ++report_.decode_steps;
      micro_batch_sum_ += c.micro_batch;
      report_.output_tokens += static_cast<std::int64_t>(mb.size());
      sum += c.seconds;
      longest = std::max(longest, c.seconds);
      last_step_cost_ = c.seconds;
      if (policy_ == Policy::kTransitionMinimizing) issue_prefetches();
    }
    // A sequence re-enters the pipeline only after leaving the last stage, so
    // a round never takes less than PP stage times.
    const Seconds bubble = static_cast<double>(cfg_d_.pp) * longest - sum;
    if (static_cast<std::int64_t>(batches.size()) < cfg_d_.pp && bubble > 0.0) {
      advance_to(now_ + bubble);
      report_.decode_time += bubble;
    }
    std::erase_if(ready_, [&](std::int64_t seq) {
      return seqs_[seq].where == Residency::kReleased;
    });
  }

  // ---- transitions -------------------------------------------------------

  void transition(std::int64_t to_phase, const ParallelismConfig& to) {
    ++report_.transitions;
    if (to_phase == kPhasePrefill) ++report_.prefill_phases;
    const ParallelismConfig from = cur_;
    if (from != to && from.pp > 1) {
      // Drain the pipeline before the layout changes.
      const Seconds drain = static_cast<double>(from.pp - 1) * last_step_cost_;
      advance_to(now_ + drain);
      if (to_phase == kPhasePrefill) {
        report_.decode_time += drain;
      } else {
        report_.prefill_time += drain;
      }
    }
    emit_phase(to_phase);
    const reshard::TransferPlan plan = reshard::weight_reload_plan(model_, hw_, from, to);
    if (plan.wall_time > 0.0) {
      Event b;
      b.time = now_;
      b.kind = EventKind::kReshardBegin;
      b.bytes = plan.total_bytes();
      emit(b);
      for (const auto& load : plan.loads) {
        Event w;
        w.time = now_;
        w.kind = EventKind::kWeightLoad;
        w.gpu_id = load.gpu_id;
        w.bytes = load.bytes_to_load;
        emit(w);
      }
      advance_to(now_ + plan.wall_time);
      Event e;
      e.time = now_;
      e.kind = EventKind::kReshardEnd;
      e.wall = plan.wall_time;
      emit(e);
      report_.reshard_time += plan.wall_time;
    }
    cur_ = to;
    last_step_cost_ = 0.0;
  }

  bool pending() const { return next_pending_ < static_cast<std::int64_t>(seqs_.size()); }

  bool room_for_next_prompt() const {
    return pending() && gpu_used_ + prompt_bytes(seqs_[next_pending_]) <= gpu_cap_;
  }

  // ---- policies ----------------------------------------------------------

  void run_transition_minimizing() {
    while (true) {
      // Prefill into the host tier until it cannot take the next request.
      while (true) {
        PackStop stop = PackStop::kNone;
        const auto batch = pack_prefill(true, &stop);
        // KV still streaming out would cut the batch short; let it land first.
        if (stop == PackStop::kGpuFull && !out_queue_.empty()) {
          wait_for_transfers(last_end(out_queue_));
          continue;
        }
        if (!batch.empty()) {
          prefill_step(batch, true);
          continue;
        }
        break;
      }
      wait_for_transfers(last_end(out_queue_));
      transition(kPhaseDecode, cfg_d_);

      // The first wave fills GPU KV before decoding starts.
      issue_prefetches();
      wait_for_transfers(last_end(in_queue_));

      // Decode until the host tier is empty; the prefetcher refills GPU KV.
      // Sequences still decoding at that point stay resident, untouched by
      // prefill, and rejoin the next decode phase.
      while (true) {
        issue_prefetches();
        if (cpu_fifo_.empty() && room_for_next_prompt()) {
          wait_for_transfers(last_end(in_queue_));
          break;
        }
        if (ready_.empty()) {
          if (!in_queue_.empty()) {
            wait_for_transfers(last_end(in_queue_));
            continue;
          }
          break;
        }
        join_swap_ins();
        decode_round();
      }
      if (!pending()) break;
      transition(kPhasePrefill, cfg_p_);
    }
  }

  void run_decode_prioritized() {
    bool first = true;
    while (pending()) {
      if (!first) transition(kPhasePrefill, cfg_p_);
      first = false;
      while (true) {
        PackStop stop = PackStop::kNone;
        const auto batch = pack_prefill(false, &stop);
        if (batch.empty()) break;
        prefill_step(batch, false);
      }
      transition(kPhaseDecode, cfg_d_);
      while (!ready_.empty()) decode_round();
    }
  }

  void run_prefill_prioritized() {
    bool decoding = false;
    while (pending() || !ready_.empty()) {
      PackStop stop = PackStop::kNone;
      const auto batch = pending() ? pack_prefill(false, &stop) : std::vector<std::int64_t>{};
      if (!batch.empty()) {
        if (decoding) transition(kPhasePrefill, cfg_p_);
        decoding = false;
        prefill_step(batch, false);
        continue;
      }
      if (!decoding) transition(kPhaseDecode, cfg_d_);
      decoding = true;
      decode_round();
    }
  }

  SimReport finish_report() {
    SimReport& r = report_;
    r.policy = policy_;
    r.cfg_p = cfg_p_;
    r.cfg_d = cfg_d_;
    r.options = opt_;
    r.gpu_capacity = gpu_cap_;
    r.cpu_capacity = cpu_cap_;
    r.kv_bytes_per_token = kvpt_;
    r.makespan = now_;
    const double n = static_cast<double>(seqs_.size());
    r.requests_per_second = now_ > 0.0 ? n / now_ : 0.0;
    r.tokens_per_second = now_ > 0.0 ? static_cast<double>(r.output_tokens) / now_ : 0.0;
    r.mean_decode_micro_batch =
        r.decode_steps > 0 ? micro_batch_sum_ / static_cast<double>(r.decode_steps) : 0.0;
    r.sequences.reserve(seqs_.size());
    for (const auto& s : seqs_) {
      r.sequences.push_back({s.req.id, s.req.input_len, s.req.output_len});
    }
    return std::move(report_);
  }

  ModelSpec model_;
  HardwareSpec hw_;
  Policy policy_;
  ParallelismConfig cfg_p_;
  ParallelismConfig cfg_d_;
  SimOptions opt_;

  Bytes kvpt_ = 0;
  Bytes gpu_cap_ = 0;
  Bytes cpu_cap_ = 0;
  Bytes gpu_used_ = 0;
  Bytes cpu_used_ = 0;

  std::vector<SeqState> seqs_;
  std::int64_t next_pending_ = 0;
  std::vector<std::int64_t> ready_;
  std::deque<std::int64_t> cpu_fifo_;
  std::deque<Transfer> out_queue_;
  std::deque<Transfer> in_queue_;
  Seconds out_free_at_ = 0.0;
  Seconds in_free_at_ = 0.0;
  Seconds link_free_at_ = 0.0;

  ParallelismConfig cur_;
  Seconds now_ = 0.0;
  Seconds last_step_cost_ = 0.0;
  double micro_batch_sum_ = 0.0;
  SimReport report_;
};

}  // namespace

SimReport simulate(const ModelSpec& model, const HardwareSpec& hw,
                   const std::vector<Request>& workload, Policy policy,
                   const ParallelismConfig& cfg_p, const ParallelismConfig& cfg_d,
                   const SimOptions& options) {
  Engine engine(model, hw, workload, policy, cfg_p, cfg_d, options);
  return engine.run();
}

}  // namespace pdshard::sim
