/* Copyright 2026 The kvvm Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "kvvm/report.h"

#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace kvvm {

void write_csv(std::ostream& out, const SimulationReport& report) {
  out << "step,created_bytes,mapped_bytes,used_bytes,reserved_virtual_bytes,"
         "free_bytes,active_requests,stalls,preemptions\n";
  for (const StepSample& s : report.steps) {
    out << s.step << ',' << s.memory.created_bytes << ','
        << s.memory.mapped_bytes << ',' << s.memory.breakdown.kv_used << ','
        << s.memory.reserved_virtual_bytes << ',' << s.memory.breakdown.free
        << ',' << s.active_requests << ',' << s.stalls << ',' << s.preemptions
        << '\n';
  }
}

std::string to_csv(const SimulationReport& report) {
  std::ostringstream out;
  write_csv(out, report);
  return out.str();
}

namespace {

nlohmann::json breakdown_json(const MemoryBreakdown& b) {
  return {{"capacity", b.capacity},
          {"weights", b.weights},
          {"activation", b.activation},
          {"kv_used", b.kv_used},
          {"kv_allocated", b.kv_allocated},
          {"reserved", b.reserved},
          {"retained", b.retained},
          {"pinned", b.pinned},
          {"lookahead", b.lookahead},
          {"fragmentation", b.fragmentation},
          {"free", b.free}};
}

}  // namespace

void write_summary_json(std::ostream& out, const SimulationReport& report,
                        const SimConfig& config) {
  nlohmann::json j;
  j["allocator"] = allocator_name(report.allocator);
  j["config"] = {
      {"capacity_bytes", config.device.capacity_bytes},
      {"chunk_size_bytes", config.device.chunk_size_bytes},
      {"weights_bytes", config.device.weights_bytes},
      {"activation_bytes_per_request",
       config.device.activation_bytes_per_request},
      {"bytes_per_token", config.bytes_per_token()},
      {"max_seq_len", config.max_seq_len},
      {"initial_alloc_tokens", config.initial_alloc_tokens},
      {"lookahead_chunks", config.lookahead_chunks},
      {"block_size_tokens", config.block_size_tokens},
      {"max_batch", config.max_batch},
      {"seed", config.seed},
  };
  j["steps"] = report.steps.size();
  j["requests"] = report.requests.size();
  j["total_time"] = report.total_time;
  j["total_stalls"] = report.total_stalls;
  j["total_preemptions"] = report.total_preemptions;
  j["capacity_violations"] = report.capacity_violations;
  j["mean_free_fraction"] = report.summary.mean_free_fraction;
  j["peak_kv_allocated"] = report.summary.peak_kv_allocated;
  j["stall_rate"] = report.summary.stall_rate;
  j["preemption_count"] = report.summary.preemption_count;
  j["final_memory"] = breakdown_json(report.final_memory.breakdown);
  j["final_created_bytes"] = report.final_memory.created_bytes;
  out << j.dump(2) << '\n';
}

void write_comparison(std::ostream& out,
                      std::span<const SimulationReport> reports) {
  out << std::left << std::setw(10) << "allocator" << std::right
      << std::setw(8) << "steps" << std::setw(12) << "free_frac"
      << std::setw(16) << "peak_kv_MiB" << std::setw(8) << "stalls"
      << std::setw(12) << "preempted" << std::setw(14) << "total_time"
      << '\n';
  for (const SimulationReport& r : reports) {
    out << std::left << std::setw(10) << allocator_name(r.allocator)
        << std::right << std::setw(8) << r.steps.size() << std::setw(12)
        << std::fixed << std::setprecision(4) << r.summary.mean_free_fraction
        << std::setw(16) << r.summary.peak_kv_allocated / (1024 * 1024)
        << std::setw(8) << r.total_stalls << std::setw(12)
        << r.total_preemptions << std::setw(14) << r.total_time << '\n';
  }
}

}  // namespace kvvm
