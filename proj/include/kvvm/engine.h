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

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "kvvm/backend.h"
#include "kvvm/common.h"
#include "kvvm/config.h"
#include "kvvm/metrics.h"
#include "kvvm/trace.h"

namespace kvvm {

struct Request {
  RequestId id;
  uint64_t arrival_step = 0;
  std::optional<uint64_t> conversation;
  std::vector<TokenId> prompt;
  uint64_t output_len = 1;
  // Source of generated tokens; see stream_key.
  uint64_t stream = 0;
};

// Resolves synthetic prompts. Throws kBadTrace on malformed records.
std::vector<Request> materialize(std::span<const TraceRecord> trace,
                                 uint64_t seed);

enum class RequestState {
  kQueued,
  kPrefilling,
  kDecoding,
  kPreempted,
  kFinished,
  kReleased,
};

enum class MemoryAction { kPrefill, kExtend, kPrefixRecord, kRelease };

struct MemoryOp {
  RequestId request;
  MemoryAction action = MemoryAction::kExtend;
  uint64_t device_calls = 0;
  uint64_t issue_time = 0;
  uint64_t complete_time = 0;
};

struct EngineStep {
  uint64_t step_index = 0;
  std::vector<RequestId> batch;
  uint64_t compute_start = 0;
  uint64_t compute_time = 0;
  std::vector<MemoryOp> memory_ops;
  // Batched requests whose capacity was not ready at compute start.
  uint64_t stalled_requests = 0;
  bool stall = false;
  uint64_t preemptions = 0;
};

struct RequestOutcome {
  RequestId id;
  uint64_t generated = 0;
  uint64_t preemptions = 0;
  // From the last admission.
  uint64_t matched_tokens = 0;
  uint64_t prefill_chunks_acquired = 0;
  uint64_t prefill_chunks_created = 0;
  uint64_t admit_step = 0;
  uint64_t finish_step = 0;
  // Lifetime totals, across preemptions.
  uint64_t chunks_acquired = 0;
  uint64_t chunks_created = 0;
};

struct SimulationReport {
  AllocatorKind allocator = AllocatorKind::kVTensor;
  std::vector<StepSample> steps;
  std::vector<RequestOutcome> requests;
  FlexibilitySummary summary;
  // After end-of-run reclamation.
  MemorySample final_memory;
  uint64_t total_time = 0;
  uint64_t total_stalls = 0;
  uint64_t total_preemptions = 0;
  // Steps where weights, activations and KV exceeded the device.
  uint64_t capacity_violations = 0;
};

// Continuous-batching scheduler over one KV backend with a compute lane and
// a memory lane. Priority is arrival order, ties broken by trace order.
class Engine {
 public:
  // Throws kTraceInfeasible for a request that can never fit max_seq_len.
  Engine(const SimConfig& config, std::vector<Request> requests);

  bool done() const;
  EngineStep step();
  // Runs end-of-run reclamation and assembles the report.
  SimulationReport finish();

  RequestState state(RequestId request) const;
  const std::vector<StepSample>& samples() const { return samples_; }
  KvBackend& backend() { return *backend_; }
  const KvBackend& backend() const { return *backend_; }
  const SimConfig& config() const { return config_; }
  uint64_t now() const { return now_; }

 private:
  struct Slot {
    Request request;
    RequestState state = RequestState::kQueued;
    uint64_t generated = 0;
    RequestOutcome outcome;
    // (provisioned tokens, memory-lane time it became usable).
    std::vector<std::pair<uint64_t, uint64_t>> provisions;
  };

  TokenId token_at(const Slot& slot, uint64_t position) const;
  bool conversation_continues(const Slot& slot) const;
  bool holding(const Slot& slot) const;
  size_t holding_count() const;
  // Lowest-priority slot holding memory, if any.
  Slot* lowest_holding();
  void preempt(Slot& slot, EngineStep& step);
  uint64_t issue(Slot& slot, MemoryAction action, uint64_t calls,
                 uint64_t earliest, EngineStep& step);
  uint64_t ready_time(const Slot& slot, uint64_t tokens) const;

  SimConfig config_;
  std::unique_ptr<KvBackend> backend_;
  // Sorted by priority.
  std::vector<Slot> slots_;
  std::vector<StepSample> samples_;
  uint64_t step_index_ = 0;
  uint64_t now_ = 0;
  uint64_t memory_free_at_ = 0;
  uint64_t capacity_violations_ = 0;
  uint64_t released_ = 0;
};

// Runs `trace` to completion. Throws kTraceInfeasible when some request
// cannot be served even alone.
SimulationReport run_trace(std::span<const TraceRecord> trace,
                           const SimConfig& config);

}  // namespace kvvm
