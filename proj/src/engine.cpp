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

#include "kvvm/engine.h"

#include <algorithm>
#include <string>

namespace kvvm {

namespace {

std::string name(RequestId id) { return "request " + std::to_string(id.value); }

bool out_of_memory(const Error& e) {
  return e.code() == ErrorCode::kDeviceOutOfMemory;
}

}  // namespace

std::vector<Request> materialize(std::span<const TraceRecord> trace,
                                 uint64_t seed) {
  std::vector<Request> out;
  out.reserve(trace.size());
  for (const TraceRecord& r : trace) {
    if (r.output_len == 0) {
      throw Error(ErrorCode::kBadTrace, name(RequestId{r.id}) +
                                            ": output_len must be >= 1");
    }
    Request q;
    q.id = RequestId{r.id};
    q.arrival_step = r.arrival_step;
    q.conversation = r.conversation;
    q.output_len = r.output_len;
    q.stream = stream_key(r);
    if (r.prompt_tokens) {
      if (r.prompt_tokens->size() != r.prompt_len) {
        throw Error(ErrorCode::kBadTrace,
                    name(q.id) + ": prompt_tokens length != prompt_len");
      }
      q.prompt = *r.prompt_tokens;
    } else {
      q.prompt.resize(r.prompt_len);
      for (uint64_t p = 0; p < r.prompt_len; ++p) {
        q.prompt[p] = synth_token(seed, q.stream, p);
      }
    }
    out.push_back(std::move(q));
  }
  return out;
}

Engine::Engine(const SimConfig& config, std::vector<Request> requests)
    : config_(config), backend_(make_backend(config)) {
  std::stable_sort(requests.begin(), requests.end(),
                   [](const Request& a, const Request& b) {
                     return a.arrival_step < b.arrival_step;
                   });
  for (Request& r : requests) {
    const uint64_t peak = r.prompt.size() + r.output_len - 1;
    if (peak > config_.max_seq_len) {
      throw Error(ErrorCode::kTraceInfeasible,
                  name(r.id) + " needs " + std::to_string(peak) +
                      " tokens of KV, max_seq_len is " +
                      std::to_string(config_.max_seq_len));
    }
    Slot slot;
    slot.outcome.id = r.id;
    slot.request = std::move(r);
    slots_.push_back(std::move(slot));
  }
}

bool Engine::done() const { return released_ == slots_.size(); }

RequestState Engine::state(RequestId request) const {
  for (const Slot& s : slots_) {
    if (s.request.id == request) return s.state;
  }
  throw Error(ErrorCode::kInvalidArgument, name(request) + " not in trace");
}

TokenId Engine::token_at(const Slot& slot, uint64_t position) const {
  if (position < slot.request.prompt.size()) {
    return slot.request.prompt[position];
  }
  return synth_token(config_.seed, slot.request.stream, position);
}

bool Engine::conversation_continues(const Slot& slot) const {
  if (!slot.request.conversation) return false;
  for (const Slot& s : slots_) {
    if (&s != &slot && s.state == RequestState::kQueued &&
        s.request.conversation == slot.request.conversation) {
      return true;
    }
  }
  return false;
}

bool Engine::holding(const Slot& slot) const {
  return slot.state == RequestState::kPrefilling ||
         slot.state == RequestState::kDecoding;
}

size_t Engine::holding_count() const {
  return std::count_if(slots_.begin(), slots_.end(),
                       [this](const Slot& s) { return holding(s); });
}

Engine::Slot* Engine::lowest_holding() {
  for (auto it = slots_.rbegin(); it != slots_.rend(); ++it) {
    if (holding(*it)) return &*it;
  }
  return nullptr;
}

uint64_t Engine::issue(Slot& slot, MemoryAction action, uint64_t calls,
                       uint64_t earliest, EngineStep& step) {
  MemoryOp op;
  op.request = slot.request.id;
  op.action = action;
  op.device_calls = calls;
  op.issue_time = std::max(memory_free_at_, earliest);
  op.complete_time = op.issue_time + calls * config_.cost.mem_op_cost;
  memory_free_at_ = op.complete_time;
  step.memory_ops.push_back(op);
  return op.complete_time;
}

uint64_t Engine::ready_time(const Slot& slot, uint64_t tokens) const {
  for (const auto& [provisioned, ready] : slot.provisions) {
    if (provisioned >= tokens) return ready;
  }
  // Unreachable for a request that passed ensure().
  return UINT64_MAX;
}

void Engine::preempt(Slot& slot, EngineStep& step) {
  const ActionCost cost = backend_->release(slot.request.id);
  issue(slot, MemoryAction::kRelease, cost.device_calls, now_, step);
  slot.state = RequestState::kQueued;
  slot.generated = 0;
  slot.provisions.clear();
  ++slot.outcome.preemptions;
  ++step.preemptions;
}

EngineStep Engine::step() {
  if (done()) throw Error(ErrorCode::kInvalidState, "trace already finished");
  if (holding_count() == 0) {
    uint64_t next = UINT64_MAX;
    for (const Slot& s : slots_) {
      if (s.state == RequestState::kQueued) {
        next = std::min(next, s.request.arrival_step);
      }
    }
    step_index_ = std::max(step_index_, next);
  }

  EngineStep out;
  out.step_index = step_index_;
  const uint64_t t0 = now_;
  const uint64_t tpc = config_.tokens_per_chunk();
  uint64_t setup_ready = t0;
  bool admission_open = true;
  std::vector<Slot*> decodes;
  std::vector<Slot*> prefills;

  for (Slot& slot : slots_) {
    if (slot.state != RequestState::kDecoding) continue;
    const RequestId id = slot.request.id;
    const uint64_t needed = backend_->token_count(id) + 1;
    const uint64_t desired =
        std::min(needed + config_.lookahead_chunks * tpc, config_.max_seq_len);
    const uint64_t before = backend_->provisioned_tokens(id);
    bool keep = true;
    for (;;) {
      try {
        const ActionCost cost = backend_->ensure(id, needed, desired);
        const uint64_t after = backend_->provisioned_tokens(id);
        if (after > before) {
          const uint64_t ready = issue(slot, MemoryAction::kExtend,
                                       cost.device_calls, t0, out);
          slot.provisions.emplace_back(after, ready);
        }
        slot.outcome.chunks_acquired += cost.chunks_acquired;
        slot.outcome.chunks_created += cost.chunks_created;
        break;
      } catch (const Error& e) {
        if (!out_of_memory(e)) throw;
        if (backend_->evict_prefix()) continue;
        Slot* victim = lowest_holding();
        if (victim == &slot && holding_count() == 1) {
          throw Error(ErrorCode::kTraceInfeasible,
                      name(id) + " cannot grow to " + std::to_string(needed) +
                          " tokens even alone");
        }
        preempt(*victim, out);
        admission_open = false;
        if (victim == &slot) {
          keep = false;
          break;
        }
      }
    }
    if (keep) decodes.push_back(&slot);
  }

  for (Slot& slot : slots_) {
    if (!admission_open || holding_count() >= config_.max_batch) break;
    if (slot.state != RequestState::kQueued ||
        slot.request.arrival_step > step_index_) {
      continue;
    }
    const RequestId id = slot.request.id;
    std::optional<PrefillResult> result;
    for (;;) {
      try {
        result = backend_->prefill(id, slot.request.prompt);
        break;
      } catch (const Error& e) {
        if (!out_of_memory(e)) throw;
        if (backend_->evict_prefix()) continue;
        if (holding_count() == 0) {
          throw Error(ErrorCode::kTraceInfeasible,
                      name(id) + " does not fit on an idle device");
        }
        admission_open = false;
        break;
      }
    }
    if (!result) break;
    slot.state = RequestState::kPrefilling;
    slot.outcome.matched_tokens = result->matched_tokens;
    slot.outcome.prefill_chunks_acquired = result->cost.chunks_acquired;
    slot.outcome.prefill_chunks_created = result->cost.chunks_created;
    slot.outcome.chunks_acquired += result->cost.chunks_acquired;
    slot.outcome.chunks_created += result->cost.chunks_created;
    slot.outcome.admit_step = step_index_;
    const uint64_t ready =
        issue(slot, MemoryAction::kPrefill, result->cost.device_calls, t0, out);
    slot.provisions.emplace_back(backend_->provisioned_tokens(id), ready);
    setup_ready = std::max(setup_ready, ready);
    prefills.push_back(&slot);
  }

  out.compute_start = setup_ready;
  uint64_t prefill_tokens = 0;
  for (Slot* slot : decodes) {
    const uint64_t needed = backend_->token_count(slot->request.id) + 1;
    if (ready_time(*slot, needed) > out.compute_start) ++out.stalled_requests;
    out.batch.push_back(slot->request.id);
  }
  for (Slot* slot : prefills) {
    prefill_tokens += slot->request.prompt.size() - slot->outcome.matched_tokens;
    out.batch.push_back(slot->request.id);
  }
  out.stall = out.stalled_requests > 0;
  out.compute_time = config_.cost.prefill_cost_per_token * prefill_tokens +
                     config_.cost.decode_cost_per_request * decodes.size();
  now_ = out.compute_start + out.compute_time;

  for (Slot* slot : prefills) {
    const auto& prompt = slot->request.prompt;
    backend_->commit(slot->request.id,
                     std::span<const TokenId>(prompt).subspan(
                         slot->outcome.matched_tokens));
    slot->generated = 1;
    slot->state = RequestState::kDecoding;
  }
  for (Slot* slot : decodes) {
    const TokenId token =
        token_at(*slot, backend_->token_count(slot->request.id));
    backend_->commit(slot->request.id, std::span<const TokenId>(&token, 1));
    ++slot->generated;
  }

  StepSample sample;
  sample.step = step_index_;
  sample.memory = backend_->snapshot();
  sample.active_requests = out.batch.size();
  sample.stalls = out.stalled_requests;
  sample.preemptions = out.preemptions;
  sample.start_time = t0;
  sample.compute_start = out.compute_start;
  sample.compute_time = out.compute_time;
  if (!sample.memory.breakdown.sums_to_capacity()) ++capacity_violations_;
  samples_.push_back(sample);

  for (Slot& slot : slots_) {
    if (slot.state != RequestState::kDecoding ||
        slot.generated < slot.request.output_len) {
      continue;
    }
    slot.state = RequestState::kFinished;
    const bool record = conversation_continues(slot);
    const ActionCost cost = backend_->finish(slot.request.id, record);
    issue(slot,
          record ? MemoryAction::kPrefixRecord : MemoryAction::kRelease,
          cost.device_calls, now_, out);
    slot.state = RequestState::kReleased;
    slot.outcome.generated = slot.generated;
    slot.outcome.finish_step = step_index_;
    ++released_;
  }

  ++step_index_;
  return out;
}

SimulationReport Engine::finish() {
  backend_->end_of_run(config_.evict_prefix);
  SimulationReport report;
  report.allocator = config_.allocator;
  report.steps = samples_;
  for (const Slot& s : slots_) report.requests.push_back(s.outcome);
  std::sort(report.requests.begin(), report.requests.end(),
            [](const RequestOutcome& a, const RequestOutcome& b) {
              return a.id < b.id;
            });
  report.summary = flexibility_summary(samples_);
  report.final_memory = backend_->snapshot();
  report.total_time = std::max(now_, memory_free_at_);
  for (const StepSample& s : samples_) {
    report.total_stalls += s.stalls;
    report.total_preemptions += s.preemptions;
  }
  report.capacity_violations = capacity_violations_;
  return report;
}

SimulationReport run_trace(std::span<const TraceRecord> trace,
                           const SimConfig& config) {
  Engine engine(config, materialize(trace, config.seed));
  while (!engine.done()) engine.step();
  return engine.finish();
}

}  // namespace kvvm
