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

#include "kvvm/backend.h"

#include <algorithm>

namespace kvvm {

namespace {

bool out_of_memory(const Error& e) {
  return e.code() == ErrorCode::kDeviceOutOfMemory;
}

ActionCost to_cost(const ActionStats& s) {
  return ActionCost{s.device_calls, s.chunks_acquired, s.chunks_created};
}

ManagerConfig manager_config(const SimConfig& c) {
  ManagerConfig m;
  m.device = c.device;
  m.tokens_per_chunk = c.tokens_per_chunk();
  m.vts.max_seq_len = c.max_seq_len;
  m.vts.initial_alloc_tokens = c.initial_alloc_tokens;
  m.vts.lookahead_chunks = c.lookahead_chunks;
  m.prefix_cache_max_chunks = c.prefix_cache_max_chunks;
  return m;
}

}  // namespace

VTensorBackend::VTensorBackend(const SimConfig& config)
    : config_(config), manager_(manager_config(config)) {}

void VTensorBackend::acquire_activation() {
  Device& device = manager_.device();
  try {
    device.acquire_activation();
  } catch (const Error& e) {
    if (!out_of_memory(e)) throw;
    // Lazily retained chunks give way to activations.
    manager_.ops().trim(device.config().activation_bytes_per_request);
    device.acquire_activation();
  }
}

PrefillResult VTensorBackend::prefill(RequestId request,
                                      std::span<const TokenId> prompt) {
  VTensorScheduler& vts = manager_.vts();
  const uint64_t calls = manager_.device().total_calls();
  acquire_activation();
  PrefillResult result;
  ActionStats stats;
  try {
    PrefixMatchResult hit = vts.prefix_match(request, prompt);
    if (hit.matched_tokens > 0) {
      result.matched_tokens = hit.matched_tokens;
      stats += hit.stats;
    } else {
      stats += vts.create(request, prompt.size());
    }
    stats += vts.extend(request, prompt.size());
  } catch (const Error&) {
    vts.release(request);
    manager_.device().release_activation();
    throw;
  }
  holding_.insert(request);
  const uint64_t ahead = std::min<uint64_t>(
      prompt.size() + config_.lookahead_chunks * vts.tokens_per_chunk(),
      config_.max_seq_len);
  try {
    stats += vts.extend(request, ahead);
  } catch (const Error& e) {
    if (!out_of_memory(e)) throw;
  }
  result.cost = to_cost(stats);
  result.cost.device_calls = manager_.device().total_calls() - calls;
  return result;
}

ActionCost VTensorBackend::ensure(RequestId request, uint64_t needed,
                                  uint64_t desired) {
  VTensorScheduler& vts = manager_.vts();
  try {
    return to_cost(vts.extend(request, std::max(needed, desired)));
  } catch (const Error& e) {
    if (!out_of_memory(e) || desired <= needed) throw;
  }
  return to_cost(vts.extend(request, needed));
}

void VTensorBackend::commit(RequestId request,
                            std::span<const TokenId> tokens) {
  manager_.vts().commit(request, tokens);
}

uint64_t VTensorBackend::token_count(RequestId request) const {
  const RequestMem* m = manager_.vts().find(request);
  return m == nullptr ? 0 : m->vt.token_count;
}

uint64_t VTensorBackend::provisioned_tokens(RequestId request) const {
  const RequestMem* m = manager_.vts().find(request);
  return m == nullptr ? 0 : m->provisioned_tokens;
}

ActionCost VTensorBackend::finish(RequestId request, bool record) {
  ActionCost cost;
  if (record && manager_.vts().find(request) != nullptr) {
    cost += to_cost(manager_.vts().prefix_record(request));
  }
  cost += release(request);
  return cost;
}

ActionCost VTensorBackend::release(RequestId request) {
  ActionCost cost = to_cost(manager_.vts().release(request));
  if (holding_.erase(request) > 0) manager_.device().release_activation();
  return cost;
}

bool VTensorBackend::evict_prefix() {
  return manager_.ops().evict_prefix_lru();
}

void VTensorBackend::end_of_run(bool evict_prefix) {
  manager_.ops().empty_memory(evict_prefix);
}

MemorySample VTensorBackend::snapshot() const {
  return kvvm::snapshot(manager_, config_.bytes_per_token());
}

NativeBackend::NativeBackend(const SimConfig& config)
    : native_(NativeConfig{config.device, config.bytes_per_token(),
                           config.max_seq_len}) {}

PrefillResult NativeBackend::prefill(RequestId request,
                                     std::span<const TokenId> prompt) {
  if (prompt.size() > native_.config().max_seq_len) {
    throw Error(ErrorCode::kExceedsMaxSeqLen, "prompt longer than max_seq_len");
  }
  native_.admit(request);
  PrefillResult result;
  result.cost.device_calls = 1;
  return result;
}

ActionCost NativeBackend::ensure(RequestId, uint64_t needed, uint64_t) {
  if (needed > native_.config().max_seq_len) {
    throw Error(ErrorCode::kExceedsMaxSeqLen, "past max_seq_len");
  }
  return {};
}

void NativeBackend::commit(RequestId request,
                           std::span<const TokenId> tokens) {
  native_.commit(request, tokens.size());
}

uint64_t NativeBackend::token_count(RequestId request) const {
  return native_.token_count(request);
}

uint64_t NativeBackend::provisioned_tokens(RequestId request) const {
  return native_.holds(request) ? native_.config().max_seq_len : 0;
}

ActionCost NativeBackend::finish(RequestId request, bool) {
  return release(request);
}

ActionCost NativeBackend::release(RequestId request) {
  ActionCost cost;
  if (native_.holds(request)) cost.device_calls = 1;
  native_.release(request);
  return cost;
}

MemorySample NativeBackend::snapshot() const {
  return kvvm::snapshot(native_);
}

PagedBackend::PagedBackend(const SimConfig& config)
    : paged_(PagedConfig{
          config.device, config.bytes_per_token(), config.block_size_tokens,
          config.max_batch * config.device.activation_bytes_per_request,
          config.max_seq_len}) {}

PrefillResult PagedBackend::prefill(RequestId request,
                                    std::span<const TokenId> prompt) {
  paged_.admit(request);
  try {
    paged_.ensure(request, prompt.size());
  } catch (const Error&) {
    paged_.release(request);
    throw;
  }
  return {};
}

ActionCost PagedBackend::ensure(RequestId request, uint64_t needed,
                                uint64_t) {
  // The pool is already claimed; only the block table grows.
  paged_.ensure(request, needed);
  return {};
}

void PagedBackend::commit(RequestId request, std::span<const TokenId> tokens) {
  paged_.commit(request, tokens.size());
}

uint64_t PagedBackend::token_count(RequestId request) const {
  return paged_.token_count(request);
}

uint64_t PagedBackend::provisioned_tokens(RequestId request) const {
  return paged_.holds(request) ? paged_.provisioned_tokens(request) : 0;
}

ActionCost PagedBackend::finish(RequestId request, bool) {
  return release(request);
}

ActionCost PagedBackend::release(RequestId request) {
  paged_.release(request);
  return {};
}

MemorySample PagedBackend::snapshot() const {
  return kvvm::snapshot(paged_);
}

std::unique_ptr<KvBackend> make_backend(const SimConfig& config) {
  config.validate();
  switch (config.allocator) {
    case AllocatorKind::kNative:
      return std::make_unique<NativeBackend>(config);
    case AllocatorKind::kPaged:
      return std::make_unique<PagedBackend>(config);
    case AllocatorKind::kVTensor:
      return std::make_unique<VTensorBackend>(config);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown allocator");
}

}  // namespace kvvm
