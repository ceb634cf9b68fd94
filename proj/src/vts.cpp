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

#include "kvvm/vts.h"

#include <algorithm>
#include <string>
#include <vector>

namespace kvvm {

namespace {

// Measures the device traffic caused by one action.
class CallMeter {
 public:
  explicit CallMeter(const Device& device)
      : device_(device),
        calls_(device.total_calls()),
        creates_(device.call_count(DeviceCall::kCreate)) {}

  void finish(ActionStats& stats) const {
    stats.device_calls = device_.total_calls() - calls_;
    stats.chunks_created = device_.call_count(DeviceCall::kCreate) - creates_;
  }

 private:
  const Device& device_;
  uint64_t calls_;
  uint64_t creates_;
};

}  // namespace

VTensorScheduler::VTensorScheduler(Ops& ops, VtsConfig config)
    : ops_(ops), config_(config), tpc_(ops.config().tokens_per_chunk) {
  if (config_.max_seq_len != ops.config().max_seq_len) {
    throw Error(ErrorCode::kInvalidArgument,
                "scheduler and ops disagree on max_seq_len");
  }
}

RequestMem& VTensorScheduler::mem(RequestId request) {
  auto it = mems_.find(request);
  if (it == mems_.end()) {
    throw Error(ErrorCode::kInvalidState,
                "request " + std::to_string(request.value) + " has no memory");
  }
  return it->second;
}

const RequestMem* VTensorScheduler::find(RequestId request) const {
  auto it = mems_.find(request);
  return it == mems_.end() ? nullptr : &it->second;
}

void VTensorScheduler::grow_to(RequestMem& m, uint64_t pages,
                               ActionStats& stats) {
  const VirtualSpace& space = ops_.pool().space(m.vt.space);
  if (pages <= space.mapped_pages) return;
  const uint64_t deficit = pages - space.mapped_pages;
  std::vector<PhysicalHandle> chunks = ops_.p_alloc(deficit);
  ops_.map(m.vt.space, chunks);
  stats.chunks_acquired += deficit;
  m.chunks_acquired += deficit;
  m.provisioned_tokens = pages * tpc_;
}

ActionStats VTensorScheduler::create(RequestId request, uint64_t prompt_len) {
  if (mems_.contains(request)) {
    throw Error(ErrorCode::kInvalidState,
                "request " + std::to_string(request.value) +
                    " already has memory");
  }
  if (prompt_len > config_.max_seq_len) {
    throw Error(ErrorCode::kExceedsMaxSeqLen,
                "prompt of " + std::to_string(prompt_len) + " tokens");
  }
  ActionStats stats;
  CallMeter meter(ops_.device());
  const uint64_t initial = std::min(
      std::max(prompt_len, config_.initial_alloc_tokens), config_.max_seq_len);

  RequestMem m;
  m.request = request;
  m.vt.space = ops_.v_alloc(config_.max_seq_len);
  m.vt.owner = request;
  m.vt.capacity_tokens = ops_.pages_per_space() * tpc_;
  ops_.pool().space(m.vt.space).owner = request;
  try {
    grow_to(m, ceil_div(initial, tpc_), stats);
  } catch (const Error&) {
    ops_.unmap_space(m.vt.space);
    throw;
  }
  meter.finish(stats);
  m.chunks_created += stats.chunks_created;
  mems_.emplace(request, std::move(m));
  return stats;
}

ActionStats VTensorScheduler::extend(RequestId request,
                                     uint64_t target_tokens) {
  RequestMem& m = mem(request);
  if (target_tokens > config_.max_seq_len) {
    throw Error(ErrorCode::kExceedsMaxSeqLen,
                std::to_string(target_tokens) + " > " +
                    std::to_string(config_.max_seq_len));
  }
  ActionStats stats;
  if (m.provisioned_tokens >= target_tokens) return stats;
  CallMeter meter(ops_.device());
  grow_to(m, ceil_div(target_tokens, tpc_), stats);
  meter.finish(stats);
  m.chunks_created += stats.chunks_created;
  return stats;
}

void VTensorScheduler::commit(RequestId request,
                              std::span<const TokenId> tokens) {
  RequestMem& m = mem(request);
  if (m.vt.token_count + tokens.size() > m.provisioned_tokens) {
    throw Error(ErrorCode::kCapacityExceeded,
                "writing " + std::to_string(tokens.size()) +
                    " tokens past provisioned capacity " +
                    std::to_string(m.provisioned_tokens));
  }
  m.vt.tokens.insert(m.vt.tokens.end(), tokens.begin(), tokens.end());
  m.vt.token_count += tokens.size();
}

ActionStats VTensorScheduler::prefix_record(RequestId request) {
  ActionStats stats;
  CallMeter meter(ops_.device());
  ops_.r_push(mem(request).vt);
  meter.finish(stats);
  return stats;
}

PrefixMatchResult VTensorScheduler::prefix_match(
    RequestId request, std::span<const TokenId> prompt) {
  if (mems_.contains(request)) {
    throw Error(ErrorCode::kInvalidState,
                "request " + std::to_string(request.value) +
                    " already has memory");
  }
  if (prompt.size() > config_.max_seq_len) {
    throw Error(ErrorCode::kExceedsMaxSeqLen,
                "prompt of " + std::to_string(prompt.size()) + " tokens");
  }
  PrefixMatchResult result;
  auto hit = ops_.r_prefix_match(prompt);
  if (!hit) return result;

  CallMeter meter(ops_.device());
  const uint64_t shared_pages = hit->matched_tokens / tpc_;
  const VirtualSpace& donor = ops_.pool().space(hit->vt.space);
  std::vector<PhysicalHandle> shared;
  shared.reserve(shared_pages);
  for (uint64_t i = 0; i < shared_pages; ++i) {
    shared.push_back(*donor.page_table[i]);
  }

  RequestMem m;
  m.request = request;
  m.vt.space = ops_.v_alloc(config_.max_seq_len);
  m.vt.owner = request;
  m.vt.capacity_tokens = ops_.pages_per_space() * tpc_;
  m.vt.tokens.assign(prompt.begin(), prompt.begin() + hit->matched_tokens);
  m.vt.token_count = hit->matched_tokens;
  m.shared_prefix_tokens = hit->matched_tokens;
  ops_.pool().space(m.vt.space).owner = request;
  ops_.map(m.vt.space, shared);
  m.provisioned_tokens = shared_pages * tpc_;

  const uint64_t initial = std::min(
      std::max<uint64_t>(prompt.size(), config_.initial_alloc_tokens),
      config_.max_seq_len);
  try {
    grow_to(m, ceil_div(initial, tpc_), result.stats);
  } catch (const Error&) {
    ops_.unmap_space(m.vt.space);
    throw;
  }
  meter.finish(result.stats);
  m.chunks_created += result.stats.chunks_created;
  result.matched_tokens = hit->matched_tokens;
  result.donor = hit->vt.space;
  mems_.emplace(request, std::move(m));
  return result;
}

ActionStats VTensorScheduler::release(RequestId request) {
  ActionStats stats;
  auto it = mems_.find(request);
  if (it == mems_.end()) return stats;
  CallMeter meter(ops_.device());
  ops_.unmap_space(it->second.vt.space);
  mems_.erase(it);
  meter.finish(stats);
  return stats;
}

VTensorManager::VTensorManager(const ManagerConfig& config)
    : device_(config.device),
      pool_(config.tokens_per_chunk),
      ops_(device_, pool_,
           OpsConfig{config.tokens_per_chunk, config.vts.max_seq_len,
                     config.prefix_cache_max_chunks}),
      vts_(ops_, config.vts) {}

void VTensorManager::attach_log(OpLog* log) {
  device_.attach_log(log, ops_.config().tokens_per_chunk);
  ops_.attach_log(log);
}

}  // namespace kvvm
