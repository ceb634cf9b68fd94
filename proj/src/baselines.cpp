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

#include "kvvm/baselines.h"

#include <string>

namespace kvvm {

namespace {

uint64_t fixed_bytes(const DeviceConfig& device) {
  if (device.weights_bytes > device.capacity_bytes) {
    throw Error(ErrorCode::kInvalidSize, "weights exceed device capacity");
  }
  return device.weights_bytes;
}

std::string request_name(RequestId request) {
  return "request " + std::to_string(request.value);
}

}  // namespace

NativeAllocator::NativeAllocator(NativeConfig config) : config_(config) {
  config_.device.validate();
  fixed_bytes(config_.device);
  if (config_.bytes_per_token == 0 || config_.max_seq_len == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty native region");
  }
}

uint64_t NativeAllocator::region_bytes() const {
  return config_.max_seq_len * config_.bytes_per_token;
}

uint64_t NativeAllocator::activation_bytes() const {
  return live_requests() * config_.device.activation_bytes_per_request;
}

uint64_t NativeAllocator::free_bytes() const {
  return config_.device.capacity_bytes - config_.device.weights_bytes -
         activation_bytes() - allocated_bytes();
}

void NativeAllocator::admit(RequestId request) {
  if (holds(request)) {
    throw Error(ErrorCode::kInvalidState, request_name(request) + " admitted");
  }
  const uint64_t need =
      region_bytes() + config_.device.activation_bytes_per_request;
  if (need > free_bytes()) {
    throw Error(ErrorCode::kDeviceOutOfMemory,
                "native region of " + std::to_string(need) + " bytes");
  }
  tokens_.emplace(request, 0);
}

void NativeAllocator::commit(RequestId request, uint64_t tokens) {
  auto it = tokens_.find(request);
  if (it == tokens_.end()) {
    throw Error(ErrorCode::kInvalidState, request_name(request) + " unknown");
  }
  if (it->second + tokens > config_.max_seq_len) {
    throw Error(ErrorCode::kCapacityExceeded,
                request_name(request) + " past max_seq_len");
  }
  it->second += tokens;
  live_tokens_ += tokens;
}

void NativeAllocator::release(RequestId request) {
  auto it = tokens_.find(request);
  if (it == tokens_.end()) return;
  live_tokens_ -= it->second;
  tokens_.erase(it);
}

uint64_t NativeAllocator::token_count(RequestId request) const {
  auto it = tokens_.find(request);
  return it == tokens_.end() ? 0 : it->second;
}

PagedAllocator::PagedAllocator(PagedConfig config) : config_(config) {
  config_.device.validate();
  if (config_.bytes_per_token == 0 || config_.block_size_tokens == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty paged block");
  }
  const uint64_t fixed =
      fixed_bytes(config_.device) + config_.activation_headroom_bytes;
  if (fixed > config_.device.capacity_bytes) {
    throw Error(ErrorCode::kInvalidSize,
                "weights and activation headroom exceed device capacity");
  }
  block_count_ = (config_.device.capacity_bytes - fixed) / block_bytes();
  for (uint64_t b = 0; b < block_count_; ++b) free_blocks_.insert(b);
}

uint64_t PagedAllocator::block_bytes() const {
  return config_.block_size_tokens * config_.bytes_per_token;
}

uint64_t PagedAllocator::activation_bytes() const {
  return live_requests() * config_.device.activation_bytes_per_request;
}

uint64_t PagedAllocator::free_bytes() const {
  return config_.device.capacity_bytes - config_.device.weights_bytes -
         activation_bytes() - pool_bytes();
}

PagedAllocator::Table& PagedAllocator::table(RequestId request) {
  auto it = tables_.find(request);
  if (it == tables_.end()) {
    throw Error(ErrorCode::kInvalidState, request_name(request) + " unknown");
  }
  return it->second;
}

const PagedAllocator::Table& PagedAllocator::table(RequestId request) const {
  auto it = tables_.find(request);
  if (it == tables_.end()) {
    throw Error(ErrorCode::kInvalidState, request_name(request) + " unknown");
  }
  return it->second;
}

void PagedAllocator::admit(RequestId request) {
  if (holds(request)) {
    throw Error(ErrorCode::kInvalidState, request_name(request) + " admitted");
  }
  const uint64_t act = config_.device.activation_bytes_per_request;
  if (activation_bytes() + act > config_.activation_headroom_bytes) {
    throw Error(ErrorCode::kDeviceOutOfMemory, "activation headroom exhausted");
  }
  tables_.emplace(request, Table{});
}

void PagedAllocator::ensure(RequestId request, uint64_t tokens) {
  if (tokens > config_.max_seq_len) {
    throw Error(ErrorCode::kExceedsMaxSeqLen,
                std::to_string(tokens) + " > " +
                    std::to_string(config_.max_seq_len));
  }
  Table& t = table(request);
  const uint64_t want = ceil_div(tokens, config_.block_size_tokens);
  if (want <= t.blocks.size()) return;
  const uint64_t deficit = want - t.blocks.size();
  if (deficit > free_blocks_.size()) {
    throw Error(ErrorCode::kDeviceOutOfMemory,
                "paged pool has " + std::to_string(free_blocks_.size()) +
                    " free blocks, need " + std::to_string(deficit));
  }
  for (uint64_t i = 0; i < deficit; ++i) {
    t.blocks.push_back(*free_blocks_.begin());
    free_blocks_.erase(free_blocks_.begin());
  }
}

void PagedAllocator::commit(RequestId request, uint64_t tokens) {
  Table& t = table(request);
  if (t.tokens + tokens > t.blocks.size() * config_.block_size_tokens) {
    throw Error(ErrorCode::kCapacityExceeded,
                request_name(request) + " past its block table");
  }
  t.tokens += tokens;
  live_tokens_ += tokens;
}

void PagedAllocator::release(RequestId request) {
  auto it = tables_.find(request);
  if (it == tables_.end()) return;
  for (uint64_t b : it->second.blocks) free_blocks_.insert(b);
  live_tokens_ -= it->second.tokens;
  tables_.erase(it);
}

uint64_t PagedAllocator::token_count(RequestId request) const {
  auto it = tables_.find(request);
  return it == tables_.end() ? 0 : it->second.tokens;
}

const std::vector<uint64_t>& PagedAllocator::block_table(
    RequestId request) const {
  return table(request).blocks;
}

uint64_t PagedAllocator::provisioned_tokens(RequestId request) const {
  return table(request).blocks.size() * config_.block_size_tokens;
}

}  // namespace kvvm
