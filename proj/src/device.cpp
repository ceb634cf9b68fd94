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

#include "kvvm/device.h"

#include <numeric>
#include <string>
#include <utility>

namespace kvvm {

void DeviceConfig::validate() const {
  if (chunk_size_bytes == 0) {
    throw Error(ErrorCode::kInvalidArgument, "chunk size must be positive");
  }
  if (capacity_bytes % chunk_size_bytes != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "chunk size must divide device capacity");
  }
  if (weights_bytes > capacity_bytes) {
    throw Error(ErrorCode::kInvalidArgument,
                "weights exceed device capacity");
  }
}

Device::Device(DeviceConfig config) : config_(config) { config_.validate(); }

void Device::attach_log(OpLog* log, uint64_t tokens_per_chunk) {
  log_ = log;
  if (log_ != nullptr) {
    OpRecord header;
    header.kind = OpKind::kConfig;
    header.capacity_bytes = config_.capacity_bytes;
    header.chunk_size_bytes = config_.chunk_size_bytes;
    header.weights_bytes = config_.weights_bytes;
    header.activation_bytes = config_.activation_bytes_per_request;
    header.tokens_per_chunk = tokens_per_chunk;
    log_->append(std::move(header));
  }
}

void Device::record(OpRecord record) {
  if (log_ != nullptr) log_->append(std::move(record));
}

VirtualRange Device::reserve_address(uint64_t size_bytes) {
  const uint64_t page = config_.page_size_bytes();
  if (size_bytes == 0 || size_bytes % page != 0) {
    throw Error(ErrorCode::kInvalidSize,
                "reservation of " + std::to_string(size_bytes) +
                    " bytes is not a positive multiple of the page size");
  }
  VirtualRange range{next_base_, size_bytes, size_bytes / page};
  next_base_ += size_bytes;
  RangeState state;
  state.range = range;
  state.slots.resize(range.page_count);
  ranges_.emplace(range.base, std::move(state));
  reserved_virtual_bytes_ += size_bytes;
  count(DeviceCall::kReserve);
  record({.kind = OpKind::kReserve, .base = range.base,
          .pages = range.page_count});
  return range;
}

PhysicalHandle Device::create_chunk() {
  if (stats().free_bytes < config_.chunk_size_bytes) {
    throw Error(ErrorCode::kDeviceOutOfMemory, "no room for another chunk");
  }
  PhysicalHandle handle{next_handle_++};
  chunk_map_counts_.emplace(handle.id, 0);
  count(DeviceCall::kCreate);
  record({.kind = OpKind::kCreate, .handle = handle.id});
  return handle;
}

Device::RangeState& Device::lookup(const VirtualRange& range) {
  auto it = ranges_.find(range.base);
  if (it == ranges_.end() || it->second.range != range) {
    throw Error(ErrorCode::kUnknownRange,
                "range at " + std::to_string(range.base) + " is not reserved");
  }
  return it->second;
}

const Device::RangeState* Device::find(const VirtualRange& range) const {
  auto it = ranges_.find(range.base);
  if (it == ranges_.end() || it->second.range != range) return nullptr;
  return &it->second;
}

void Device::map_page(const VirtualRange& range, uint64_t page_index,
                      PhysicalHandle handle) {
  RangeState& state = lookup(range);
  if (page_index >= range.page_count) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "page " + std::to_string(page_index) + " of " +
                    std::to_string(range.page_count));
  }
  auto chunk = chunk_map_counts_.find(handle.id);
  if (chunk == chunk_map_counts_.end()) {
    throw Error(ErrorCode::kStaleHandle,
                "chunk " + std::to_string(handle.id) + " is not live");
  }
  auto& slot = state.slots[page_index];
  if (slot.has_value()) {
    throw Error(ErrorCode::kPageAlreadyMapped,
                "page " + std::to_string(page_index) + " of range " +
                    std::to_string(range.base));
  }
  slot = handle;
  ++state.mapped;
  ++chunk->second;
  ++mapped_pages_;
  count(DeviceCall::kMap);
  record({.kind = OpKind::kMap, .base = range.base, .page = page_index,
          .handle = handle.id});
}

PhysicalHandle Device::unmap_page(const VirtualRange& range,
                                  uint64_t page_index) {
  RangeState& state = lookup(range);
  if (page_index >= range.page_count) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "page " + std::to_string(page_index) + " of " +
                    std::to_string(range.page_count));
  }
  auto& slot = state.slots[page_index];
  if (!slot.has_value()) {
    throw Error(ErrorCode::kPageNotMapped,
                "page " + std::to_string(page_index) + " of range " +
                    std::to_string(range.base));
  }
  PhysicalHandle handle = *slot;
  slot.reset();
  --state.mapped;
  --chunk_map_counts_.at(handle.id);
  --mapped_pages_;
  count(DeviceCall::kUnmap);
  record({.kind = OpKind::kUnmap, .base = range.base, .page = page_index,
          .handle = handle.id});
  return handle;
}

void Device::release_address(const VirtualRange& range) {
  RangeState& state = lookup(range);
  if (state.mapped != 0) {
    throw Error(ErrorCode::kRangeStillMapped,
                std::to_string(state.mapped) + " pages still mapped");
  }
  reserved_virtual_bytes_ -= range.length_bytes;
  ranges_.erase(range.base);
  count(DeviceCall::kRelease);
  record({.kind = OpKind::kRelease, .base = range.base,
          .pages = range.page_count});
}

void Device::destroy_chunk(PhysicalHandle handle) {
  auto it = chunk_map_counts_.find(handle.id);
  if (it == chunk_map_counts_.end()) {
    throw Error(ErrorCode::kStaleHandle,
                "chunk " + std::to_string(handle.id) + " is not live");
  }
  if (it->second != 0) {
    throw Error(ErrorCode::kChunkStillMapped,
                "chunk " + std::to_string(handle.id) + " mapped " +
                    std::to_string(it->second) + " times");
  }
  chunk_map_counts_.erase(it);
  count(DeviceCall::kDestroy);
  record({.kind = OpKind::kDestroy, .handle = handle.id});
}

void Device::acquire_activation() {
  if (stats().free_bytes < config_.activation_bytes_per_request) {
    throw Error(ErrorCode::kDeviceOutOfMemory, "no room for activations");
  }
  ++activations_;
  record({.kind = OpKind::kActivationAcquire});
}

void Device::release_activation() {
  if (activations_ == 0) {
    throw Error(ErrorCode::kInvalidState, "no activation to release");
  }
  --activations_;
  record({.kind = OpKind::kActivationRelease});
}

std::optional<PhysicalHandle> Device::resolve(const VirtualRange& range,
                                              uint64_t page_index) const {
  const RangeState* state = find(range);
  if (state == nullptr || page_index >= range.page_count) return std::nullopt;
  return state->slots[page_index];
}

uint64_t Device::map_count(PhysicalHandle handle) const {
  auto it = chunk_map_counts_.find(handle.id);
  if (it == chunk_map_counts_.end()) {
    throw Error(ErrorCode::kStaleHandle,
                "chunk " + std::to_string(handle.id) + " is not live");
  }
  return it->second;
}

bool Device::is_live(PhysicalHandle handle) const {
  return chunk_map_counts_.contains(handle.id);
}

bool Device::is_reserved(const VirtualRange& range) const {
  return find(range) != nullptr;
}

DeviceStats Device::stats() const {
  DeviceStats s;
  s.created_bytes = chunk_map_counts_.size() * config_.chunk_size_bytes;
  s.reserved_virtual_bytes = reserved_virtual_bytes_;
  s.mapped_page_count = mapped_pages_;
  s.activation_bytes = activations_ * config_.activation_bytes_per_request;
  s.free_bytes = config_.capacity_bytes - config_.weights_bytes -
                 s.activation_bytes - s.created_bytes;
  s.live_handles = chunk_map_counts_.size();
  s.live_ranges = ranges_.size();
  return s;
}

uint64_t Device::total_calls() const {
  return std::accumulate(call_counts_.begin(), call_counts_.end(),
                         uint64_t{0});
}

std::vector<VirtualRange> Device::live_ranges() const {
  std::vector<VirtualRange> out;
  out.reserve(ranges_.size());
  for (const auto& [base, state] : ranges_) out.push_back(state.range);
  return out;
}

std::vector<PhysicalHandle> Device::live_handles() const {
  std::vector<PhysicalHandle> out;
  out.reserve(chunk_map_counts_.size());
  for (const auto& [id, unused] : chunk_map_counts_) out.push_back({id});
  return out;
}

}  // namespace kvvm
