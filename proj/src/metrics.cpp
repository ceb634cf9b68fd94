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

#include "kvvm/metrics.h"

#include <algorithm>
#include <string>
#include <unordered_map>

#include "kvvm/baselines.h"
#include "kvvm/common.h"
#include "kvvm/vts.h"

namespace kvvm {

uint64_t bytes_per_token(const ModelGeometry& g) {
  if (g.layers == 0 || g.kv_heads == 0 || g.head_dim == 0 ||
      g.elem_bytes == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "model geometry fields must be positive");
  }
  return 2 * g.layers * g.kv_heads * g.head_dim * g.elem_bytes;
}

uint64_t tokens_per_chunk(uint64_t chunk_size_bytes, uint64_t bytes_per_token) {
  if (bytes_per_token == 0 || chunk_size_bytes < bytes_per_token ||
      chunk_size_bytes % bytes_per_token != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "chunk of " + std::to_string(chunk_size_bytes) +
                    " bytes does not hold a whole number of " +
                    std::to_string(bytes_per_token) + "-byte tokens");
  }
  return chunk_size_bytes / bytes_per_token;
}

bool MemoryBreakdown::sums_to_capacity() const {
  return weights + activation + kv_allocated + free == capacity &&
         kv_used + reserved + fragmentation == kv_allocated &&
         retained + pinned + lookahead <= reserved;
}

FlexibilitySummary flexibility_summary(std::span<const StepSample> steps) {
  FlexibilitySummary s;
  if (steps.empty()) return s;
  double free_sum = 0.0;
  uint64_t stalled = 0;
  for (const StepSample& step : steps) {
    const MemoryBreakdown& b = step.memory.breakdown;
    free_sum += static_cast<double>(b.free) / static_cast<double>(b.capacity);
    s.peak_kv_allocated = std::max(s.peak_kv_allocated, b.kv_allocated);
    if (step.stalls > 0) ++stalled;
    s.preemption_count += step.preemptions;
  }
  s.mean_free_fraction = free_sum / static_cast<double>(steps.size());
  s.stall_rate = static_cast<double>(stalled) / static_cast<double>(steps.size());
  return s;
}

MemorySample snapshot(const VTensorManager& manager, uint64_t bpt) {
  const Device& device = manager.device();
  const Pool& pool = manager.pool();
  const uint64_t chunk = device.config().chunk_size_bytes;
  const uint64_t tpc = pool.tokens_per_chunk();
  const DeviceStats stats = device.stats();

  // Most-filled view of each chunk mapped by a live request.
  std::unordered_map<uint64_t, uint64_t> filled;
  for (const auto& [id, mem] : manager.vts().requests()) {
    const VirtualSpace& space = pool.space(mem.vt.space);
    for (uint64_t i = 0; i < space.mapped_pages; ++i) {
      const uint64_t start = i * tpc;
      const uint64_t f =
          mem.vt.token_count > start ? std::min(tpc, mem.vt.token_count - start)
                                     : 0;
      uint64_t& slot = filled[space.page_table[i]->id];
      slot = std::max(slot, f);
    }
  }

  MemorySample out;
  MemoryBreakdown& b = out.breakdown;
  b.capacity = device.config().capacity_bytes;
  b.weights = device.config().weights_bytes;
  b.activation = stats.activation_bytes;
  b.kv_allocated = stats.created_bytes;
  b.free = stats.free_bytes;
  uint64_t mapped_chunks = 0;
  for (const auto& [handle, entry] : pool.pset()) {
    if (entry.state == ChunkState::kFree) {
      b.retained += chunk;
      continue;
    }
    if (entry.ref_count > 0) ++mapped_chunks;
    auto it = filled.find(handle.id);
    if (it == filled.end()) {
      b.pinned += chunk;
    } else if (it->second == 0) {
      b.lookahead += chunk;
    } else {
      b.kv_used += it->second * bpt;
      b.fragmentation += chunk - it->second * bpt;
    }
  }
  b.reserved = b.retained + b.pinned + b.lookahead;
  out.created_bytes = stats.created_bytes;
  out.mapped_bytes = mapped_chunks * chunk;
  out.reserved_virtual_bytes = stats.reserved_virtual_bytes;
  return out;
}

MemorySample snapshot(const NativeAllocator& native) {
  const NativeConfig& c = native.config();
  MemorySample out;
  MemoryBreakdown& b = out.breakdown;
  b.capacity = c.device.capacity_bytes;
  b.weights = c.device.weights_bytes;
  b.activation = native.activation_bytes();
  b.kv_allocated = native.allocated_bytes();
  b.kv_used = native.live_tokens() * c.bytes_per_token;
  b.fragmentation = b.kv_allocated - b.kv_used;
  b.free = native.free_bytes();
  out.created_bytes = b.kv_allocated;
  out.mapped_bytes = b.kv_allocated;
  out.reserved_virtual_bytes = b.kv_allocated;
  return out;
}

MemorySample snapshot(const PagedAllocator& paged) {
  const PagedConfig& c = paged.config();
  MemorySample out;
  MemoryBreakdown& b = out.breakdown;
  b.capacity = c.device.capacity_bytes;
  b.weights = c.device.weights_bytes;
  b.activation = paged.activation_bytes();
  b.kv_allocated = paged.pool_bytes();
  b.kv_used = paged.live_tokens() * c.bytes_per_token;
  const uint64_t in_tables = paged.used_block_count() * paged.block_bytes();
  b.fragmentation = in_tables - b.kv_used;
  b.reserved = b.kv_allocated - in_tables;
  b.free = paged.free_bytes();
  out.created_bytes = b.kv_allocated;
  out.mapped_bytes = b.kv_allocated;
  out.reserved_virtual_bytes = b.kv_allocated;
  return out;
}

Ratio native_fragmentation(const NativeAllocator& native) {
  const uint64_t slots = native.live_requests() * native.config().max_seq_len;
  if (slots == 0) return Ratio{0, 1};
  return Ratio{slots - native.live_tokens(), slots};
}

}  // namespace kvvm
