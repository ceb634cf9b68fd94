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
#include <span>

namespace kvvm {

class NativeAllocator;
class PagedAllocator;
class VTensorManager;

struct ModelGeometry {
  uint64_t layers = 32;
  uint64_t kv_heads = 4;
  uint64_t head_dim = 128;
  uint64_t elem_bytes = 2;
};

// K and V for every layer and KV head.
uint64_t bytes_per_token(const ModelGeometry& geometry);
// Throws kInvalidArgument unless a chunk holds a whole number of tokens.
uint64_t tokens_per_chunk(uint64_t chunk_size_bytes, uint64_t bytes_per_token);

// One device snapshot. weights + activation + kv_allocated + free ==
// capacity, and kv_allocated == kv_used + reserved + fragmentation.
struct MemoryBreakdown {
  uint64_t capacity = 0;
  uint64_t weights = 0;
  uint64_t activation = 0;
  uint64_t kv_used = 0;
  uint64_t kv_allocated = 0;
  uint64_t reserved = 0;
  // Parts of reserved.
  uint64_t retained = 0;
  uint64_t pinned = 0;
  uint64_t lookahead = 0;
  uint64_t fragmentation = 0;
  uint64_t free = 0;

  bool sums_to_capacity() const;
};

struct MemorySample {
  MemoryBreakdown breakdown;
  uint64_t created_bytes = 0;
  uint64_t mapped_bytes = 0;
  uint64_t reserved_virtual_bytes = 0;
};

struct StepSample {
  uint64_t step = 0;
  MemorySample memory;
  uint64_t active_requests = 0;
  uint64_t stalls = 0;
  uint64_t preemptions = 0;
  uint64_t start_time = 0;
  uint64_t compute_start = 0;
  uint64_t compute_time = 0;
};

struct FlexibilitySummary {
  double mean_free_fraction = 0.0;
  uint64_t peak_kv_allocated = 0;
  double stall_rate = 0.0;
  uint64_t preemption_count = 0;
};

FlexibilitySummary flexibility_summary(std::span<const StepSample> steps);

// Per-chunk accounting. A chunk mapped by a request contributes its filled
// tokens once, however many requests share it; unfilled tail slots are
// fragmentation, or lookahead when the chunk holds no token yet. Chunks
// mapped only by prefix records are pinned and Free chunks are retained.
MemorySample snapshot(const VTensorManager& manager, uint64_t bytes_per_token);
MemorySample snapshot(const NativeAllocator& native);
MemorySample snapshot(const PagedAllocator& paged);

struct Ratio {
  uint64_t num = 0;
  uint64_t den = 1;
  double value() const { return static_cast<double>(num) / den; }
};

// Share of the native KV footprint not holding live tokens, as an exact
// fraction: 1 - sum(tokens) / (live_requests * max_seq_len).
Ratio native_fragmentation(const NativeAllocator& native);

}  // namespace kvvm
