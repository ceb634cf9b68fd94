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
#include <optional>
#include <string_view>

#include "kvvm/device.h"
#include "kvvm/metrics.h"

namespace kvvm {

enum class AllocatorKind { kNative, kPaged, kVTensor };

std::string_view allocator_name(AllocatorKind kind);
std::optional<AllocatorKind> parse_allocator(std::string_view name);

// Abstract cost units for the two simulated lanes.
struct CostModel {
  uint64_t prefill_cost_per_token = 1;
  uint64_t decode_cost_per_request = 50;
  // Per primitive device call on the memory lane.
  uint64_t mem_op_cost = 1;
};

struct SimConfig {
  AllocatorKind allocator = AllocatorKind::kVTensor;
  DeviceConfig device;
  ModelGeometry geometry;
  uint64_t max_seq_len = 4096;
  uint64_t initial_alloc_tokens = 256;
  uint64_t lookahead_chunks = 1;
  uint64_t block_size_tokens = 16;
  uint64_t max_batch = 8;
  // 0 leaves prefix records unbounded.
  uint64_t prefix_cache_max_chunks = 0;
  // Also drop prefix records when memory is emptied at the end of a run.
  bool evict_prefix = false;
  CostModel cost;
  uint64_t seed = 0;

  // Throws kInvalidArgument / kInvalidSize on inconsistent settings.
  void validate() const;
  uint64_t bytes_per_token() const { return kvvm::bytes_per_token(geometry); }
  uint64_t tokens_per_chunk() const;
};

}  // namespace kvvm
