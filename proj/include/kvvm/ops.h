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
#include <span>
#include <vector>

#include "kvvm/common.h"
#include "kvvm/device.h"
#include "kvvm/oplog.h"
#include "kvvm/pool.h"

namespace kvvm {

struct OpsConfig {
  uint64_t tokens_per_chunk = 32;
  uint64_t max_seq_len = 4096;
  // Upper bound on chunks pinned by prefix records; 0 means unbounded.
  uint64_t prefix_cache_max_chunks = 0;
};

struct ReclaimReport {
  uint64_t chunks_destroyed = 0;
  uint64_t bytes_reclaimed = 0;
  uint64_t spaces_released = 0;
  uint64_t virtual_bytes_released = 0;
  uint64_t records_evicted = 0;
};

// Allocation, deallocation and tree operations over a pool and a device.
//
// Virtual and physical allocation are decoupled: v_alloc only reserves
// address space and p_alloc is the only operation that can create chunks.
// Deallocation is lazy: unmap_space returns chunks and spaces to the pool
// without touching device memory, which is reclaimed only by p_free,
// v_free or empty_memory.
class Ops {
 public:
  Ops(Device& device, Pool& pool, OpsConfig config);

  // All-or-nothing: on DeviceOutOfMemory the pool and device are unchanged.
  std::vector<PhysicalHandle> p_alloc(uint64_t n);
  SpaceId v_alloc(uint64_t size_tokens);
  // Appends `chunks` after the last mapped page of `space`.
  void map(SpaceId space, std::span<const PhysicalHandle> chunks);
  void unmap_space(SpaceId space);
  void v_free(SpaceId space);
  void p_free(PhysicalHandle handle);
  ReclaimReport empty_memory(bool evict_prefix = false);
  // Destroys Free chunks until the device has `free_bytes` available or
  // the free list is exhausted. Returns the number of chunks destroyed.
  uint64_t trim(uint64_t free_bytes);

  // Records the chunk-aligned prefix of `vt` in a dedicated space that maps
  // the same chunks, pinning them independently of the donor's lifetime.
  void r_push(const VTensor& vt);
  std::optional<PrefixMatch> r_prefix_match(std::span<const TokenId> tokens);
  bool evict_prefix_lru();
  void clear_prefix_cache();

  uint64_t pages_per_space() const { return pages_per_space_; }
  const OpsConfig& config() const { return config_; }
  Device& device() { return device_; }
  const Device& device() const { return device_; }
  Pool& pool() { return pool_; }
  const Pool& pool() const { return pool_; }

  // Tree operations are appended to `log` when attached.
  void attach_log(OpLog* log) { log_ = log; }

 private:
  void drop_record(const VTensor& record);

  Device& device_;
  Pool& pool_;
  OpsConfig config_;
  uint64_t pages_per_space_;
  OpLog* log_ = nullptr;
};

}  // namespace kvvm
