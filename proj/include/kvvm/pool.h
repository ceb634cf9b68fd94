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
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "kvvm/common.h"
#include "kvvm/device.h"
#include "kvvm/radix_tree.h"

namespace kvvm {

enum class SpaceState { kAvailable, kInUse };

struct VirtualSpace {
  SpaceId id;
  VirtualRange range;
  // Mapped slots always form a prefix: KV writes are append-only.
  std::vector<std::optional<PhysicalHandle>> page_table;
  uint64_t mapped_pages = 0;
  SpaceState state = SpaceState::kInUse;
  std::optional<RequestId> owner;
  // Held by a prefix record rather than a request.
  bool prefix_record = false;
};

enum class ChunkState { kFree, kActive };

// Hard-link style bookkeeping for one physical chunk. An entry handed out by
// pset_take_free (or freshly inserted) is Active with no referrers until it
// is mapped; at every quiescent point Free <=> ref_count == 0.
struct PhysicalEntry {
  PhysicalHandle handle;
  uint64_t ref_count = 0;
  ChunkState state = ChunkState::kActive;
  std::set<SpaceId> referrers;
};

// vSet, pSet and rTree. Pure bookkeeping: never talks to the device.
class Pool {
 public:
  explicit Pool(uint64_t tokens_per_chunk);

  // vSet.
  VirtualSpace& vset_insert(const VirtualRange& range);
  std::optional<SpaceId> vset_acquire(uint64_t min_pages);
  void vset_make_available(SpaceId id);
  void vset_erase(SpaceId id);
  bool has_space(SpaceId id) const { return vset_.contains(id); }
  VirtualSpace& space(SpaceId id);
  const VirtualSpace& space(SpaceId id) const;
  const std::map<SpaceId, VirtualSpace>& vset() const { return vset_; }
  const std::set<SpaceId>& available_spaces() const { return available_; }

  // pSet.
  void pset_insert(PhysicalHandle handle);
  std::vector<PhysicalHandle> pset_take_free(uint64_t n);
  void pset_return_free(PhysicalHandle handle);
  void pset_incref(PhysicalHandle handle, SpaceId space);
  void pset_decref(PhysicalHandle handle, SpaceId space);
  void pset_erase(PhysicalHandle handle);
  bool has_entry(PhysicalHandle handle) const { return pset_.contains(handle); }
  const PhysicalEntry& entry(PhysicalHandle handle) const;
  const std::map<PhysicalHandle, PhysicalEntry>& pset() const { return pset_; }
  const std::set<PhysicalHandle>& free_handles() const { return free_; }

  // rTree.
  std::optional<VTensor> rtree_insert(std::span<const TokenId> tokens,
                                      VTensor vt);
  std::optional<PrefixMatch> rtree_match(std::span<const TokenId> tokens);
  RadixTree& rtree() { return rtree_; }
  const RadixTree& rtree() const { return rtree_; }

  uint64_t tokens_per_chunk() const { return rtree_.tokens_per_chunk(); }

 private:
  PhysicalEntry& mutable_entry(PhysicalHandle handle);

  std::map<SpaceId, VirtualSpace> vset_;
  std::set<SpaceId> available_;
  std::map<PhysicalHandle, PhysicalEntry> pset_;
  std::set<PhysicalHandle> free_;
  RadixTree rtree_;
};

}  // namespace kvvm
