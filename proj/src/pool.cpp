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

#include "kvvm/pool.h"

#include <string>
#include <utility>

namespace kvvm {

Pool::Pool(uint64_t tokens_per_chunk) : rtree_(tokens_per_chunk) {}

VirtualSpace& Pool::vset_insert(const VirtualRange& range) {
  SpaceId id{range.base};
  VirtualSpace space;
  space.id = id;
  space.range = range;
  space.page_table.resize(range.page_count);
  auto [it, inserted] = vset_.emplace(id, std::move(space));
  if (!inserted) {
    throw Error(ErrorCode::kInvalidState,
                "space " + std::to_string(id.value) + " already tracked");
  }
  return it->second;
}

std::optional<SpaceId> Pool::vset_acquire(uint64_t min_pages) {
  for (auto it = available_.begin(); it != available_.end(); ++it) {
    VirtualSpace& space = vset_.at(*it);
    if (space.range.page_count < min_pages) continue;
    space.state = SpaceState::kInUse;
    SpaceId id = *it;
    available_.erase(it);
    return id;
  }
  return std::nullopt;
}

void Pool::vset_make_available(SpaceId id) {
  VirtualSpace& s = space(id);
  if (s.mapped_pages != 0) {
    throw Error(ErrorCode::kRangeStillMapped,
                "space " + std::to_string(id.value) + " still has mappings");
  }
  s.state = SpaceState::kAvailable;
  s.owner.reset();
  s.prefix_record = false;
  available_.insert(id);
}

void Pool::vset_erase(SpaceId id) {
  const VirtualSpace& s = space(id);
  if (s.state != SpaceState::kAvailable) {
    throw Error(ErrorCode::kInvalidState,
                "space " + std::to_string(id.value) + " is in use");
  }
  available_.erase(id);
  vset_.erase(id);
}

VirtualSpace& Pool::space(SpaceId id) {
  auto it = vset_.find(id);
  if (it == vset_.end()) {
    throw Error(ErrorCode::kUnknownRange,
                "space " + std::to_string(id.value) + " not in vSet");
  }
  return it->second;
}

const VirtualSpace& Pool::space(SpaceId id) const {
  return const_cast<Pool*>(this)->space(id);
}

void Pool::pset_insert(PhysicalHandle handle) {
  PhysicalEntry e;
  e.handle = handle;
  if (!pset_.emplace(handle, std::move(e)).second) {
    throw Error(ErrorCode::kInvalidState,
                "chunk " + std::to_string(handle.id) + " already tracked");
  }
}

std::vector<PhysicalHandle> Pool::pset_take_free(uint64_t n) {
  std::vector<PhysicalHandle> out;
  while (out.size() < n && !free_.empty()) {
    PhysicalHandle h = *free_.begin();
    free_.erase(free_.begin());
    pset_.at(h).state = ChunkState::kActive;
    out.push_back(h);
  }
  return out;
}

void Pool::pset_return_free(PhysicalHandle handle) {
  PhysicalEntry& e = mutable_entry(handle);
  if (e.ref_count != 0) {
    throw Error(ErrorCode::kInvalidState,
                "chunk " + std::to_string(handle.id) + " is referenced");
  }
  e.state = ChunkState::kFree;
  free_.insert(handle);
}

void Pool::pset_incref(PhysicalHandle handle, SpaceId space) {
  PhysicalEntry& e = mutable_entry(handle);
  if (!e.referrers.insert(space).second) {
    throw Error(ErrorCode::kInvalidArgument,
                "space " + std::to_string(space.value) +
                    " already references chunk " + std::to_string(handle.id));
  }
  if (e.state == ChunkState::kFree) free_.erase(handle);
  e.state = ChunkState::kActive;
  ++e.ref_count;
}

void Pool::pset_decref(PhysicalHandle handle, SpaceId space) {
  PhysicalEntry& e = mutable_entry(handle);
  if (e.referrers.erase(space) == 0) {
    throw Error(ErrorCode::kUnknownReferrer,
                "space " + std::to_string(space.value) +
                    " does not reference chunk " + std::to_string(handle.id));
  }
  if (--e.ref_count == 0) {
    e.state = ChunkState::kFree;
    free_.insert(handle);
  }
}

void Pool::pset_erase(PhysicalHandle handle) {
  const PhysicalEntry& e = entry(handle);
  if (e.state != ChunkState::kFree) {
    throw Error(ErrorCode::kChunkStillMapped,
                "chunk " + std::to_string(handle.id) + " is active");
  }
  free_.erase(handle);
  pset_.erase(handle);
}

const PhysicalEntry& Pool::entry(PhysicalHandle handle) const {
  return const_cast<Pool*>(this)->mutable_entry(handle);
}

PhysicalEntry& Pool::mutable_entry(PhysicalHandle handle) {
  auto it = pset_.find(handle);
  if (it == pset_.end()) {
    throw Error(ErrorCode::kStaleHandle,
                "chunk " + std::to_string(handle.id) + " not in pSet");
  }
  return it->second;
}

std::optional<VTensor> Pool::rtree_insert(std::span<const TokenId> tokens,
                                          VTensor vt) {
  return rtree_.insert(tokens, std::move(vt));
}

std::optional<PrefixMatch> Pool::rtree_match(std::span<const TokenId> tokens) {
  return rtree_.match(tokens);
}

}  // namespace kvvm
