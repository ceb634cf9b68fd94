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

#include "kvvm/ops.h"

#include <string>
#include <utility>

namespace kvvm {

Ops::Ops(Device& device, Pool& pool, OpsConfig config)
    : device_(device),
      pool_(pool),
      config_(config),
      pages_per_space_(ceil_div(config.max_seq_len, config.tokens_per_chunk)) {
  if (config_.tokens_per_chunk == 0 || config_.max_seq_len == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "tokens_per_chunk and max_seq_len must be positive");
  }
  if (pool_.tokens_per_chunk() != config_.tokens_per_chunk) {
    throw Error(ErrorCode::kInvalidArgument,
                "pool and ops disagree on tokens_per_chunk");
  }
}

std::vector<PhysicalHandle> Ops::p_alloc(uint64_t n) {
  std::vector<PhysicalHandle> out = pool_.pset_take_free(n);
  const size_t reused = out.size();
  try {
    while (out.size() < n) {
      PhysicalHandle h = device_.create_chunk();
      pool_.pset_insert(h);
      out.push_back(h);
    }
  } catch (const Error& e) {
    // Chunks created by this call are destroyed right away so the call has
    // no net effect; reused ones go back to the free list.
    for (size_t i = reused; i < out.size(); ++i) {
      pool_.pset_return_free(out[i]);
      pool_.pset_erase(out[i]);
      device_.destroy_chunk(out[i]);
    }
    for (size_t i = 0; i < reused; ++i) pool_.pset_return_free(out[i]);
    throw;
  }
  return out;
}

SpaceId Ops::v_alloc(uint64_t size_tokens) {
  if (size_tokens != config_.max_seq_len) {
    throw Error(ErrorCode::kInvalidArgument,
                "virtual spaces are sized to max_seq_len (" +
                    std::to_string(config_.max_seq_len) + "), got " +
                    std::to_string(size_tokens));
  }
  if (auto reused = pool_.vset_acquire(pages_per_space_)) return *reused;
  VirtualRange range = device_.reserve_address(
      pages_per_space_ * device_.config().page_size_bytes());
  return pool_.vset_insert(range).id;
}

void Ops::map(SpaceId id, std::span<const PhysicalHandle> chunks) {
  VirtualSpace& space = pool_.space(id);
  if (space.state != SpaceState::kInUse) {
    throw Error(ErrorCode::kInvalidState,
                "space " + std::to_string(id.value) + " is not in use");
  }
  if (chunks.size() > space.range.page_count - space.mapped_pages) {
    throw Error(ErrorCode::kCapacityExceeded,
                std::to_string(chunks.size()) + " chunks do not fit in " +
                    std::to_string(space.range.page_count -
                                   space.mapped_pages) +
                    " free pages");
  }
  for (PhysicalHandle h : chunks) {
    if (pool_.entry(h).referrers.contains(id)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "chunk " + std::to_string(h.id) +
                      " is already mapped into space " +
                      std::to_string(id.value));
    }
  }
  for (PhysicalHandle h : chunks) {
    const uint64_t page = space.mapped_pages;
    device_.map_page(space.range, page, h);
    space.page_table[page] = h;
    ++space.mapped_pages;
    pool_.pset_incref(h, id);
  }
}

void Ops::unmap_space(SpaceId id) {
  VirtualSpace& space = pool_.space(id);
  if (space.state == SpaceState::kAvailable) return;
  while (space.mapped_pages > 0) {
    const uint64_t page = space.mapped_pages - 1;
    PhysicalHandle h = device_.unmap_page(space.range, page);
    space.page_table[page].reset();
    --space.mapped_pages;
    pool_.pset_decref(h, id);
  }
  pool_.vset_make_available(id);
}

void Ops::v_free(SpaceId id) {
  const VirtualSpace& space = pool_.space(id);
  if (space.state != SpaceState::kAvailable) {
    throw Error(ErrorCode::kInvalidState,
                "space " + std::to_string(id.value) + " is in use");
  }
  device_.release_address(space.range);
  pool_.vset_erase(id);
}

void Ops::p_free(PhysicalHandle handle) {
  if (pool_.entry(handle).state != ChunkState::kFree) {
    throw Error(ErrorCode::kChunkStillMapped,
                "chunk " + std::to_string(handle.id) + " is active");
  }
  device_.destroy_chunk(handle);
  pool_.pset_erase(handle);
}

ReclaimReport Ops::empty_memory(bool evict_prefix) {
  ReclaimReport report;
  if (evict_prefix) {
    report.records_evicted = pool_.rtree().record_count();
    clear_prefix_cache();
  }
  const uint64_t chunk = device_.config().chunk_size_bytes;
  while (!pool_.free_handles().empty()) {
    p_free(*pool_.free_handles().begin());
    ++report.chunks_destroyed;
    report.bytes_reclaimed += chunk;
  }
  while (!pool_.available_spaces().empty()) {
    SpaceId id = *pool_.available_spaces().begin();
    report.virtual_bytes_released += pool_.space(id).range.length_bytes;
    v_free(id);
    ++report.spaces_released;
  }
  return report;
}

uint64_t Ops::trim(uint64_t free_bytes) {
  uint64_t destroyed = 0;
  while (device_.stats().free_bytes < free_bytes &&
         !pool_.free_handles().empty()) {
    p_free(*pool_.free_handles().begin());
    ++destroyed;
  }
  return destroyed;
}

void Ops::r_push(const VTensor& vt) {
  const uint64_t tpc = config_.tokens_per_chunk;
  const uint64_t chunks = vt.token_count / tpc;
  if (chunks == 0) return;
  if (vt.tokens.size() < chunks * tpc) {
    throw Error(ErrorCode::kInvalidArgument,
                "vTensor carries fewer tokens than its token_count");
  }
  const VirtualSpace& donor = pool_.space(vt.space);
  if (donor.mapped_pages < chunks) {
    throw Error(ErrorCode::kInvalidState,
                "donor space maps fewer pages than its tokens need");
  }
  std::vector<PhysicalHandle> shared;
  shared.reserve(chunks);
  for (uint64_t i = 0; i < chunks; ++i) shared.push_back(*donor.page_table[i]);

  SpaceId holder = v_alloc(config_.max_seq_len);
  VirtualSpace& record_space = pool_.space(holder);
  record_space.prefix_record = true;
  record_space.owner.reset();
  map(holder, shared);

  std::span<const TokenId> key(vt.tokens.data(), chunks * tpc);
  VTensor record;
  record.space = holder;
  record.capacity_tokens = pages_per_space_ * tpc;
  record.owner = vt.owner;
  if (log_ != nullptr) {
    log_->append({.kind = OpKind::kTreeInsert,
                  .tokens = {key.begin(), key.end()}});
  }
  if (auto replaced = pool_.rtree_insert(key, std::move(record))) {
    unmap_space(replaced->space);
  }
  while (config_.prefix_cache_max_chunks != 0 &&
         pool_.rtree().recorded_chunks() > config_.prefix_cache_max_chunks) {
    evict_prefix_lru();
  }
}

std::optional<PrefixMatch> Ops::r_prefix_match(
    std::span<const TokenId> tokens) {
  auto match = pool_.rtree_match(tokens);
  if (log_ != nullptr) {
    log_->append({.kind = OpKind::kTreeMatch,
                  .matched = match ? match->matched_tokens : 0,
                  .tokens = {tokens.begin(), tokens.end()}});
  }
  return match;
}

void Ops::drop_record(const VTensor& record) {
  if (log_ != nullptr) {
    log_->append({.kind = OpKind::kTreeErase, .tokens = record.tokens});
  }
  unmap_space(record.space);
}

bool Ops::evict_prefix_lru() {
  auto evicted = pool_.rtree().evict_lru();
  if (!evicted) return false;
  drop_record(*evicted);
  return true;
}

void Ops::clear_prefix_cache() {
  for (const VTensor& record : pool_.rtree().clear()) drop_record(record);
}

}  // namespace kvvm
