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

// Reference computations for tests. Nothing here calls into the code under
// test except read-only accessors used to collect state.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kvvm/device.h"
#include "kvvm/vts.h"

namespace kvvm::testing {

inline uint64_t kv_bytes_per_token(uint64_t layers, uint64_t kv_heads,
                                   uint64_t head_dim, uint64_t elem_bytes) {
  uint64_t per_layer_k = kv_heads * head_dim * elem_bytes;
  uint64_t per_layer_v = per_layer_k;
  return layers * (per_layer_k + per_layer_v);
}

inline uint64_t chunks_for(uint64_t tokens, uint64_t tpc) {
  uint64_t n = 0;
  while (n * tpc < tokens) ++n;
  return n;
}

// Longest chunk-aligned prefix of `query` shared with any recorded key.
inline uint64_t brute_longest_prefix(
    const std::vector<std::vector<TokenId>>& recorded,
    std::span<const TokenId> query, uint64_t tpc) {
  uint64_t best = 0;
  for (const auto& key : recorded) {
    uint64_t chunks = 0;
    for (;;) {
      const uint64_t end = (chunks + 1) * tpc;
      if (end > key.size() || end > query.size()) break;
      bool same = true;
      for (uint64_t i = chunks * tpc; i < end; ++i) {
        if (key[i] != query[i]) {
          same = false;
          break;
        }
      }
      if (!same) break;
      ++chunks;
    }
    best = std::max(best, chunks * tpc);
  }
  return best;
}

// Counts device calls by kind across a region of a test.
class CallDelta {
 public:
  explicit CallDelta(const Device& device) : device_(device) {
    for (size_t i = 0; i < kDeviceCallKinds; ++i) {
      start_[i] = device.call_count(static_cast<DeviceCall>(i));
    }
  }
  uint64_t operator()(DeviceCall call) const {
    return device_.call_count(call) - start_[static_cast<size_t>(call)];
  }

 private:
  const Device& device_;
  std::array<uint64_t, kDeviceCallKinds> start_{};
};

// Walks every page table and compares against the pool's refcounts, the
// device's map counts and the referrer sets. Empty string when consistent.
inline std::string refcount_violation(const VTensorManager& m) {
  std::map<uint64_t, uint64_t> maps;
  std::map<uint64_t, std::vector<uint64_t>> spaces;
  for (const auto& [id, space] : m.pool().vset()) {
    for (const auto& slot : space.page_table) {
      if (!slot) continue;
      ++maps[slot->id];
      spaces[slot->id].push_back(id.value);
    }
  }
  for (const auto& [h, e] : m.pool().pset()) {
    const uint64_t counted = maps.contains(h.id) ? maps[h.id] : 0;
    if (e.ref_count != counted) {
      return "chunk " + std::to_string(h.id) + ": ref_count " +
             std::to_string(e.ref_count) + " != mappings " +
             std::to_string(counted);
    }
    if (m.device().map_count(h) != counted) {
      return "chunk " + std::to_string(h.id) + ": device map_count differs";
    }
    if (e.referrers.size() != counted) {
      return "chunk " + std::to_string(h.id) + ": referrer set size differs";
    }
    for (uint64_t s : spaces[h.id]) {
      if (!e.referrers.contains(SpaceId{s})) {
        return "chunk " + std::to_string(h.id) + ": missing referrer";
      }
    }
    if ((e.state == ChunkState::kFree) != (counted == 0)) {
      return "chunk " + std::to_string(h.id) + ": Free state disagrees";
    }
  }
  for (const auto& [h, n] : maps) {
    if (!m.pool().has_entry(PhysicalHandle{h})) {
      return "mapped chunk " + std::to_string(h) + " missing from pSet";
    }
  }
  return {};
}

inline std::vector<TokenId> random_tokens(std::mt19937_64& rng, uint64_t n,
                                          TokenId alphabet) {
  std::uniform_int_distribution<TokenId> d(0, alphabet - 1);
  std::vector<TokenId> t(n);
  for (auto& x : t) x = d(rng);
  return t;
}

// Small device where chunks hold `tpc` tokens.
inline ManagerConfig small_manager(uint64_t chunks_capacity, uint64_t tpc = 4,
                                   uint64_t max_seq = 64) {
  ManagerConfig c;
  c.tokens_per_chunk = tpc;
  c.device.chunk_size_bytes = 4 * kKiB;
  c.device.weights_bytes = 0;
  c.device.activation_bytes_per_request = 4 * kKiB;
  c.device.capacity_bytes = chunks_capacity * c.device.chunk_size_bytes;
  c.vts.max_seq_len = max_seq;
  c.vts.initial_alloc_tokens = 2 * tpc;
  return c;
}

}  // namespace kvvm::testing
