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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "kvvm/common.h"

namespace kvvm {

// Request-facing view of a virtual space.
struct VTensor {
  SpaceId space;
  uint64_t token_count = 0;
  uint64_t capacity_tokens = 0;
  // Tokens whose KV is resident; tokens.size() == token_count.
  std::vector<TokenId> tokens;
  RequestId owner;
};

struct PrefixMatch {
  VTensor vt;
  uint64_t matched_tokens = 0;
};

// Radix tree of recorded prefixes. Edges are whole chunks: every node key
// is a sequence of `tokens_per_chunk`-sized segments, children are keyed by
// their first segment, and matching only ever reports chunk-aligned lengths.
//
// A match returns a record whose tokens share the longest chunk-aligned
// prefix with the query; the record is not consumed.
class RadixTree {
 public:
  explicit RadixTree(uint64_t tokens_per_chunk);
  ~RadixTree();

  RadixTree(const RadixTree&) = delete;
  RadixTree& operator=(const RadixTree&) = delete;

  // `key` must be a positive multiple of tokens_per_chunk long. The stored
  // record carries `key` as its tokens. Returns the record it replaced.
  std::optional<VTensor> insert(std::span<const TokenId> key, VTensor vt);

  // Marks the returned record as most recently used.
  std::optional<PrefixMatch> match(std::span<const TokenId> query);
  std::optional<PrefixMatch> peek(std::span<const TokenId> query) const;

  std::optional<VTensor> erase(std::span<const TokenId> key);
  std::optional<VTensor> evict_lru();
  std::vector<VTensor> clear();

  size_t record_count() const { return record_count_; }
  uint64_t recorded_chunks() const { return recorded_chunks_; }
  uint64_t tokens_per_chunk() const { return tokens_per_chunk_; }
  size_t node_count() const;

  void for_each(const std::function<void(const VTensor&)>& fn) const;

  // Sibling segments distinct, keys chunk-aligned, parent links intact,
  // no empty leaves and no record-less single-child interior nodes.
  bool check_structure() const;

 private:
  struct Node;
  struct Walk;

  Walk walk(std::span<const TokenId> query) const;
  std::optional<PrefixMatch> resolve(const Walk& w) const;
  Node* find_exact(std::span<const TokenId> key) const;
  void prune(Node* node);
  Node* find_lru() const;

  uint64_t tokens_per_chunk_;
  std::unique_ptr<Node> root_;
  size_t record_count_ = 0;
  uint64_t recorded_chunks_ = 0;
  uint64_t tick_ = 0;
};

}  // namespace kvvm
