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

#include "kvvm/radix_tree.h"

#include <algorithm>
#include <string>

namespace kvvm {

struct RadixTree::Node {
  std::vector<TokenId> key;
  struct Record {
    VTensor vt;
    uint64_t last_used = 0;
  };
  std::optional<Record> record;
  std::map<std::vector<TokenId>, std::unique_ptr<Node>> children;
  Node* parent = nullptr;
};

struct RadixTree::Walk {
  // Deepest node whose subtree shares the whole matched prefix.
  const Node* end = nullptr;
  uint64_t matched = 0;
};

namespace {

std::vector<TokenId> segment(std::span<const TokenId> tokens, size_t pos,
                             uint64_t n) {
  return {tokens.begin() + pos, tokens.begin() + pos + n};
}

// Number of leading whole chunks on which `a` and `b` agree.
uint64_t common_chunks(std::span<const TokenId> a, std::span<const TokenId> b,
                       uint64_t tpc) {
  const uint64_t n = std::min(a.size(), b.size()) / tpc;
  uint64_t c = 0;
  while (c < n && std::equal(a.begin() + c * tpc, a.begin() + (c + 1) * tpc,
                             b.begin() + c * tpc)) {
    ++c;
  }
  return c;
}

}  // namespace

RadixTree::RadixTree(uint64_t tokens_per_chunk)
    : tokens_per_chunk_(tokens_per_chunk), root_(std::make_unique<Node>()) {
  if (tokens_per_chunk_ == 0) {
    throw Error(ErrorCode::kInvalidArgument, "tokens_per_chunk must be > 0");
  }
}

RadixTree::~RadixTree() = default;

std::optional<VTensor> RadixTree::insert(std::span<const TokenId> key,
                                         VTensor vt) {
  const uint64_t tpc = tokens_per_chunk_;
  if (key.empty() || key.size() % tpc != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "prefix key of " + std::to_string(key.size()) +
                    " tokens is not chunk-aligned");
  }
  vt.tokens.assign(key.begin(), key.end());
  vt.token_count = key.size();

  Node* node = root_.get();
  size_t pos = 0;
  while (pos < key.size()) {
    auto first = segment(key, pos, tpc);
    auto it = node->children.find(first);
    if (it == node->children.end()) {
      auto leaf = std::make_unique<Node>();
      leaf->key = segment(key, pos, key.size() - pos);
      leaf->parent = node;
      Node* raw = leaf.get();
      node->children.emplace(std::move(first), std::move(leaf));
      node = raw;
      pos = key.size();
      break;
    }
    Node* child = it->second.get();
    const uint64_t c = common_chunks(child->key, key.subspan(pos), tpc);
    if (c * tpc < child->key.size()) {
      auto mid = std::make_unique<Node>();
      mid->key.assign(child->key.begin(), child->key.begin() + c * tpc);
      mid->parent = node;
      std::unique_ptr<Node> old = std::move(it->second);
      old->key.erase(old->key.begin(), old->key.begin() + c * tpc);
      old->parent = mid.get();
      auto old_first = segment(old->key, 0, tpc);
      mid->children.emplace(std::move(old_first), std::move(old));
      it->second = std::move(mid);
      child = it->second.get();
    }
    pos += c * tpc;
    node = child;
  }

  std::optional<VTensor> replaced;
  if (node->record.has_value()) {
    replaced = std::move(node->record->vt);
  } else {
    ++record_count_;
    recorded_chunks_ += key.size() / tpc;
  }
  node->record = Node::Record{std::move(vt), ++tick_};
  return replaced;
}

RadixTree::Walk RadixTree::walk(std::span<const TokenId> query) const {
  const uint64_t tpc = tokens_per_chunk_;
  const size_t limit = query.size() / tpc * tpc;
  Walk w;
  const Node* node = root_.get();
  w.end = node;
  size_t pos = 0;
  while (pos < limit) {
    auto it = node->children.find(segment(query, pos, tpc));
    if (it == node->children.end()) break;
    const Node* child = it->second.get();
    const uint64_t c = common_chunks(child->key, query.subspan(pos), tpc);
    pos += c * tpc;
    w.end = child;
    if (c * tpc < child->key.size()) break;
    node = child;
  }
  w.matched = pos;
  return w;
}

std::optional<PrefixMatch> RadixTree::resolve(const Walk& w) const {
  if (w.matched == 0) return std::nullopt;
  // Every record below `end` shares the matched prefix; prefer the node's
  // own record, else the first one in segment order.
  const Node* node = w.end;
  while (!node->record.has_value()) {
    if (node->children.empty()) return std::nullopt;
    node = node->children.begin()->second.get();
  }
  return PrefixMatch{node->record->vt, w.matched};
}

std::optional<PrefixMatch> RadixTree::match(std::span<const TokenId> query) {
  Walk w = walk(query);
  auto result = resolve(w);
  if (result.has_value()) {
    const Node* node = w.end;
    while (!node->record.has_value()) {
      node = node->children.begin()->second.get();
    }
    const_cast<Node*>(node)->record->last_used = ++tick_;
  }
  return result;
}

std::optional<PrefixMatch> RadixTree::peek(
    std::span<const TokenId> query) const {
  return resolve(walk(query));
}

RadixTree::Node* RadixTree::find_exact(std::span<const TokenId> key) const {
  if (key.empty() || key.size() % tokens_per_chunk_ != 0) return nullptr;
  Walk w = walk(key);
  if (w.matched != key.size()) return nullptr;
  // The walk stops at a node whose full path equals `key` only if the
  // node's key was consumed completely.
  const Node* node = w.end;
  size_t depth = 0;
  for (const Node* n = node; n != nullptr; n = n->parent) depth += n->key.size();
  if (depth != key.size()) return nullptr;
  return const_cast<Node*>(node);
}

std::optional<VTensor> RadixTree::erase(std::span<const TokenId> key) {
  Node* node = find_exact(key);
  if (node == nullptr || !node->record.has_value()) return std::nullopt;
  VTensor vt = std::move(node->record->vt);
  node->record.reset();
  --record_count_;
  recorded_chunks_ -= key.size() / tokens_per_chunk_;
  prune(node);
  return vt;
}

void RadixTree::prune(Node* node) {
  while (node != root_.get() && !node->record.has_value() &&
         node->children.empty()) {
    Node* parent = node->parent;
    parent->children.erase(segment(node->key, 0, tokens_per_chunk_));
    node = parent;
  }
  if (node != root_.get() && !node->record.has_value() &&
      node->children.size() == 1) {
    std::unique_ptr<Node> child = std::move(node->children.begin()->second);
    node->children.clear();
    node->key.insert(node->key.end(), child->key.begin(), child->key.end());
    node->record = std::move(child->record);
    node->children = std::move(child->children);
    for (auto& [first, grandchild] : node->children) {
      grandchild->parent = node;
    }
  }
}

RadixTree::Node* RadixTree::find_lru() const {
  Node* best = nullptr;
  std::vector<Node*> stack{root_.get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (n->record.has_value() &&
        (best == nullptr || n->record->last_used < best->record->last_used)) {
      best = n;
    }
    for (auto& [first, child] : n->children) stack.push_back(child.get());
  }
  return best;
}

std::optional<VTensor> RadixTree::evict_lru() {
  Node* node = find_lru();
  if (node == nullptr) return std::nullopt;
  VTensor vt = std::move(node->record->vt);
  node->record.reset();
  --record_count_;
  recorded_chunks_ -= vt.tokens.size() / tokens_per_chunk_;
  prune(node);
  return vt;
}

std::vector<VTensor> RadixTree::clear() {
  std::vector<VTensor> out;
  for_each([&](const VTensor& vt) { out.push_back(vt); });
  root_ = std::make_unique<Node>();
  record_count_ = 0;
  recorded_chunks_ = 0;
  return out;
}

size_t RadixTree::node_count() const {
  size_t count = 0;
  std::vector<const Node*> stack{root_.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    ++count;
    for (const auto& [first, child] : n->children) stack.push_back(child.get());
  }
  return count - 1;
}

void RadixTree::for_each(
    const std::function<void(const VTensor&)>& fn) const {
  std::vector<const Node*> stack{root_.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (n->record.has_value()) fn(n->record->vt);
    for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) {
      stack.push_back(it->second.get());
    }
  }
}

bool RadixTree::check_structure() const {
  const uint64_t tpc = tokens_per_chunk_;
  std::vector<const Node*> stack{root_.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (n != root_.get()) {
      if (n->key.empty() || n->key.size() % tpc != 0) return false;
      if (!n->record.has_value() && n->children.size() < 2) return false;
    }
    for (const auto& [first, child] : n->children) {
      if (child->parent != n) return false;
      if (first.size() != tpc ||
          !std::equal(first.begin(), first.end(), child->key.begin())) {
        return false;
      }
      stack.push_back(child.get());
    }
  }
  return true;
}

}  // namespace kvvm
