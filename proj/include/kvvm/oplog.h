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
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "kvvm/common.h"

namespace kvvm {

// Ordered record of primitive device calls and prefix-tree operations.
// Only calls that succeeded are recorded; the checker replays them against
// an independent model to decide whether each one was legal.
enum class OpKind {
  kConfig,
  kReserve,
  kCreate,
  kMap,
  kUnmap,
  kRelease,
  kDestroy,
  kActivationAcquire,
  kActivationRelease,
  kTreeInsert,
  kTreeErase,
  kTreeMatch,
};

std::string_view op_kind_name(OpKind kind);

struct OpRecord {
  OpKind kind = OpKind::kConfig;
  uint64_t base = 0;
  uint64_t pages = 0;
  uint64_t page = 0;
  uint64_t handle = 0;
  uint64_t matched = 0;
  std::vector<TokenId> tokens;

  // kConfig only.
  uint64_t capacity_bytes = 0;
  uint64_t chunk_size_bytes = 0;
  uint64_t weights_bytes = 0;
  uint64_t activation_bytes = 0;
  uint64_t tokens_per_chunk = 0;
};

class OpLog {
 public:
  void append(OpRecord record) { records_.push_back(std::move(record)); }
  const std::vector<OpRecord>& records() const { return records_; }
  size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  void write_jsonl(std::ostream& out) const;
  // Throws Error(kBadTrace) naming the offending line.
  static OpLog read_jsonl(std::istream& in);

 private:
  std::vector<OpRecord> records_;
};

}  // namespace kvvm
