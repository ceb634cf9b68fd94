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
#include <set>
#include <vector>

#include "kvvm/common.h"
#include "kvvm/device.h"

namespace kvvm {

struct NativeConfig {
  DeviceConfig device;
  uint64_t bytes_per_token = 65536;
  uint64_t max_seq_len = 4096;
};

// One contiguous max-length region per request, plus its activation.
class NativeAllocator {
 public:
  explicit NativeAllocator(NativeConfig config);

  // Throws kDeviceOutOfMemory when region and activation do not fit.
  void admit(RequestId request);
  void commit(RequestId request, uint64_t tokens);
  // No-op for unknown requests.
  void release(RequestId request);

  bool holds(RequestId request) const { return tokens_.contains(request); }
  uint64_t token_count(RequestId request) const;
  uint64_t live_requests() const { return tokens_.size(); }
  uint64_t live_tokens() const { return live_tokens_; }
  uint64_t region_bytes() const;
  uint64_t allocated_bytes() const { return region_bytes() * live_requests(); }
  uint64_t activation_bytes() const;
  uint64_t free_bytes() const;
  const NativeConfig& config() const { return config_; }

 private:
  NativeConfig config_;
  std::map<RequestId, uint64_t> tokens_;
  uint64_t live_tokens_ = 0;
};

struct PagedConfig {
  DeviceConfig device;
  uint64_t bytes_per_token = 65536;
  uint64_t block_size_tokens = 16;
  // Kept outside the pool for activations.
  uint64_t activation_headroom_bytes = 0;
  uint64_t max_seq_len = 4096;
};

// Block pool claimed once at construction and never returned.
class PagedAllocator {
 public:
  explicit PagedAllocator(PagedConfig config);

  // Activation comes out of the headroom.
  void admit(RequestId request);
  // Grows the block table to cover `tokens`. All-or-nothing.
  void ensure(RequestId request, uint64_t tokens);
  void commit(RequestId request, uint64_t tokens);
  void release(RequestId request);

  bool holds(RequestId request) const { return tables_.contains(request); }
  uint64_t token_count(RequestId request) const;
  const std::vector<uint64_t>& block_table(RequestId request) const;
  uint64_t provisioned_tokens(RequestId request) const;

  uint64_t block_bytes() const;
  uint64_t block_count() const { return block_count_; }
  uint64_t pool_bytes() const { return block_count_ * block_bytes(); }
  uint64_t free_block_count() const { return free_blocks_.size(); }
  uint64_t used_block_count() const { return block_count_ - free_blocks_.size(); }
  uint64_t live_requests() const { return tables_.size(); }
  uint64_t live_tokens() const { return live_tokens_; }
  uint64_t activation_bytes() const;
  uint64_t free_bytes() const;
  const PagedConfig& config() const { return config_; }

 private:
  struct Table {
    std::vector<uint64_t> blocks;
    uint64_t tokens = 0;
  };
  Table& table(RequestId request);
  const Table& table(RequestId request) const;

  PagedConfig config_;
  uint64_t block_count_ = 0;
  // Lowest block id is handed out first.
  std::set<uint64_t> free_blocks_;
  std::map<RequestId, Table> tables_;
  uint64_t live_tokens_ = 0;
};

}  // namespace kvvm
