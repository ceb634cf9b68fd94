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
#include <span>

#include "kvvm/common.h"
#include "kvvm/device.h"
#include "kvvm/ops.h"
#include "kvvm/pool.h"

namespace kvvm {

struct VtsConfig {
  uint64_t max_seq_len = 4096;
  uint64_t initial_alloc_tokens = 256;
  uint64_t lookahead_chunks = 1;
};

struct RequestMem {
  RequestId request;
  VTensor vt;
  uint64_t provisioned_tokens = 0;
  uint64_t shared_prefix_tokens = 0;
  // Lifetime totals for this request's memory.
  uint64_t chunks_acquired = 0;
  uint64_t chunks_created = 0;
};

// Cost of one scheduler action in device primitives.
struct ActionStats {
  uint64_t device_calls = 0;
  uint64_t chunks_acquired = 0;
  uint64_t chunks_created = 0;

  ActionStats& operator+=(const ActionStats& o) {
    device_calls += o.device_calls;
    chunks_acquired += o.chunks_acquired;
    chunks_created += o.chunks_created;
    return *this;
  }
};

struct PrefixMatchResult {
  uint64_t matched_tokens = 0;
  // Space of the record the prefix was borrowed from.
  SpaceId donor;
  ActionStats stats;
};

// Request-level memory actions: create, extend, prefix record, prefix match
// and release. Every action completes synchronously here; the serving
// engine models when its device calls finish.
class VTensorScheduler {
 public:
  VTensorScheduler(Ops& ops, VtsConfig config);

  // Maps max(prompt_len, initial_alloc_tokens) worth of chunks.
  ActionStats create(RequestId request, uint64_t prompt_len);
  // Grows the mapping so that at least `target_tokens` fit.
  ActionStats extend(RequestId request, uint64_t target_tokens);
  // Records that KV for `tokens` was written after the resident ones.
  void commit(RequestId request, std::span<const TokenId> tokens);
  ActionStats prefix_record(RequestId request);
  // On a hit the new space maps the recorded chunks themselves, then the
  // remaining prompt is provisioned as in create. On a miss nothing changes
  // and matched_tokens is 0.
  PrefixMatchResult prefix_match(RequestId request,
                                 std::span<const TokenId> prompt);
  ActionStats release(RequestId request);

  const RequestMem* find(RequestId request) const;
  const std::map<RequestId, RequestMem>& requests() const { return mems_; }
  const VtsConfig& config() const { return config_; }
  uint64_t tokens_per_chunk() const { return tpc_; }
  Ops& ops() { return ops_; }
  const Ops& ops() const { return ops_; }

 private:
  RequestMem& mem(RequestId request);
  // Acquires and maps chunks until `pages` are mapped.
  void grow_to(RequestMem& m, uint64_t pages, ActionStats& stats);

  Ops& ops_;
  VtsConfig config_;
  uint64_t tpc_;
  std::map<RequestId, RequestMem> mems_;
};

struct ManagerConfig {
  DeviceConfig device;
  uint64_t tokens_per_chunk = 32;
  VtsConfig vts;
  uint64_t prefix_cache_max_chunks = 0;
};

// Owns the device, pool, operations and scheduler as one unit.
class VTensorManager {
 public:
  explicit VTensorManager(const ManagerConfig& config);

  VTensorManager(const VTensorManager&) = delete;
  VTensorManager& operator=(const VTensorManager&) = delete;

  Device& device() { return device_; }
  const Device& device() const { return device_; }
  Pool& pool() { return pool_; }
  const Pool& pool() const { return pool_; }
  Ops& ops() { return ops_; }
  const Ops& ops() const { return ops_; }
  VTensorScheduler& vts() { return vts_; }
  const VTensorScheduler& vts() const { return vts_; }

  // Attaches one log to both the device and the tree operations.
  void attach_log(OpLog* log);

 private:
  Device device_;
  Pool pool_;
  Ops ops_;
  VTensorScheduler vts_;
};

}  // namespace kvvm
