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
#include <memory>
#include <set>
#include <span>

#include "kvvm/baselines.h"
#include "kvvm/common.h"
#include "kvvm/config.h"
#include "kvvm/metrics.h"
#include "kvvm/vts.h"

namespace kvvm {

struct ActionCost {
  uint64_t device_calls = 0;
  uint64_t chunks_acquired = 0;
  uint64_t chunks_created = 0;

  ActionCost& operator+=(const ActionCost& o) {
    device_calls += o.device_calls;
    chunks_acquired += o.chunks_acquired;
    chunks_created += o.chunks_created;
    return *this;
  }
};

struct PrefillResult {
  // Leading prompt tokens whose KV was already resident.
  uint64_t matched_tokens = 0;
  ActionCost cost;
};

// KV-cache allocator as seen by the serving engine.
class KvBackend {
 public:
  virtual ~KvBackend() = default;

  virtual AllocatorKind kind() const = 0;
  // Activation and KV for the whole prompt, plus lookahead when it fits.
  // Throws kDeviceOutOfMemory and leaves nothing behind.
  virtual PrefillResult prefill(RequestId request,
                                std::span<const TokenId> prompt) = 0;
  // Provisions `desired` tokens if possible, else `needed`. Throws
  // kDeviceOutOfMemory when even `needed` does not fit.
  virtual ActionCost ensure(RequestId request, uint64_t needed,
                            uint64_t desired) = 0;
  virtual void commit(RequestId request, std::span<const TokenId> tokens) = 0;
  virtual uint64_t token_count(RequestId request) const = 0;
  virtual uint64_t provisioned_tokens(RequestId request) const = 0;
  // Records the request as a prefix candidate before releasing it when
  // `record` is set.
  virtual ActionCost finish(RequestId request, bool record) = 0;
  // No-op for requests holding nothing.
  virtual ActionCost release(RequestId request) = 0;
  // Drops the least recently used prefix record; false if none.
  virtual bool evict_prefix() = 0;
  virtual void end_of_run(bool evict_prefix) = 0;
  virtual MemorySample snapshot() const = 0;
};

class VTensorBackend : public KvBackend {
 public:
  explicit VTensorBackend(const SimConfig& config);

  AllocatorKind kind() const override { return AllocatorKind::kVTensor; }
  PrefillResult prefill(RequestId request,
                        std::span<const TokenId> prompt) override;
  ActionCost ensure(RequestId request, uint64_t needed,
                    uint64_t desired) override;
  void commit(RequestId request, std::span<const TokenId> tokens) override;
  uint64_t token_count(RequestId request) const override;
  uint64_t provisioned_tokens(RequestId request) const override;
  ActionCost finish(RequestId request, bool record) override;
  ActionCost release(RequestId request) override;
  bool evict_prefix() override;
  void end_of_run(bool evict_prefix) override;
  MemorySample snapshot() const override;

  VTensorManager& manager() { return manager_; }
  const VTensorManager& manager() const { return manager_; }

 private:
  void acquire_activation();

  SimConfig config_;
  VTensorManager manager_;
  std::set<RequestId> holding_;
};

class NativeBackend : public KvBackend {
 public:
  explicit NativeBackend(const SimConfig& config);

  AllocatorKind kind() const override { return AllocatorKind::kNative; }
  PrefillResult prefill(RequestId request,
                        std::span<const TokenId> prompt) override;
  ActionCost ensure(RequestId request, uint64_t needed,
                    uint64_t desired) override;
  void commit(RequestId request, std::span<const TokenId> tokens) override;
  uint64_t token_count(RequestId request) const override;
  uint64_t provisioned_tokens(RequestId request) const override;
  ActionCost finish(RequestId request, bool record) override;
  ActionCost release(RequestId request) override;
  bool evict_prefix() override { return false; }
  void end_of_run(bool) override {}
  MemorySample snapshot() const override;

  const NativeAllocator& allocator() const { return native_; }

 private:
  NativeAllocator native_;
};

class PagedBackend : public KvBackend {
 public:
  explicit PagedBackend(const SimConfig& config);

  AllocatorKind kind() const override { return AllocatorKind::kPaged; }
  PrefillResult prefill(RequestId request,
                        std::span<const TokenId> prompt) override;
  ActionCost ensure(RequestId request, uint64_t needed,
                    uint64_t desired) override;
  void commit(RequestId request, std::span<const TokenId> tokens) override;
  uint64_t token_count(RequestId request) const override;
  uint64_t provisioned_tokens(RequestId request) const override;
  ActionCost finish(RequestId request, bool record) override;
  ActionCost release(RequestId request) override;
  bool evict_prefix() override { return false; }
  void end_of_run(bool) override {}
  MemorySample snapshot() const override;

  const PagedAllocator& allocator() const { return paged_; }

 private:
  PagedAllocator paged_;
};

std::unique_ptr<KvBackend> make_backend(const SimConfig& config);

}  // namespace kvvm
