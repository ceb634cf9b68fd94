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

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "kvvm/common.h"
#include "kvvm/oplog.h"

namespace kvvm {

struct DeviceConfig {
  uint64_t capacity_bytes = 80 * kGiB;
  uint64_t chunk_size_bytes = 2 * kMiB;
  uint64_t weights_bytes = 12 * kGiB;
  uint64_t activation_bytes_per_request = 256 * kMiB;

  // One page maps exactly one chunk.
  uint64_t page_size_bytes() const { return chunk_size_bytes; }

  // Throws Error(kInvalidArgument) on an inconsistent configuration.
  void validate() const;
};

struct VirtualRange {
  uint64_t base = 0;
  uint64_t length_bytes = 0;
  uint64_t page_count = 0;

  friend bool operator==(const VirtualRange&, const VirtualRange&) = default;
};

struct DeviceStats {
  uint64_t created_bytes = 0;
  uint64_t reserved_virtual_bytes = 0;
  uint64_t mapped_page_count = 0;
  uint64_t activation_bytes = 0;
  uint64_t free_bytes = 0;
  uint64_t live_handles = 0;
  uint64_t live_ranges = 0;
};

enum class DeviceCall { kReserve, kCreate, kMap, kUnmap, kRelease, kDestroy };
inline constexpr size_t kDeviceCallKinds = 6;

// Simulated GPU virtual-memory device.
//
// Physical memory is handed out in fixed-size chunks. Virtual ranges are
// reserved independently and cost nothing physical; a range's page slots
// are bound to chunks one page at a time. Addresses come from a monotonic
// counter and are never reused, so a released range is detectably stale.
//
// Single-writer: all mutations must come from one owner context.
class Device {
 public:
  explicit Device(DeviceConfig config);

  Device(const Device&) = delete;
  Device& operator=(const Device&) = delete;

  VirtualRange reserve_address(uint64_t size_bytes);
  PhysicalHandle create_chunk();
  void map_page(const VirtualRange& range, uint64_t page_index,
                PhysicalHandle handle);
  PhysicalHandle unmap_page(const VirtualRange& range, uint64_t page_index);
  void release_address(const VirtualRange& range);
  void destroy_chunk(PhysicalHandle handle);

  // Constant per-request activation memory.
  void acquire_activation();
  void release_activation();

  std::optional<PhysicalHandle> resolve(const VirtualRange& range,
                                        uint64_t page_index) const;
  uint64_t map_count(PhysicalHandle handle) const;
  bool is_live(PhysicalHandle handle) const;
  bool is_reserved(const VirtualRange& range) const;

  DeviceStats stats() const;
  const DeviceConfig& config() const { return config_; }
  uint64_t active_activations() const { return activations_; }

  uint64_t call_count(DeviceCall call) const {
    return call_counts_[static_cast<size_t>(call)];
  }
  uint64_t total_calls() const;

  std::vector<VirtualRange> live_ranges() const;
  std::vector<PhysicalHandle> live_handles() const;

  // Every successful primitive call is appended to `log` when attached.
  void attach_log(OpLog* log, uint64_t tokens_per_chunk = 0);

 private:
  struct RangeState {
    VirtualRange range;
    std::vector<std::optional<PhysicalHandle>> slots;
    uint64_t mapped = 0;
  };

  RangeState& lookup(const VirtualRange& range);
  const RangeState* find(const VirtualRange& range) const;
  void record(OpRecord record);
  void count(DeviceCall call) { ++call_counts_[static_cast<size_t>(call)]; }

  DeviceConfig config_;
  uint64_t next_base_ = 0;
  uint64_t next_handle_ = 0;
  std::map<uint64_t, RangeState> ranges_;
  std::map<uint64_t, uint64_t> chunk_map_counts_;
  uint64_t reserved_virtual_bytes_ = 0;
  uint64_t mapped_pages_ = 0;
  uint64_t activations_ = 0;
  std::array<uint64_t, kDeviceCallKinds> call_counts_{};
  OpLog* log_ = nullptr;
};

}  // namespace kvvm
