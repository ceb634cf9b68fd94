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

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kvvm {

inline constexpr uint64_t kKiB = 1024;
inline constexpr uint64_t kMiB = 1024 * kKiB;
inline constexpr uint64_t kGiB = 1024 * kMiB;

// Token ids are opaque; prefix equality is exact id equality.
using TokenId = uint32_t;

struct RequestId {
  uint64_t value = 0;
  friend auto operator<=>(const RequestId&, const RequestId&) = default;
};

// Identity of one physical chunk. Never reused after destroy.
struct PhysicalHandle {
  uint64_t id = 0;
  friend auto operator<=>(const PhysicalHandle&, const PhysicalHandle&) =
      default;
};

// Identity of a virtual space; the base ordinal of its reserved range.
struct SpaceId {
  uint64_t value = 0;
  friend auto operator<=>(const SpaceId&, const SpaceId&) = default;
};

enum class ErrorCode {
  kInvalidArgument,
  kInvalidSize,
  kDeviceOutOfMemory,
  kPageAlreadyMapped,
  kPageNotMapped,
  kStaleHandle,
  kIndexOutOfRange,
  kRangeStillMapped,
  kUnknownRange,
  kChunkStillMapped,
  kUnknownReferrer,
  kCapacityExceeded,
  kExceedsMaxSeqLen,
  kInvalidState,
  kNothingToPreempt,
  kTraceInfeasible,
  kBadTrace,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

}  // namespace kvvm
