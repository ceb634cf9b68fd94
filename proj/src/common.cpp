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

#include "kvvm/common.h"

namespace kvvm {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidSize: return "InvalidSize";
    case ErrorCode::kDeviceOutOfMemory: return "DeviceOutOfMemory";
    case ErrorCode::kPageAlreadyMapped: return "PageAlreadyMapped";
    case ErrorCode::kPageNotMapped: return "PageNotMapped";
    case ErrorCode::kStaleHandle: return "StaleHandle";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kRangeStillMapped: return "RangeStillMapped";
    case ErrorCode::kUnknownRange: return "UnknownRange";
    case ErrorCode::kChunkStillMapped: return "ChunkStillMapped";
    case ErrorCode::kUnknownReferrer: return "UnknownReferrer";
    case ErrorCode::kCapacityExceeded: return "CapacityExceeded";
    case ErrorCode::kExceedsMaxSeqLen: return "ExceedsMaxSeqLen";
    case ErrorCode::kInvalidState: return "InvalidState";
    case ErrorCode::kNothingToPreempt: return "NothingToPreempt";
    case ErrorCode::kTraceInfeasible: return "TraceInfeasible";
    case ErrorCode::kBadTrace: return "BadTrace";
  }
  return "Unknown";
}

}  // namespace kvvm
