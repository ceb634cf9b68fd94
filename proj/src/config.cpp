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

#include "kvvm/config.h"

#include <string>

#include "kvvm/common.h"

namespace kvvm {

std::string_view allocator_name(AllocatorKind kind) {
  switch (kind) {
    case AllocatorKind::kNative:
      return "native";
    case AllocatorKind::kPaged:
      return "paged";
    case AllocatorKind::kVTensor:
      return "vtensor";
  }
  return "unknown";
}

std::optional<AllocatorKind> parse_allocator(std::string_view name) {
  for (AllocatorKind k : {AllocatorKind::kNative, AllocatorKind::kPaged,
                          AllocatorKind::kVTensor}) {
    if (allocator_name(k) == name) return k;
  }
  return std::nullopt;
}

uint64_t SimConfig::tokens_per_chunk() const {
  return kvvm::tokens_per_chunk(device.chunk_size_bytes, bytes_per_token());
}

void SimConfig::validate() const {
  device.validate();
  const uint64_t tpc = tokens_per_chunk();
  if (max_seq_len == 0 || max_seq_len % tpc != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "max_seq_len must be a positive multiple of " +
                    std::to_string(tpc) + " tokens per chunk");
  }
  if (max_batch == 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_batch must be positive");
  }
  if (block_size_tokens == 0) {
    throw Error(ErrorCode::kInvalidArgument, "block_size must be positive");
  }
}

}  // namespace kvvm
