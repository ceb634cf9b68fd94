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
#include <optional>
#include <string>

#include "kvvm/oplog.h"
#include "kvvm/vts.h"

namespace kvvm {

struct CheckReport {
  bool ok = true;
  uint64_t records_checked = 0;
  // Index of the offending record and what was wrong with it.
  std::optional<uint64_t> failed_record;
  std::string violation;
};

// Replays `log` against an independent model of the device and the prefix
// tree: call legality, memory conservation, no handle reuse, and every
// logged tree match equal to a brute-force longest recorded prefix. Stops
// at the first violation.
CheckReport check_log(const OpLog& log);

// Scans pool and device for refcount and state agreement. Returns the first
// disagreement found.
std::optional<std::string> scan_invariants(const VTensorManager& manager);

struct FuzzOptions {
  uint64_t seed = 1;
  uint64_t ops = 1000;
};

// Drives a small manager with random scheduler actions, scanning after
// every action, then checks the recorded log.
CheckReport fuzz_check(const FuzzOptions& options);

}  // namespace kvvm
