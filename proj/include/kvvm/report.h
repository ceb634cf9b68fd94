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

#include <iosfwd>
#include <span>
#include <string>

#include "kvvm/config.h"
#include "kvvm/engine.h"

namespace kvvm {

// Columns: step, created_bytes, mapped_bytes, used_bytes,
// reserved_virtual_bytes, free_bytes, active_requests, stalls, preemptions.
void write_csv(std::ostream& out, const SimulationReport& report);
std::string to_csv(const SimulationReport& report);

void write_summary_json(std::ostream& out, const SimulationReport& report,
                        const SimConfig& config);

// One row per report.
void write_comparison(std::ostream& out,
                      std::span<const SimulationReport> reports);

}  // namespace kvvm
