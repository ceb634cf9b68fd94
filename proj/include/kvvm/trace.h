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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kvvm/common.h"

namespace kvvm {

// One line of a trace file.
struct TraceRecord {
  uint64_t id = 0;
  uint64_t arrival_step = 0;
  std::optional<uint64_t> conversation;
  uint64_t prompt_len = 0;
  std::optional<std::vector<TokenId>> prompt_tokens;
  uint64_t output_len = 1;
};

// Throws Error(kBadTrace) with "<source>:<line>: <reason>".
std::vector<TraceRecord> read_trace(std::istream& in, std::string_view source);
std::vector<TraceRecord> load_trace(const std::string& path);
void write_trace(std::ostream& out, std::span<const TraceRecord> trace);

inline constexpr uint64_t kVocabSize = 32000;

// Deterministic token at `position` of the stream identified by `key`.
TokenId synth_token(uint64_t seed, uint64_t key, uint64_t position);
// Requests of one conversation share a stream, so a later turn's prompt
// starts with the earlier turn's prompt and output.
uint64_t stream_key(const TraceRecord& record);

enum class Scenario { kSingleGen, kMultiTurn, kPrefixShare };

std::optional<Scenario> parse_scenario(std::string_view name);
std::string_view scenario_name(Scenario scenario);

struct GenOptions {
  Scenario scenario = Scenario::kSingleGen;
  uint64_t seed = 1;
  // 0 picks the scenario default: requests for single_gen and
  // prefix_share, conversations for multi_turn.
  uint64_t count = 0;
  uint64_t turns = 3;
};

struct PrefixShareShape {
  uint64_t shared_tokens = 12000;
  uint64_t distinct_tokens = 4000;
  uint64_t output_len = 10;
  // Arrival of every request after the first.
  uint64_t follower_arrival = 20;
};

std::vector<TraceRecord> generate_trace(const GenOptions& options);

}  // namespace kvvm
