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

#include "kvvm/trace.h"

#include <algorithm>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <set>

#include "json.hpp"

namespace kvvm {

namespace {

using nlohmann::json;

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr uint64_t kRequestStreamBit = 1ULL << 63;
constexpr uint64_t kSharedPrefixKey = 0x5eed0000ULL;
constexpr uint64_t kSuffixKeyBase = 0x5eed0000ULL << 16;

uint64_t unsigned_field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) {
    throw std::runtime_error(std::string("missing field '") + name + "'");
  }
  if (!it->is_number_unsigned()) {
    throw std::runtime_error(std::string("field '") + name +
                             "' must be a non-negative integer");
  }
  return it->get<uint64_t>();
}

TraceRecord parse_record(const json& j) {
  if (!j.is_object()) throw std::runtime_error("expected a JSON object");
  TraceRecord r;
  r.id = unsigned_field(j, "id");
  r.arrival_step = unsigned_field(j, "arrival_step");
  r.prompt_len = unsigned_field(j, "prompt_len");
  r.output_len = unsigned_field(j, "output_len");
  if (r.output_len == 0) throw std::runtime_error("output_len must be >= 1");
  if (j.contains("conversation") && !j.at("conversation").is_null()) {
    r.conversation = unsigned_field(j, "conversation");
  }
  if (j.contains("prompt_tokens") && !j.at("prompt_tokens").is_null()) {
    const json& tokens = j.at("prompt_tokens");
    if (!tokens.is_array()) {
      throw std::runtime_error("prompt_tokens must be an array");
    }
    std::vector<TokenId> out;
    out.reserve(tokens.size());
    for (const json& t : tokens) {
      if (!t.is_number_unsigned() ||
          t.get<uint64_t>() > std::numeric_limits<TokenId>::max()) {
        throw std::runtime_error("prompt_tokens entries must be token ids");
      }
      out.push_back(t.get<TokenId>());
    }
    if (out.size() != r.prompt_len) {
      throw std::runtime_error("prompt_tokens has " +
                               std::to_string(out.size()) +
                               " entries but prompt_len is " +
                               std::to_string(r.prompt_len));
    }
    r.prompt_tokens = std::move(out);
  }
  return r;
}

}  // namespace

std::vector<TraceRecord> read_trace(std::istream& in, std::string_view source) {
  std::vector<TraceRecord> trace;
  std::set<uint64_t> ids;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      TraceRecord r = parse_record(json::parse(line));
      if (!ids.insert(r.id).second) {
        throw std::runtime_error("duplicate id " + std::to_string(r.id));
      }
      trace.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kBadTrace, std::string(source) + ":" +
                                            std::to_string(line_no) + ": " +
                                            e.what());
    }
  }
  return trace;
}

std::vector<TraceRecord> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kBadTrace, "cannot open trace " + path);
  return read_trace(in, path);
}

void write_trace(std::ostream& out, std::span<const TraceRecord> trace) {
  for (const TraceRecord& r : trace) {
    json j;
    j["id"] = r.id;
    j["arrival_step"] = r.arrival_step;
    if (r.conversation) j["conversation"] = *r.conversation;
    j["prompt_len"] = r.prompt_len;
    if (r.prompt_tokens) j["prompt_tokens"] = *r.prompt_tokens;
    j["output_len"] = r.output_len;
    out << j.dump() << '\n';
  }
}

TokenId synth_token(uint64_t seed, uint64_t key, uint64_t position) {
  const uint64_t h = mix64(mix64(mix64(seed) ^ key) ^ position);
  return static_cast<TokenId>(h % kVocabSize);
}

uint64_t stream_key(const TraceRecord& record) {
  return record.conversation ? *record.conversation
                             : (kRequestStreamBit | record.id);
}

std::optional<Scenario> parse_scenario(std::string_view name) {
  for (Scenario s : {Scenario::kSingleGen, Scenario::kMultiTurn,
                     Scenario::kPrefixShare}) {
    if (scenario_name(s) == name) return s;
  }
  return std::nullopt;
}

std::string_view scenario_name(Scenario scenario) {
  switch (scenario) {
    case Scenario::kSingleGen:
      return "single_gen";
    case Scenario::kMultiTurn:
      return "multi_turn";
    case Scenario::kPrefixShare:
      return "prefix_share";
  }
  return "unknown";
}

std::vector<TraceRecord> generate_trace(const GenOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::vector<TraceRecord> trace;
  switch (options.scenario) {
    case Scenario::kSingleGen: {
      const uint64_t n = options.count == 0 ? 16 : options.count;
      std::uniform_int_distribution<uint64_t> prompt(6000, 8000);
      std::uniform_int_distribution<uint64_t> output(2000, 4000);
      for (uint64_t i = 0; i < n; ++i) {
        TraceRecord r;
        r.id = i + 1;
        r.prompt_len = prompt(rng);
        r.output_len = output(rng);
        trace.push_back(r);
      }
      break;
    }
    case Scenario::kMultiTurn: {
      const uint64_t n = options.count == 0 ? 4 : options.count;
      constexpr uint64_t kTurnTokens = 2048;
      std::uniform_int_distribution<uint64_t> start(0, 64);
      std::uniform_int_distribution<uint64_t> think(8, 64);
      for (uint64_t c = 0; c < n; ++c) {
        uint64_t arrival = start(rng);
        for (uint64_t k = 0; k < options.turns; ++k) {
          TraceRecord r;
          r.arrival_step = arrival;
          r.conversation = c;
          // History of earlier turns plus a fresh user message.
          r.prompt_len = kTurnTokens * (2 * k + 1);
          r.output_len = kTurnTokens;
          trace.push_back(r);
          arrival += kTurnTokens + think(rng);
        }
      }
      std::stable_sort(trace.begin(), trace.end(),
                       [](const TraceRecord& a, const TraceRecord& b) {
                         return a.arrival_step < b.arrival_step;
                       });
      for (size_t i = 0; i < trace.size(); ++i) trace[i].id = i + 1;
      break;
    }
    case Scenario::kPrefixShare: {
      const uint64_t n = options.count == 0 ? 8 : options.count;
      const PrefixShareShape shape;
      std::vector<TokenId> shared(shape.shared_tokens);
      for (uint64_t p = 0; p < shape.shared_tokens; ++p) {
        shared[p] = synth_token(options.seed, kSharedPrefixKey, p);
      }
      for (uint64_t i = 0; i < n; ++i) {
        TraceRecord r;
        r.id = i + 1;
        r.arrival_step = i == 0 ? 0 : shape.follower_arrival;
        r.conversation = 0;
        r.prompt_len = shape.shared_tokens + shape.distinct_tokens;
        std::vector<TokenId> tokens = shared;
        for (uint64_t p = 0; p < shape.distinct_tokens; ++p) {
          tokens.push_back(synth_token(options.seed, kSuffixKeyBase + r.id,
                                       shape.shared_tokens + p));
        }
        r.prompt_tokens = std::move(tokens);
        r.output_len = shape.output_len;
        trace.push_back(std::move(r));
      }
      break;
    }
  }
  return trace;
}

}  // namespace kvvm
