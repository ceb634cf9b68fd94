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

#include "kvvm/oplog.h"

#include <istream>
#include <ostream>

#include "json.hpp"

namespace kvvm {

namespace {

constexpr OpKind kAllKinds[] = {
    OpKind::kConfig,           OpKind::kReserve,  OpKind::kCreate,
    OpKind::kMap,              OpKind::kUnmap,    OpKind::kRelease,
    OpKind::kDestroy,          OpKind::kActivationAcquire,
    OpKind::kActivationRelease, OpKind::kTreeInsert, OpKind::kTreeErase,
    OpKind::kTreeMatch,
};

}  // namespace

std::string_view op_kind_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConfig:
      return "config";
    case OpKind::kReserve:
      return "reserve";
    case OpKind::kCreate:
      return "create";
    case OpKind::kMap:
      return "map";
    case OpKind::kUnmap:
      return "unmap";
    case OpKind::kRelease:
      return "release";
    case OpKind::kDestroy:
      return "destroy";
    case OpKind::kActivationAcquire:
      return "activation_acquire";
    case OpKind::kActivationRelease:
      return "activation_release";
    case OpKind::kTreeInsert:
      return "tree_insert";
    case OpKind::kTreeErase:
      return "tree_erase";
    case OpKind::kTreeMatch:
      return "tree_match";
  }
  return "unknown";
}

void OpLog::write_jsonl(std::ostream& out) const {
  for (const OpRecord& r : records_) {
    nlohmann::json j;
    j["op"] = op_kind_name(r.kind);
    switch (r.kind) {
      case OpKind::kConfig:
        j["capacity_bytes"] = r.capacity_bytes;
        j["chunk_size_bytes"] = r.chunk_size_bytes;
        j["weights_bytes"] = r.weights_bytes;
        j["activation_bytes"] = r.activation_bytes;
        j["tokens_per_chunk"] = r.tokens_per_chunk;
        break;
      case OpKind::kReserve:
      case OpKind::kRelease:
        j["base"] = r.base;
        j["pages"] = r.pages;
        break;
      case OpKind::kCreate:
      case OpKind::kDestroy:
        j["handle"] = r.handle;
        break;
      case OpKind::kMap:
      case OpKind::kUnmap:
        j["base"] = r.base;
        j["page"] = r.page;
        j["handle"] = r.handle;
        break;
      case OpKind::kActivationAcquire:
      case OpKind::kActivationRelease:
        break;
      case OpKind::kTreeInsert:
      case OpKind::kTreeErase:
        j["tokens"] = r.tokens;
        break;
      case OpKind::kTreeMatch:
        j["tokens"] = r.tokens;
        j["matched"] = r.matched;
        break;
    }
    out << j.dump() << '\n';
  }
}

OpLog OpLog::read_jsonl(std::istream& in) {
  OpLog log;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      const std::string op = j.at("op").get<std::string>();
      OpRecord r;
      bool known = false;
      for (OpKind k : kAllKinds) {
        if (op_kind_name(k) == op) {
          r.kind = k;
          known = true;
          break;
        }
      }
      if (!known) throw std::runtime_error("unknown op '" + op + "'");
      r.base = j.value("base", uint64_t{0});
      r.pages = j.value("pages", uint64_t{0});
      r.page = j.value("page", uint64_t{0});
      r.handle = j.value("handle", uint64_t{0});
      r.matched = j.value("matched", uint64_t{0});
      if (j.contains("tokens")) {
        r.tokens = j.at("tokens").get<std::vector<TokenId>>();
      }
      r.capacity_bytes = j.value("capacity_bytes", uint64_t{0});
      r.chunk_size_bytes = j.value("chunk_size_bytes", uint64_t{0});
      r.weights_bytes = j.value("weights_bytes", uint64_t{0});
      r.activation_bytes = j.value("activation_bytes", uint64_t{0});
      r.tokens_per_chunk = j.value("tokens_per_chunk", uint64_t{0});
      log.append(std::move(r));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kBadTrace,
                  "op log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace kvvm
