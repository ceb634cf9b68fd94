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

#include "kvvm/check.h"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <vector>

namespace kvvm {

namespace {

class Replayer {
 public:
  // Returns an empty string when `r` is legal, else the reason.
  std::string apply(const OpRecord& r) {
    if (!configured_ && r.kind != OpKind::kConfig) {
      return "first record must be the config header";
    }
    switch (r.kind) {
      case OpKind::kConfig:
        if (configured_) return "second config header";
        if (r.chunk_size_bytes == 0 || r.tokens_per_chunk == 0) {
          return "config header lacks chunk geometry";
        }
        configured_ = true;
        capacity_ = r.capacity_bytes;
        chunk_ = r.chunk_size_bytes;
        weights_ = r.weights_bytes;
        activation_ = r.activation_bytes;
        tpc_ = r.tokens_per_chunk;
        return {};
      case OpKind::kReserve: {
        if (r.pages == 0) return "empty reservation";
        const uint64_t end = r.base + r.pages * chunk_;
        for (const auto& [base, table] : ranges_) {
          const uint64_t other_end = base + table.size() * chunk_;
          if (r.base < other_end && base < end) return "overlapping range";
        }
        if (r.base < next_base_) return "virtual address reused";
        next_base_ = end;
        ranges_[r.base].assign(r.pages, std::nullopt);
        return {};
      }
      case OpKind::kCreate:
        if (seen_.contains(r.handle)) return "handle id reused";
        if (used() + chunk_ > capacity_) return "create beyond capacity";
        seen_.insert(r.handle);
        maps_[r.handle] = 0;
        return {};
      case OpKind::kMap: {
        auto range = ranges_.find(r.base);
        if (range == ranges_.end()) return "map into unreserved range";
        if (r.page >= range->second.size()) return "map past range end";
        if (range->second[r.page]) return "page already mapped";
        auto h = maps_.find(r.handle);
        if (h == maps_.end()) return "map of dead handle";
        range->second[r.page] = r.handle;
        ++h->second;
        return {};
      }
      case OpKind::kUnmap: {
        auto range = ranges_.find(r.base);
        if (range == ranges_.end()) return "unmap in unreserved range";
        if (r.page >= range->second.size() || !range->second[r.page]) {
          return "unmap of empty page";
        }
        if (*range->second[r.page] != r.handle) return "unmap handle mismatch";
        range->second[r.page].reset();
        --maps_[r.handle];
        return {};
      }
      case OpKind::kRelease: {
        auto range = ranges_.find(r.base);
        if (range == ranges_.end()) return "release of unreserved range";
        if (range->second.size() != r.pages) return "release size mismatch";
        for (const auto& slot : range->second) {
          if (slot) return "release of mapped range";
        }
        ranges_.erase(range);
        return {};
      }
      case OpKind::kDestroy: {
        auto h = maps_.find(r.handle);
        if (h == maps_.end()) return "destroy of dead handle";
        if (h->second != 0) return "destroy of mapped chunk";
        maps_.erase(h);
        return {};
      }
      case OpKind::kActivationAcquire:
        if (used() + activation_ > capacity_) {
          return "activation beyond capacity";
        }
        ++activations_;
        return {};
      case OpKind::kActivationRelease:
        if (activations_ == 0) return "activation released twice";
        --activations_;
        return {};
      case OpKind::kTreeInsert:
        if (r.tokens.empty() || r.tokens.size() % tpc_ != 0) {
          return "tree key not chunk-aligned";
        }
        recorded_.insert(r.tokens);
        return {};
      case OpKind::kTreeErase:
        if (recorded_.erase(r.tokens) == 0) return "erase of unrecorded key";
        return {};
      case OpKind::kTreeMatch: {
        const uint64_t expect = brute_match(r.tokens);
        if (expect != r.matched) {
          return "tree match " + std::to_string(r.matched) +
                 " != brute force " + std::to_string(expect);
        }
        return {};
      }
    }
    return "unknown record";
  }

 private:
  uint64_t used() const {
    return weights_ + activations_ * activation_ + maps_.size() * chunk_;
  }

  uint64_t brute_match(const std::vector<TokenId>& query) const {
    uint64_t best = 0;
    for (const auto& key : recorded_) {
      const size_t n = std::min(key.size(), query.size());
      size_t common = 0;
      while (common < n && key[common] == query[common]) ++common;
      best = std::max<uint64_t>(best, common / tpc_ * tpc_);
    }
    return best;
  }

  bool configured_ = false;
  uint64_t capacity_ = 0;
  uint64_t chunk_ = 0;
  uint64_t weights_ = 0;
  uint64_t activation_ = 0;
  uint64_t tpc_ = 0;
  uint64_t next_base_ = 0;
  uint64_t activations_ = 0;
  std::map<uint64_t, std::vector<std::optional<uint64_t>>> ranges_;
  std::map<uint64_t, uint64_t> maps_;
  std::set<uint64_t> seen_;
  std::set<std::vector<TokenId>> recorded_;
};

}  // namespace

CheckReport check_log(const OpLog& log) {
  CheckReport report;
  Replayer replayer;
  for (const OpRecord& r : log.records()) {
    std::string why = replayer.apply(r);
    if (!why.empty()) {
      report.ok = false;
      report.failed_record = report.records_checked;
      report.violation = std::string(op_kind_name(r.kind)) + ": " + why;
      return report;
    }
    ++report.records_checked;
  }
  return report;
}

std::optional<std::string> scan_invariants(const VTensorManager& manager) {
  const Device& device = manager.device();
  const Pool& pool = manager.pool();
  std::map<PhysicalHandle, uint64_t> mapped;
  uint64_t mapped_pages = 0;
  for (const auto& [id, space] : pool.vset()) {
    if (!device.is_reserved(space.range)) {
      return "space " + std::to_string(id.value) + " has no reservation";
    }
    const bool available = space.state == SpaceState::kAvailable;
    if (available != pool.available_spaces().contains(id)) {
      return "space " + std::to_string(id.value) + " availability mismatch";
    }
    if (available && space.mapped_pages != 0) {
      return "available space " + std::to_string(id.value) + " is mapped";
    }
    for (uint64_t p = 0; p < space.page_table.size(); ++p) {
      if (space.page_table[p].has_value() != (p < space.mapped_pages)) {
        return "space " + std::to_string(id.value) + " mapping not a prefix";
      }
      if (p < space.mapped_pages) ++mapped[*space.page_table[p]];
    }
    mapped_pages += space.mapped_pages;
  }
  if (mapped_pages != device.stats().mapped_page_count) {
    return "pool maps " + std::to_string(mapped_pages) +
           " pages, device maps " +
           std::to_string(device.stats().mapped_page_count);
  }
  for (const auto& [h, entry] : pool.pset()) {
    const std::string name = "chunk " + std::to_string(h.id);
    if (!device.is_live(h)) return name + " is not live on the device";
    const uint64_t maps = mapped.contains(h) ? mapped.at(h) : 0;
    if (entry.ref_count != maps || entry.ref_count != device.map_count(h) ||
        entry.ref_count != entry.referrers.size()) {
      return name + " ref_count disagrees with its mappings";
    }
    const bool free = entry.state == ChunkState::kFree;
    if (free != (entry.ref_count == 0)) {
      return name + " state disagrees with ref_count";
    }
    if (free != pool.free_handles().contains(h)) {
      return name + " free-list membership mismatch";
    }
  }
  if (pool.pset().size() != device.stats().live_handles) {
    return "pool and device disagree on live chunks";
  }
  return std::nullopt;
}

CheckReport fuzz_check(const FuzzOptions& options) {
  std::mt19937_64 rng(options.seed);
  ManagerConfig config;
  config.tokens_per_chunk = 4;
  config.device.chunk_size_bytes = 4 * kKiB;
  config.device.capacity_bytes = 160 * kKiB;
  config.device.weights_bytes = 16 * kKiB;
  config.device.activation_bytes_per_request = 8 * kKiB;
  config.vts.max_seq_len = 64;
  config.vts.initial_alloc_tokens = 8;
  VTensorManager manager(config);
  OpLog log;
  manager.attach_log(&log);
  VTensorScheduler& vts = manager.vts();

  auto pick = [&](uint64_t n) {
    return std::uniform_int_distribution<uint64_t>(0, n - 1)(rng);
  };
  // Tiny alphabet so prompts share prefixes often.
  auto prompt = [&](uint64_t len) {
    std::vector<TokenId> t(len);
    for (auto& x : t) x = static_cast<TokenId>(pick(2));
    return t;
  };
  uint64_t next_id = 1;
  std::vector<RequestId> live;
  CheckReport report;

  for (uint64_t i = 0; i < options.ops; ++i) {
    try {
      switch (pick(6)) {
        case 0: {
          RequestId id{next_id++};
          auto p = prompt(pick(40));
          auto hit = vts.prefix_match(id, p);
          if (hit.matched_tokens == 0) vts.create(id, p.size());
          const RequestMem* m = vts.find(id);
          vts.commit(id, std::span<const TokenId>(p).subspan(
                             m->vt.token_count));
          live.push_back(id);
          break;
        }
        case 1:
        case 2: {
          if (live.empty()) break;
          RequestId id = live[pick(live.size())];
          const RequestMem* m = vts.find(id);
          const uint64_t add = 1 + pick(8);
          if (m->vt.token_count + add > config.vts.max_seq_len) break;
          vts.extend(id, m->vt.token_count + add);
          vts.commit(id, prompt(add));
          break;
        }
        case 3: {
          if (live.empty()) break;
          const size_t k = pick(live.size());
          if (pick(2) == 0) vts.prefix_record(live[k]);
          vts.release(live[k]);
          live.erase(live.begin() + k);
          break;
        }
        case 4:
          if (pick(4) == 0) manager.ops().empty_memory(pick(2) == 0);
          else manager.ops().evict_prefix_lru();
          break;
        case 5:
          manager.ops().trim(pick(8) * config.device.chunk_size_bytes);
          break;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDeviceOutOfMemory) {
        report.ok = false;
        report.violation = std::string("unexpected error: ") + e.what();
        return report;
      }
    }
    if (auto bad = scan_invariants(manager)) {
      report.ok = false;
      report.violation = "after action " + std::to_string(i) + ": " + *bad;
      return report;
    }
  }
  return check_log(log);
}

}  // namespace kvvm
