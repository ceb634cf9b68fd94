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

#include "kvvm/ops.h"

#include <gtest/gtest.h>

#include "oracles.h"

namespace kvvm {
namespace {

using testing::CallDelta;
using testing::refcount_violation;
using testing::small_manager;

class OpsTest : public ::testing::Test {
 protected:
  // 10 chunks of 4 tokens, spaces of 16 pages.
  OpsTest() : m_(small_manager(10)) {}

  Ops& ops() { return m_.ops(); }
  Device& device() { return m_.device(); }
  Pool& pool() { return m_.pool(); }

  VTensor filled(SpaceId space, uint64_t tokens, TokenId base = 0) {
    VTensor vt;
    vt.space = space;
    vt.token_count = tokens;
    for (uint64_t i = 0; i < tokens; ++i) vt.tokens.push_back(base + i);
    return vt;
  }

  VTensorManager m_;
};

TEST_F(OpsTest, VAllocCreatesNothing) {
  CallDelta calls(device());
  SpaceId s = ops().v_alloc(64);
  EXPECT_EQ(calls(DeviceCall::kCreate), 0u);
  EXPECT_EQ(calls(DeviceCall::kReserve), 1u);
  EXPECT_EQ(pool().space(s).range.page_count, 16u);
  EXPECT_EQ(device().stats().created_bytes, 0u);
  EXPECT_THROW(ops().v_alloc(32), Error);
}

TEST_F(OpsTest, VAllocReusesAvailableSpace) {
  SpaceId a = ops().v_alloc(64);
  ops().unmap_space(a);
  CallDelta calls(device());
  EXPECT_EQ(ops().v_alloc(64), a);
  EXPECT_EQ(calls(DeviceCall::kReserve), 0u);
}

TEST_F(OpsTest, PAllocReusesFreeChunksFirst) {
  SpaceId s = ops().v_alloc(64);
  auto first = ops().p_alloc(3);
  ops().map(s, first);
  ops().unmap_space(s);
  CallDelta calls(device());
  auto again = ops().p_alloc(5);
  EXPECT_EQ(calls(DeviceCall::kCreate), 2u);
  EXPECT_TRUE(std::equal(first.begin(), first.end(), again.begin()));
}

TEST_F(OpsTest, PAllocIsAllOrNothing) {
  SpaceId s = ops().v_alloc(64);
  ops().map(s, ops().p_alloc(4));
  ops().unmap_space(s);
  const auto free_before = pool().free_handles();
  const uint64_t created = device().stats().created_bytes;
  try {
    ops().p_alloc(11);
    ADD_FAILURE() << "expected OOM";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDeviceOutOfMemory);
  }
  EXPECT_EQ(pool().free_handles(), free_before);
  EXPECT_EQ(device().stats().created_bytes, created);
  EXPECT_EQ(pool().pset().size(), 4u);
  EXPECT_EQ(refcount_violation(m_), "");
}

TEST_F(OpsTest, MapAppendsAndChecksCapacity) {
  SpaceId s = ops().v_alloc(64);
  auto a = ops().p_alloc(2);
  ops().map(s, a);
  auto b = ops().p_alloc(1);
  ops().map(s, b);
  const VirtualSpace& space = pool().space(s);
  EXPECT_EQ(space.mapped_pages, 3u);
  EXPECT_EQ(space.page_table[2], b[0]);
  EXPECT_EQ(device().resolve(space.range, 2), b[0]);
  std::vector<PhysicalHandle> dup{a[0]};
  EXPECT_THROW(ops().map(s, dup), Error);
}

TEST_F(OpsTest, MapPastSpaceEnd) {
  ManagerConfig c = small_manager(40);
  VTensorManager m(c);
  SpaceId s = m.ops().v_alloc(64);
  m.ops().map(s, m.ops().p_alloc(16));
  auto more = m.ops().p_alloc(1);
  try {
    m.ops().map(s, more);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCapacityExceeded);
  }
}

TEST_F(OpsTest, UnmapIsLazy) {
  SpaceId s = ops().v_alloc(64);
  ops().map(s, ops().p_alloc(4));
  CallDelta calls(device());
  ops().unmap_space(s);
  EXPECT_EQ(calls(DeviceCall::kDestroy), 0u);
  EXPECT_EQ(calls(DeviceCall::kRelease), 0u);
  EXPECT_EQ(calls(DeviceCall::kUnmap), 4u);
  EXPECT_EQ(pool().free_handles().size(), 4u);
  EXPECT_EQ(pool().space(s).state, SpaceState::kAvailable);
  EXPECT_EQ(device().stats().created_bytes, 4 * 4 * kKiB);
  // Second unmap is a no-op.
  ops().unmap_space(s);
  EXPECT_EQ(calls(DeviceCall::kUnmap), 4u);
}

TEST_F(OpsTest, EmptyMemoryReclaimsEverythingUnpinned) {
  SpaceId s = ops().v_alloc(64);
  ops().map(s, ops().p_alloc(4));
  ops().unmap_space(s);
  ReclaimReport r = ops().empty_memory();
  EXPECT_EQ(r.chunks_destroyed, 4u);
  EXPECT_EQ(r.bytes_reclaimed, 16 * kKiB);
  EXPECT_EQ(r.spaces_released, 1u);
  EXPECT_EQ(device().stats().created_bytes, 0u);
  EXPECT_EQ(device().stats().reserved_virtual_bytes, 0u);
  EXPECT_TRUE(pool().vset().empty());
}

TEST_F(OpsTest, PFreeRejectsActiveChunk) {
  SpaceId s = ops().v_alloc(64);
  auto h = ops().p_alloc(1);
  ops().map(s, h);
  try {
    ops().p_free(h[0]);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kChunkStillMapped);
  }
}

TEST_F(OpsTest, TrimStopsWhenEnoughIsFree) {
  SpaceId s = ops().v_alloc(64);
  ops().map(s, ops().p_alloc(10));
  ops().unmap_space(s);
  EXPECT_EQ(device().stats().free_bytes, 0u);
  EXPECT_EQ(ops().trim(8 * kKiB), 2u);
  EXPECT_EQ(pool().free_handles().size(), 8u);
}

TEST_F(OpsTest, RecordPinsChunksPastDonorRelease) {
  SpaceId s = ops().v_alloc(64);
  auto chunks = ops().p_alloc(3);
  ops().map(s, chunks);
  ops().r_push(filled(s, 10));
  // 10 tokens -> 2 whole chunks recorded.
  EXPECT_EQ(pool().rtree().recorded_chunks(), 2u);
  EXPECT_EQ(pool().entry(chunks[0]).ref_count, 2u);
  EXPECT_EQ(pool().entry(chunks[2]).ref_count, 1u);
  ops().unmap_space(s);
  EXPECT_EQ(pool().entry(chunks[0]).state, ChunkState::kActive);
  EXPECT_EQ(pool().entry(chunks[2]).state, ChunkState::kFree);
  ops().empty_memory();
  EXPECT_EQ(device().stats().created_bytes, 2 * 4 * kKiB);
  EXPECT_EQ(refcount_violation(m_), "");

  std::vector<TokenId> q{0, 1, 2, 3, 4, 5, 6, 7, 99};
  auto hit = ops().r_prefix_match(q);
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(hit->matched_tokens, 8u);
  const VirtualSpace& rec = pool().space(hit->vt.space);
  EXPECT_TRUE(rec.prefix_record);
  EXPECT_EQ(rec.page_table[0], chunks[0]);
  EXPECT_EQ(rec.page_table[1], chunks[1]);

  ops().empty_memory(true);
  EXPECT_EQ(device().stats().created_bytes, 0u);
  EXPECT_EQ(pool().rtree().record_count(), 0u);
}

TEST_F(OpsTest, ShortRecordIsNoOp) {
  SpaceId s = ops().v_alloc(64);
  ops().map(s, ops().p_alloc(1));
  CallDelta calls(device());
  ops().r_push(filled(s, 3));
  EXPECT_EQ(pool().rtree().record_count(), 0u);
  EXPECT_EQ(calls(DeviceCall::kReserve), 0u);
  EXPECT_EQ(calls(DeviceCall::kMap), 0u);
}

TEST_F(OpsTest, RecordAgainReplaces) {
  SpaceId s = ops().v_alloc(64);
  auto chunks = ops().p_alloc(2);
  ops().map(s, chunks);
  ops().r_push(filled(s, 8));
  ops().r_push(filled(s, 8));
  EXPECT_EQ(pool().rtree().record_count(), 1u);
  EXPECT_EQ(pool().entry(chunks[0]).ref_count, 2u);
  EXPECT_EQ(refcount_violation(m_), "");
}

TEST_F(OpsTest, RecordCapEvictsLeastRecent) {
  ManagerConfig c = small_manager(20);
  c.prefix_cache_max_chunks = 3;
  VTensorManager m(c);
  for (TokenId base : {0u, 100u}) {
    SpaceId s = m.ops().v_alloc(64);
    m.ops().map(s, m.ops().p_alloc(2));
    m.ops().r_push(filled(s, 8, base));
    m.ops().unmap_space(s);
  }
  EXPECT_EQ(m.pool().rtree().record_count(), 1u);
  std::vector<TokenId> old{0, 1, 2, 3};
  EXPECT_FALSE(m.ops().r_prefix_match(old).has_value());
  EXPECT_EQ(refcount_violation(m), "");
}

}  // namespace
}  // namespace kvvm
