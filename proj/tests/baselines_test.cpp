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

#include "kvvm/baselines.h"

#include <gtest/gtest.h>

#include <random>

namespace kvvm {
namespace {

TEST(NativeTest, FullRegionPerRequest) {
  NativeConfig c;
  c.device.capacity_bytes = 160 * kGiB;
  c.device.activation_bytes_per_request = 0;
  NativeAllocator native(c);
  for (uint64_t r = 0; r < 64; ++r) {
    native.admit(RequestId{r});
    native.commit(RequestId{r}, 1 + r);
  }
  EXPECT_EQ(native.allocated_bytes(), 64ull * 4096 * 64 * kKiB);
  EXPECT_EQ(native.allocated_bytes(), 16 * kGiB);
}

TEST(NativeTest, WastePerRequest) {
  NativeAllocator native{NativeConfig{}};
  native.admit(RequestId{1});
  native.commit(RequestId{1}, 1000);
  EXPECT_EQ(native.allocated_bytes() - native.live_tokens() * 65536,
            (4096 - 1000) * 65536u);
  EXPECT_THROW(native.commit(RequestId{1}, 3097), Error);
}

TEST(NativeTest, OomWhenRegionsDoNotFit) {
  NativeAllocator native{NativeConfig{}};
  // 68 GiB after weights; each request needs 256 MiB + 256 MiB.
  uint64_t admitted = 0;
  try {
    for (;; ++admitted) native.admit(RequestId{admitted});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDeviceOutOfMemory);
  }
  EXPECT_EQ(admitted, 136u);
  native.release(RequestId{0});
  native.admit(RequestId{1000});
  native.release(RequestId{424242});
}

TEST(PagedTest, PoolClaimedUpFront) {
  PagedConfig c;
  c.activation_headroom_bytes = 8 * 256 * kMiB;
  PagedAllocator paged(c);
  EXPECT_EQ(paged.block_bytes(), kMiB);
  EXPECT_EQ(paged.pool_bytes(), 80 * kGiB - 12 * kGiB - 2 * kGiB);
  EXPECT_EQ(paged.free_block_count(), paged.block_count());
}

TEST(PagedTest, BlockTablesGrowByBlocks) {
  PagedConfig c;
  c.activation_headroom_bytes = kGiB;
  PagedAllocator paged(c);
  paged.admit(RequestId{1});
  paged.ensure(RequestId{1}, 17);
  EXPECT_EQ(paged.block_table(RequestId{1}).size(), 2u);
  paged.commit(RequestId{1}, 17);
  EXPECT_THROW(paged.commit(RequestId{1}, 16), Error);
  paged.ensure(RequestId{1}, 10);
  EXPECT_EQ(paged.block_table(RequestId{1}).size(), 2u);
}

TEST(PagedTest, InternalWasteUnderOneBlock) {
  std::mt19937_64 rng(3);
  PagedConfig c;
  c.activation_headroom_bytes = 64 * 256 * kMiB;
  PagedAllocator paged(c);
  for (uint64_t r = 0; r < 64; ++r) {
    const uint64_t len = 1 + rng() % 4096;
    paged.admit(RequestId{r});
    paged.ensure(RequestId{r}, len);
    paged.commit(RequestId{r}, len);
    const uint64_t waste =
        (paged.provisioned_tokens(RequestId{r}) - len) * c.bytes_per_token;
    EXPECT_LT(waste, c.block_size_tokens * c.bytes_per_token);
  }
}

TEST(PagedTest, OomOnlyWhenBlocksRunOut) {
  PagedConfig c;
  c.device.capacity_bytes = 64 * kMiB;
  c.device.weights_bytes = 0;
  c.device.activation_bytes_per_request = 0;
  c.block_size_tokens = 16;
  c.bytes_per_token = 64 * kKiB;  // 1 MiB blocks, 64 of them
  PagedAllocator paged(c);
  paged.admit(RequestId{1});
  paged.admit(RequestId{2});
  paged.ensure(RequestId{1}, 60 * 16);
  EXPECT_THROW(paged.ensure(RequestId{2}, 5 * 16), Error);
  // All-or-nothing.
  EXPECT_EQ(paged.free_block_count(), 4u);
  paged.ensure(RequestId{2}, 4 * 16);
  EXPECT_EQ(paged.free_block_count(), 0u);
  paged.release(RequestId{1});
  EXPECT_EQ(paged.free_block_count(), 60u);
  EXPECT_EQ(paged.pool_bytes(), 64 * kMiB);
}

TEST(PagedTest, HeadroomLimitsRunningRequests) {
  PagedConfig c;
  c.activation_headroom_bytes = 2 * 256 * kMiB;
  PagedAllocator paged(c);
  paged.admit(RequestId{1});
  paged.admit(RequestId{2});
  EXPECT_THROW(paged.admit(RequestId{3}), Error);
}

}  // namespace
}  // namespace kvvm
