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

#include "kvvm/metrics.h"

#include <gtest/gtest.h>

#include <random>

#include "kvvm/baselines.h"
#include "kvvm/vts.h"
#include "oracles.h"

namespace kvvm {
namespace {

using testing::kv_bytes_per_token;

TEST(MetricsTest, BytesPerToken) {
  EXPECT_EQ(bytes_per_token(ModelGeometry{}), kv_bytes_per_token(32, 4, 128, 2));
  EXPECT_EQ(bytes_per_token(ModelGeometry{}), 65536u);
  EXPECT_EQ(bytes_per_token(ModelGeometry{1, 1, 1, 1}), 2u);
  EXPECT_THROW(bytes_per_token(ModelGeometry{0, 1, 1, 1}), Error);
}

TEST(MetricsTest, TokensPerChunk) {
  EXPECT_EQ(tokens_per_chunk(2 * kMiB, 65536), 32u);
  EXPECT_THROW(tokens_per_chunk(100000, 65536), Error);
  EXPECT_THROW(tokens_per_chunk(32 * kKiB, 65536), Error);
}

TEST(MetricsTest, IdleVTensorSnapshot) {
  VTensorManager m{ManagerConfig{}};
  MemoryBreakdown b = snapshot(m, 65536).breakdown;
  EXPECT_EQ(b.kv_used, 0u);
  EXPECT_EQ(b.kv_allocated, 0u);
  EXPECT_EQ(b.reserved, 0u);
  EXPECT_EQ(b.free, 80 * kGiB - 12 * kGiB);
  EXPECT_TRUE(b.sums_to_capacity());
}

TEST(MetricsTest, VTensorCategories) {
  VTensorManager m{ManagerConfig{}};
  VTensorScheduler& v = m.vts();
  std::vector<TokenId> a(300, 1);
  v.create(RequestId{1}, 300);  // 10 chunks
  v.extend(RequestId{1}, 300 + 32);
  v.commit(RequestId{1}, a);
  MemorySample s = snapshot(m, 65536);
  const MemoryBreakdown& b = s.breakdown;
  EXPECT_EQ(b.kv_used, 300 * 65536u);
  EXPECT_EQ(b.kv_allocated, 11 * 2 * kMiB);
  // Chunk 10 holds 12 tokens, chunk 11 nothing.
  EXPECT_EQ(b.fragmentation, 20 * 65536u);
  EXPECT_EQ(b.lookahead, 2 * kMiB);
  EXPECT_EQ(b.pinned, 0u);
  EXPECT_EQ(s.mapped_bytes, 11 * 2 * kMiB);
  EXPECT_TRUE(b.sums_to_capacity());

  v.prefix_record(RequestId{1});
  v.release(RequestId{1});
  MemoryBreakdown b2 = snapshot(m, 65536).breakdown;
  EXPECT_EQ(b2.pinned, 9 * 2 * kMiB);
  EXPECT_EQ(b2.retained, 2 * 2 * kMiB);
  EXPECT_EQ(b2.kv_used, 0u);
  EXPECT_TRUE(b2.sums_to_capacity());
}

TEST(MetricsTest, SharedChunksCountedOnce) {
  VTensorManager m{ManagerConfig{}};
  VTensorScheduler& v = m.vts();
  std::vector<TokenId> p(256, 3);
  v.create(RequestId{1}, 256);
  v.commit(RequestId{1}, p);
  v.prefix_record(RequestId{1});
  p.push_back(4);
  v.prefix_match(RequestId{2}, p);
  std::vector<TokenId> last{4};
  v.commit(RequestId{2}, last);
  MemoryBreakdown b = snapshot(m, 65536).breakdown;
  EXPECT_EQ(b.kv_used, 257 * 65536u);
  EXPECT_TRUE(b.sums_to_capacity());
}

TEST(MetricsTest, VTensorFragmentationBound) {
  std::mt19937_64 rng(5);
  VTensorManager m{ManagerConfig{}};
  VTensorScheduler& v = m.vts();
  const uint64_t n = 16;
  for (uint64_t r = 0; r < n; ++r) {
    const uint64_t len = 256 + rng() % 3000;
    v.create(RequestId{r}, len);
    v.extend(RequestId{r}, len + 32);
    v.commit(RequestId{r}, std::vector<TokenId>(len, 0));
  }
  MemoryBreakdown b = snapshot(m, 65536).breakdown;
  EXPECT_LT(b.fragmentation, n * 2 * kMiB);
  EXPECT_LE(b.kv_allocated - b.kv_used - b.retained - b.pinned,
            n * 2 * 2 * kMiB);
}

TEST(MetricsTest, PagedStartupIsAllReserved) {
  PagedConfig c;
  c.activation_headroom_bytes = 4 * 256 * kMiB;
  PagedAllocator paged(c);
  MemorySample s = snapshot(paged);
  const MemoryBreakdown& b = s.breakdown;
  EXPECT_EQ(b.kv_allocated, 80 * kGiB - 12 * kGiB - kGiB);
  EXPECT_EQ(b.reserved, b.kv_allocated);
  EXPECT_EQ(b.free, kGiB);
  EXPECT_EQ(s.created_bytes, b.kv_allocated);
  EXPECT_TRUE(b.sums_to_capacity());
}

TEST(MetricsTest, NativeFragmentationIsExact) {
  NativeConfig c;
  NativeAllocator native(c);
  const std::vector<uint64_t> lens{512, 1000, 4096, 3333};
  uint64_t sum = 0;
  for (size_t i = 0; i < lens.size(); ++i) {
    native.admit(RequestId{i});
    native.commit(RequestId{i}, lens[i]);
    sum += lens[i];
  }
  Ratio r = native_fragmentation(native);
  // 1 - sum / (4 * 4096) as a fraction over the same denominator.
  EXPECT_EQ(r.den, 4u * 4096);
  EXPECT_EQ(r.num, 4u * 4096 - sum);
  MemoryBreakdown b = snapshot(native).breakdown;
  EXPECT_EQ(b.fragmentation, (4 * 4096 - sum) * 65536);
  EXPECT_TRUE(b.sums_to_capacity());
}

TEST(MetricsTest, FlexibilitySummary) {
  std::vector<StepSample> steps(4);
  for (size_t i = 0; i < steps.size(); ++i) {
    steps[i].memory.breakdown.capacity = 100;
    steps[i].memory.breakdown.free = 10 * (i + 1);
    steps[i].memory.breakdown.kv_allocated = 7 * i;
  }
  steps[2].stalls = 3;
  steps[3].preemptions = 2;
  FlexibilitySummary s = flexibility_summary(steps);
  EXPECT_DOUBLE_EQ(s.mean_free_fraction, 0.25);
  EXPECT_EQ(s.peak_kv_allocated, 21u);
  EXPECT_DOUBLE_EQ(s.stall_rate, 0.25);
  EXPECT_EQ(s.preemption_count, 2u);
  EXPECT_EQ(flexibility_summary({}).peak_kv_allocated, 0u);
}

TEST(MetricsTest, ShortPromptHoldsInitialAllocation) {
  VTensorManager m{ManagerConfig{}};
  m.vts().create(RequestId{1}, 16);
  m.vts().commit(RequestId{1}, std::vector<TokenId>(16, 3));
  const MemoryBreakdown b = snapshot(m, 65536).breakdown;
  // 256 initial tokens: one partly filled chunk and seven empty ones, more
  // than one chunk plus one lookahead chunk of slack.
  EXPECT_EQ(b.kv_allocated, 8 * 2 * kMiB);
  EXPECT_EQ(b.fragmentation, 16 * 65536u);
  EXPECT_EQ(b.lookahead, 7 * 2 * kMiB);
  EXPECT_GT(b.kv_allocated - b.kv_used, 2 * 2 * kMiB);
}

}  // namespace
}  // namespace kvvm
