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

#include "kvvm/device.h"

#include <gtest/gtest.h>

#include <functional>

#include "kvvm/oplog.h"

namespace kvvm {
namespace {

DeviceConfig tiny() {
  DeviceConfig c;
  c.capacity_bytes = 16 * kMiB;
  c.chunk_size_bytes = 2 * kMiB;
  c.weights_bytes = 4 * kMiB;
  c.activation_bytes_per_request = 2 * kMiB;
  return c;
}

void expect_code(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << error_code_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(DeviceTest, ReserveCostsNoPhysicalMemory) {
  Device d(tiny());
  VirtualRange r = d.reserve_address(64 * kMiB);
  EXPECT_EQ(r.page_count, 32u);
  EXPECT_EQ(d.stats().created_bytes, 0u);
  EXPECT_EQ(d.stats().reserved_virtual_bytes, 64 * kMiB);
  EXPECT_EQ(d.stats().free_bytes, 12 * kMiB);
}

TEST(DeviceTest, AddressesAreNeverReused) {
  Device d(tiny());
  VirtualRange a = d.reserve_address(4 * kMiB);
  d.release_address(a);
  VirtualRange b = d.reserve_address(4 * kMiB);
  EXPECT_NE(a.base, b.base);
  EXPECT_FALSE(d.is_reserved(a));
  expect_code(ErrorCode::kUnknownRange, [&] { d.release_address(a); });
}

TEST(DeviceTest, MapUnmapRoundTrip) {
  Device d(tiny());
  VirtualRange r = d.reserve_address(4 * kMiB);
  PhysicalHandle h = d.create_chunk();
  d.map_page(r, 1, h);
  EXPECT_EQ(d.resolve(r, 1), h);
  EXPECT_FALSE(d.resolve(r, 0).has_value());
  EXPECT_EQ(d.map_count(h), 1u);
  EXPECT_EQ(d.unmap_page(r, 1), h);
  EXPECT_EQ(d.map_count(h), 0u);
}

TEST(DeviceTest, SameChunkInTwoRanges) {
  Device d(tiny());
  VirtualRange a = d.reserve_address(2 * kMiB);
  VirtualRange b = d.reserve_address(2 * kMiB);
  PhysicalHandle h = d.create_chunk();
  d.map_page(a, 0, h);
  d.map_page(b, 0, h);
  EXPECT_EQ(d.map_count(h), 2u);
  EXPECT_EQ(d.stats().created_bytes, 2 * kMiB);
  EXPECT_EQ(d.stats().mapped_page_count, 2u);
}

TEST(DeviceTest, IllegalCallsAreRejected) {
  Device d(tiny());
  VirtualRange r = d.reserve_address(4 * kMiB);
  PhysicalHandle h = d.create_chunk();
  d.map_page(r, 0, h);
  expect_code(ErrorCode::kPageAlreadyMapped, [&] { d.map_page(r, 0, h); });
  expect_code(ErrorCode::kPageNotMapped, [&] { d.unmap_page(r, 1); });
  expect_code(ErrorCode::kIndexOutOfRange, [&] { d.map_page(r, 2, h); });
  expect_code(ErrorCode::kRangeStillMapped, [&] { d.release_address(r); });
  expect_code(ErrorCode::kChunkStillMapped, [&] { d.destroy_chunk(h); });
  expect_code(ErrorCode::kInvalidSize, [&] { d.reserve_address(kMiB); });
  expect_code(ErrorCode::kInvalidSize, [&] { d.reserve_address(0); });
  d.unmap_page(r, 0);
  d.destroy_chunk(h);
  expect_code(ErrorCode::kStaleHandle, [&] { d.map_page(r, 0, h); });
  expect_code(ErrorCode::kStaleHandle, [&] { d.destroy_chunk(h); });
}

TEST(DeviceTest, CreateStopsAtCapacity) {
  Device d(tiny());
  // 16 MiB - 4 MiB weights = 6 chunks.
  for (int i = 0; i < 6; ++i) d.create_chunk();
  expect_code(ErrorCode::kDeviceOutOfMemory, [&] { d.create_chunk(); });
  EXPECT_EQ(d.stats().free_bytes, 0u);
}

TEST(DeviceTest, ActivationsShareCapacity) {
  Device d(tiny());
  for (int i = 0; i < 5; ++i) d.create_chunk();
  d.acquire_activation();
  EXPECT_EQ(d.stats().free_bytes, 0u);
  expect_code(ErrorCode::kDeviceOutOfMemory, [&] { d.acquire_activation(); });
  expect_code(ErrorCode::kDeviceOutOfMemory, [&] { d.create_chunk(); });
  d.release_activation();
  expect_code(ErrorCode::kInvalidState, [&] {
    d.release_activation();
    d.release_activation();
  });
}

TEST(DeviceTest, HandleIdsAreNotReused) {
  Device d(tiny());
  PhysicalHandle a = d.create_chunk();
  d.destroy_chunk(a);
  PhysicalHandle b = d.create_chunk();
  EXPECT_NE(a, b);
}

TEST(DeviceTest, CallCountsAndLog) {
  Device d(tiny());
  OpLog log;
  d.attach_log(&log, 32);
  VirtualRange r = d.reserve_address(2 * kMiB);
  PhysicalHandle h = d.create_chunk();
  d.map_page(r, 0, h);
  d.unmap_page(r, 0);
  d.release_address(r);
  d.destroy_chunk(h);
  EXPECT_EQ(d.total_calls(), 6u);
  EXPECT_EQ(d.call_count(DeviceCall::kMap), 1u);
  ASSERT_EQ(log.size(), 7u);
  EXPECT_EQ(log.records()[0].kind, OpKind::kConfig);
  EXPECT_EQ(log.records()[0].tokens_per_chunk, 32u);
  EXPECT_EQ(log.records()[3].kind, OpKind::kMap);
  EXPECT_EQ(log.records()[3].handle, h.id);
}

TEST(DeviceTest, FailedCallsAreNotLogged) {
  Device d(tiny());
  OpLog log;
  d.attach_log(&log);
  VirtualRange r = d.reserve_address(2 * kMiB);
  EXPECT_THROW(d.unmap_page(r, 0), Error);
  EXPECT_EQ(log.size(), 2u);
  EXPECT_EQ(d.call_count(DeviceCall::kUnmap), 0u);
}

TEST(DeviceTest, ConfigValidation) {
  DeviceConfig c = tiny();
  c.chunk_size_bytes = 3 * kMiB;
  EXPECT_THROW(Device{c}, Error);
  c = tiny();
  c.weights_bytes = 32 * kMiB;
  EXPECT_THROW(Device{c}, Error);
}

}  // namespace
}  // namespace kvvm
