#include <gtest/gtest.h>

#include <random>
#include <thread>
#include <unordered_map>
#include <vector>

#include "f2kv/cold_index.h"
#include "f2kv/key_hash.h"

namespace f2kv {
namespace {

ColdIndexConfig small_config(uint64_t chunks = 1 << 8) {
  ColdIndexConfig c;
  c.num_chunks = chunks;
  c.chunk_bytes = 256;
  c.chunk_log_page_size = 64 << 10;
  c.chunk_log_memory_pages = 3;
  return c;
}

uint64_t slot_of(const ColdIndex& index, uint64_t hash) {
  ChunkKey k = index.chunk_key(hash);
  return k.chunk_id * index.entries_per_chunk() + k.offset;
}

/// Hashes of `count` keys that map to pairwise distinct index slots.
std::vector<uint64_t> distinct_slot_hashes(const ColdIndex& index, size_t count) {
  std::vector<uint64_t> out;
  std::unordered_map<uint64_t, bool> used;
  for (uint64_t k = 0; out.size() < count; ++k) {
    uint64_t h = hash_key(k);
    if (used.emplace(slot_of(index, h), true).second) out.push_back(h);
  }
  return out;
}

Device::Options segments() {
  Device::Options o;
  o.segment_size = 1 << 18;
  return o;
}

TEST(ColdIndex, ChunkKeyUsesLowBitsThenOffsetBits) {
  LightEpoch epoch;
  MemoryDevice device{segments()};
  ColdIndex index{small_config(1 << 8), epoch, device};
  EXPECT_EQ(index.entries_per_chunk(), 32u);
  const uint64_t h = (uint64_t{0b10110} << 8) | 0x3C;
  ChunkKey k = index.chunk_key(h);
  EXPECT_EQ(k.chunk_id, 0x3Cu);
  EXPECT_EQ(k.offset, 0b10110u);
}

TEST(ColdIndex, ModifyIsGuardedByExpectedValue) {
  LightEpoch epoch;
  MemoryDevice device{segments()};
  ColdIndex index{small_config(), epoch, device};
  Address out;
  EXPECT_EQ(index.find_entry(42, out), Status::NotFound);
  ASSERT_EQ(index.modify_entry(42, Address::invalid(), Address::log(640)), Status::Ok);
  ASSERT_EQ(index.find_entry(42, out), Status::Ok);
  EXPECT_EQ(out, Address::log(640));

  Address current;
  EXPECT_EQ(index.modify_entry(42, Address::invalid(), Address::log(1280), &current), Status::Aborted);
  EXPECT_EQ(current, Address::log(640));
  EXPECT_EQ(index.modify_entry(42, Address::log(640), Address::log(1280)), Status::Ok);
  ASSERT_EQ(index.find_entry(42, out), Status::Ok);
  EXPECT_EQ(out, Address::log(1280));
}

TEST(ColdIndex, DiskResidentLookupCostsOneRead) {
  LightEpoch epoch;
  MemoryDevice device{segments()};
  ColdIndex index{small_config(1 << 10), epoch, device};
  std::unordered_map<uint64_t, Address> expected;
  uint64_t i = 0;
  for (uint64_t h : distinct_slot_hashes(index, 5000)) {
    Address a = Address::log(64 + 64 * i++);
    ASSERT_EQ(index.modify_entry(h, Address::invalid(), a), Status::Ok);
    expected[h] = a;
  }
  index.chunk_log().evict_until(index.chunk_log().tail());
  for (auto [h, a] : expected) {
    const uint64_t before = device.stats().read_ops;
    Address out;
    ASSERT_EQ(index.find_entry(h, out), Status::Ok);
    EXPECT_EQ(out, a);
    EXPECT_EQ(device.stats().read_ops - before, 1u);
  }
}

TEST(ColdIndex, ScrubClearsEntriesBelowThreshold) {
  LightEpoch epoch;
  MemoryDevice device{segments()};
  ColdIndex index{small_config(), epoch, device};
  const std::vector<uint64_t> hashes = distinct_slot_hashes(index, 200);
  for (uint64_t k = 0; k < 200; ++k) {
    ASSERT_EQ(index.modify_entry(hashes[k], Address::invalid(), Address::log(64 + k * 4096)), Status::Ok);
  }
  index.chunk_log().evict_until(index.chunk_log().tail() / 2);
  const uint64_t min_valid = 64 + 100 * 4096;
  EXPECT_EQ(index.scrub(min_valid), 100u);
  for (uint64_t k = 0; k < 200; ++k) {
    Address out;
    Status s = index.find_entry(hashes[k], out);
    if (k < 100) {
      EXPECT_EQ(s, Status::NotFound) << k;
    } else {
      ASSERT_EQ(s, Status::Ok) << k;
      EXPECT_EQ(out, Address::log(64 + k * 4096));
    }
  }
}

TEST(ColdIndex, ChunkLogCompactionPreservesEntries) {
  LightEpoch epoch;
  MemoryDevice device{segments()};
  ColdIndex index{small_config(1 << 6), epoch, device};
  std::mt19937_64 rng{5};
  std::unordered_map<uint64_t, Address> model;
  for (int i = 0; i < 20000; ++i) {
    uint64_t h = hash_key(rng() % 1500);
    Address cur;
    Address prev = index.find_entry(h, cur) == Status::Ok ? cur : Address::invalid();
    Address a = Address::log(64 + 8 * static_cast<uint64_t>(i));
    ASSERT_EQ(index.modify_entry(h, prev, a), Status::Ok);
    model[slot_of(index, h)] = a;
  }
  std::unordered_map<uint64_t, uint64_t> hash_of_slot;
  for (uint64_t k = 0; k < 1500; ++k) hash_of_slot[slot_of(index, hash_key(k))] = hash_key(k);
  HybridLog& log = index.chunk_log();
  log.evict_until(log.tail());
  const uint64_t until = log.head();
  ASSERT_GT(until, log.begin());
  index.compact_chunk_log(until);
  EXPECT_EQ(log.begin(), until);
  for (auto [slot, a] : model) {
    Address out;
    ASSERT_EQ(index.find_entry(hash_of_slot[slot], out), Status::Ok);
    EXPECT_EQ(out, a);
  }
}

TEST(ColdIndex, InMemoryFootprintIsSixteenBytesPerChunk) {
  LightEpoch epoch;
  MemoryDevice device{segments()};
  ColdIndex index{small_config(1 << 14), epoch, device};
  EXPECT_EQ(index.in_memory_bytes(), (1u << 14) * 16u);
}

// Property: concurrent guarded edits of distinct keys never lose an update.
TEST(ColdIndexProperty, ConcurrentEditsAreNotLost) {
  LightEpoch epoch;
  MemoryDevice device{segments()};
  ColdIndex index{small_config(1 << 4), epoch, device};
  constexpr int kThreads = 4;
  constexpr uint64_t kKeys = 400;
  const std::vector<uint64_t> hashes = distinct_slot_hashes(index, kKeys);
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      for (int round = 0; round < 5; ++round) {
        for (uint64_t k = t; k < kKeys; k += kThreads) {
          uint64_t h = hashes[k];
          Address cur;
          Address prev = index.find_entry(h, cur) == Status::Ok ? cur : Address::invalid();
          Address next = Address::log(64 + (k * 8 + round) * 64);
          ASSERT_EQ(index.modify_entry(h, prev, next), Status::Ok);
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  for (uint64_t k = 0; k < kKeys; ++k) {
    Address out;
    ASSERT_EQ(index.find_entry(hashes[k], out), Status::Ok);
    EXPECT_EQ(out, Address::log(64 + (k * 8 + 4) * 64));
  }
}

}  // namespace
}  // namespace f2kv
