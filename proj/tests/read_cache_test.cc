#include <gtest/gtest.h>

#include <unordered_set>
#include <vector>

#include "f2kv/hash_index.h"
#include "f2kv/key_hash.h"
#include "f2kv/read_cache.h"

namespace f2kv {
namespace {

struct Fixture {
  LightEpoch epoch;
  MemoryDevice device;
  HybridLog hot_log;
  HashIndex index;
  ReadCache cache;

  Fixture()
      : hot_log{hot_config(), epoch, &device},
        index{index_config()},
        cache{cache_config(), epoch, index, hot_log} {}

  static HybridLogConfig hot_config() {
    HybridLogConfig c;
    c.page_size = 64 << 10;
    c.memory_pages = 4;
    c.value_size = 8;
    return c;
  }
  static HashIndexConfig index_config() {
    HashIndexConfig c;
    c.num_buckets = 1 << 16;
    return c;
  }
  static ReadCacheConfig cache_config() {
    ReadCacheConfig c;
    c.capacity_bytes = 4 * (64 << 10);
    c.page_size = 64 << 10;
    c.value_size = 8;
    return c;
  }

  Status insert(Key key, uint64_t value, Address next_hot = Address::invalid()) {
    EntryHandle h = index.find_or_create_entry(hash_key(key));
    if (next_hot.is_valid() && h.address().is_invalid()) {
      HashIndex::try_update(h, h.entry, h.entry.with_address(next_hot));
    }
    std::vector<std::byte> v(8);
    std::memcpy(v.data(), &value, 8);
    return cache.try_insert(key, v, next_hot, h, h.entry, hot_log.num_truncs());
  }
};

uint64_t value_of(RecordRef r) {
  uint64_t v = 0;
  std::memcpy(&v, r.value().data(), 8);
  return v;
}

TEST(ReadCache, InsertedRecordHeadsTheChain) {
  Fixture f;
  EpochGuard g{f.epoch};
  ASSERT_EQ(f.insert(5, 50, Address::log(4096)), Status::Ok);
  EntryHandle h = f.index.find_entry(hash_key(5));
  ASSERT_TRUE(h.address().in_read_cache());
  RecordRef r = f.cache.lookup(5, h.entry);
  ASSERT_TRUE(r);
  EXPECT_EQ(value_of(r), 50u);
  EXPECT_EQ(r.header().previous(), Address::log(4096));
  EXPECT_FALSE(f.cache.lookup(6, h.entry));
}

TEST(ReadCache, InsertAbortsAfterHotTruncation) {
  Fixture f;
  EpochGuard g{f.epoch};
  EntryHandle h = f.index.find_or_create_entry(hash_key(9));
  const IndexEntry before = h.entry;
  std::vector<std::byte> v(8);
  EXPECT_EQ(f.cache.try_insert(9, v, Address::invalid(), h, h.entry, f.hot_log.num_truncs() + 1), Status::Aborted);
  EXPECT_EQ(f.index.find_entry(hash_key(9)).entry, before);
  EXPECT_EQ(f.cache.stats().insert_aborts, 1u);
}

TEST(ReadCache, InsertAbortsWhenEntryMoved) {
  Fixture f;
  EpochGuard g{f.epoch};
  EntryHandle h = f.index.find_or_create_entry(hash_key(9));
  const IndexEntry seen = h.entry;
  EntryHandle other = h;
  HashIndex::try_update(other, seen, seen.with_address(Address::log(8192)));
  std::vector<std::byte> v(8);
  EXPECT_EQ(f.cache.try_insert(9, v, Address::invalid(), h, seen, f.hot_log.num_truncs()), Status::Aborted);
  EXPECT_EQ(f.index.find_entry(hash_key(9)).address(), Address::log(8192));
}

TEST(ReadCache, InvalidateHidesRecord) {
  Fixture f;
  EpochGuard g{f.epoch};
  ASSERT_EQ(f.insert(5, 50), Status::Ok);
  EntryHandle h = f.index.find_entry(hash_key(5));
  f.cache.invalidate_for(5, h.entry);
  EXPECT_FALSE(f.cache.lookup(5, h.entry));
}

TEST(ReadCache, SecondChanceMovesRecordToTail) {
  Fixture f;
  EpochGuard g{f.epoch};
  ASSERT_EQ(f.insert(1, 11), Status::Ok);
  const Address first = f.index.find_entry(hash_key(1)).address();
  for (Key k = 100; !f.cache.in_read_only_region(first); ++k) {
    ASSERT_EQ(f.insert(k, k), Status::Ok);
    f.epoch.refresh();
  }
  EntryHandle h = f.index.find_entry(hash_key(1));
  ASSERT_EQ(f.cache.second_chance(first, h), Status::Ok);
  EntryHandle moved = f.index.find_entry(hash_key(1));
  EXPECT_NE(moved.address(), first);
  EXPECT_TRUE(moved.address().in_read_cache());
  EXPECT_EQ(value_of(f.cache.lookup(1, moved.entry)), 11u);
  EXPECT_TRUE(f.cache.record(first).header().invalid());
}

// Property: after any amount of eviction, every entry either heads a valid
// cache record for a key hashing there, or points at that key's hot part.
TEST(ReadCacheProperty, EvictionRestoresHotChains) {
  Fixture f;
  EpochGuard g{f.epoch};
  constexpr Key kKeys = 40000;
  // Keys whose (bucket, tag) pairs are unique, so each owns its entry.
  std::vector<bool> usable(kKeys);
  {
    std::unordered_set<uint64_t> seen;
    for (Key k = 0; k < kKeys; ++k) {
      uint64_t h = hash_key(k);
      usable[k] = seen.insert(f.index.bucket_of(h) << 16 | f.index.tag_of(h)).second;
    }
  }
  for (Key k = 0; k < kKeys; ++k) {
    if (!usable[k]) continue;
    Address hot = k % 2 == 0 ? Address::log(64 + 8 * k) : Address::invalid();
    f.insert(k, k * 10, hot);
    if (k % 512 == 0) f.epoch.refresh();
  }
  EXPECT_GT(f.cache.stats().evicted_pages, 0u);
  uint64_t cached = 0;
  for (Key k = 0; k < kKeys; ++k) {
    if (!usable[k]) continue;
    EntryHandle h = f.index.find_entry(hash_key(k));
    if (k % 2 == 1 && !h.found()) continue;  // cold-only chain fully evicted
    ASSERT_TRUE(h.found()) << k;
    if (h.address().in_read_cache()) {
      ASSERT_GE(h.address().offset(), f.cache.log().head()) << k;
      RecordRef r = f.cache.lookup(k, h.entry);
      ASSERT_TRUE(r) << k;
      EXPECT_EQ(value_of(r), k * 10);
      ++cached;
    } else {
      EXPECT_EQ(h.address(), Address::log(64 + 8 * k)) << k;
    }
  }
  EXPECT_GT(cached, 0u);
  EXPECT_LE(cached * 24, f.cache.capacity_bytes());
}

}  // namespace
}  // namespace f2kv
