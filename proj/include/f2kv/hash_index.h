#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

#include "f2kv/address.h"
#include "f2kv/status.h"

namespace f2kv {

/// Packed 64-bit index entry.
///
///   bits  0..47  address (with ReadCacheFlag)
///   bits 48..61  tag: extra key-hash bits disambiguating keys in one bucket
///   bit   62     tentative (claimed but not yet visible)
///   bit   63     occupied; the all-zero word is a free slot
struct IndexEntry {
  static constexpr uint32_t kTagBits = 14;
  static constexpr uint32_t kTagShift = 48;
  static constexpr uint64_t kTagMask = (1ULL << kTagBits) - 1;
  static constexpr uint64_t kTentativeBit = 1ULL << 62;
  static constexpr uint64_t kOccupiedBit = 1ULL << 63;

  uint64_t word = 0;

  static constexpr IndexEntry make(Address address, uint16_t tag) {
    return IndexEntry{kOccupiedBit | (static_cast<uint64_t>(tag & kTagMask) << kTagShift) | address.control()};
  }

  constexpr Address address() const { return Address{word & Address::kMask}; }
  constexpr uint16_t tag() const { return static_cast<uint16_t>((word >> kTagShift) & kTagMask); }
  constexpr bool tentative() const { return (word & kTentativeBit) != 0; }
  constexpr bool occupied() const { return (word & kOccupiedBit) != 0; }
  constexpr bool free() const { return word == 0; }
  constexpr IndexEntry with_address(Address a) const {
    return IndexEntry{(word & ~Address::kMask) | a.control()};
  }
  friend constexpr bool operator==(IndexEntry a, IndexEntry b) { return a.word == b.word; }
};

/// A located index slot plus the entry value observed there.
struct EntryHandle {
  std::atomic<uint64_t>* slot = nullptr;
  IndexEntry entry{};

  bool found() const { return slot != nullptr; }
  Address address() const { return entry.address(); }
  /// Re-reads the slot into `entry`.
  IndexEntry reload() {
    entry = IndexEntry{slot->load()};
    return entry;
  }
};

struct HashIndexConfig {
  /// Power of two.
  uint64_t num_buckets = 1ULL << 20;
  /// Overflow bucket pool; default (UINT64_MAX) means num_buckets / 8.
  uint64_t overflow_buckets = UINT64_MAX;
  /// Position of the tag bits within the hash.
  uint32_t tag_shift = 48;
};

/// Latch-free hash table of cache-line buckets. Bucket = low bits of the hash,
/// tag = 14 further bits. Each bucket holds seven entries; the eighth word
/// links an overflow bucket. Entries are only ever changed by single-word
/// compare-exchange.
class HashIndex {
 public:
  static constexpr uint32_t kSlotsPerBucket = 8;
  static constexpr uint32_t kEntrySlots = 7;

  explicit HashIndex(const HashIndexConfig& config);
  HashIndex(const HashIndex&) = delete;
  HashIndex& operator=(const HashIndex&) = delete;

  uint64_t num_buckets() const { return num_buckets_; }
  uint64_t bucket_of(uint64_t hash) const { return hash & (num_buckets_ - 1); }
  uint16_t tag_of(uint64_t hash) const {
    return static_cast<uint16_t>((hash >> tag_shift_) & IndexEntry::kTagMask);
  }

  /// Matching visible entry, or a handle with found() == false.
  EntryHandle find_entry(uint64_t hash) const;
  /// Existing entry, or a newly claimed one with an INVALID address.
  /// Throws CapacityError when the bucket chain and overflow pool are full.
  EntryHandle find_or_create_entry(uint64_t hash);
  /// Compare-exchanges the slot from `expected` to `desired`. On Aborted,
  /// `handle.entry` holds the value found.
  static Status try_update(EntryHandle& handle, IndexEntry expected, IndexEntry desired);

  /// Frees every log-address entry whose address is below `min_valid`.
  /// Read-cache entries are left alone. Returns the number freed.
  uint64_t scrub_stale_entries(uint64_t min_valid);

  /// Visits every visible entry.
  void for_each(const std::function<void(EntryHandle)>& fn) const;
  uint64_t count_entries() const;

  uint64_t size_bytes() const { return (num_buckets_ + overflow_capacity_) * sizeof(Bucket); }
  uint64_t overflow_buckets_used() const;

 private:
  struct alignas(64) Bucket {
    std::atomic<uint64_t> slots[kSlotsPerBucket];
  };
  static_assert(sizeof(Bucket) == 64);

  Bucket* overflow_next(const Bucket* b) const;
  Bucket* grow_chain(Bucket* last);
  template <typename Fn>
  void for_each_slot(uint64_t bucket, Fn&& fn) const;

  const uint64_t num_buckets_;
  const uint64_t overflow_capacity_;
  const uint32_t tag_shift_;
  std::unique_ptr<Bucket[]> buckets_;
  std::unique_ptr<Bucket[]> overflow_;
  std::atomic<uint64_t> overflow_next_free_{0};
  std::mutex spare_mutex_;
  std::vector<uint64_t> spare_overflow_;
};

}  // namespace f2kv
