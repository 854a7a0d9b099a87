#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>

#include "f2kv/epoch.h"
#include "f2kv/hash_index.h"
#include "f2kv/hybrid_log.h"
#include "f2kv/record.h"

namespace f2kv {

struct ReadCacheConfig {
  uint64_t capacity_bytes = 512ULL << 20;
  uint64_t page_size = 2ULL << 20;
  double mutable_fraction = 0.9;
  uint32_t value_size = 108;
};

struct ReadCacheStats {
  uint64_t inserts = 0;
  uint64_t insert_aborts = 0;
  uint64_t second_chances = 0;
  uint64_t evicted_pages = 0;
  uint64_t evicted_records = 0;
};

/// In-memory replicas of disk-resident records, spliced in front of the hot
/// log in hot-index chains. A cache record is always the chain head and its
/// previous address points into the hot log (or is INVALID for chains that
/// live only in the cold log). Records age through a FIFO log; a hit in the
/// read-only part copies the record back to the tail.
class ReadCache {
 public:
  ReadCache(const ReadCacheConfig& config, LightEpoch& epoch, HashIndex& hot_index, const HybridLog& hot_log);

  /// Caches `value` for `key` by swapping the index entry from `expected` to
  /// the new cache record. `hot_truncs` is the hot log's truncation count
  /// observed when the read began; any hot truncation since then aborts the
  /// insert. Caller must be epoch-protected.
  Status try_insert(Key key, std::span<const std::byte> value, Address next_hot, EntryHandle& handle,
                    IndexEntry expected, uint64_t hot_truncs);

  /// Moves a read-only-region record to the tail. No-op if already mutable.
  Status second_chance(Address cache_address, EntryHandle& handle);

  /// Invalidates the chain-head cache record if it holds `key`.
  void invalidate_for(Key key, IndexEntry entry);

  /// Valid cache record for `key` at the head of `entry`'s chain, if any.
  RecordRef lookup(Key key, IndexEntry entry) const;
  /// Record bytes behind a read-cache address (caller is protected).
  RecordRef record(Address cache_address) const { return log_->record_at(Address::log(cache_address.offset())); }
  /// True if the cache record is in the read-only part of the cache log.
  bool in_read_only_region(Address cache_address) const {
    uint64_t a = cache_address.offset();
    return a >= log_->head() && a < log_->read_only();
  }

  /// Re-routes every index entry that points into the oldest page, then
  /// reclaims it. Returns records processed (0 if nothing could be evicted).
  size_t evict_page();

  ReadCacheStats stats() const;
  const HybridLog& log() const { return *log_; }
  uint64_t capacity_bytes() const { return log_->page_size() * (log_->memory_pages() - 1); }
  /// Page buffer bytes, including the frame kept free ahead of the tail.
  uint64_t memory_bytes() const { return log_->page_size() * log_->memory_pages(); }

 private:
  Address allocate();
  void evict_ahead(uint64_t opened_page);

  LightEpoch& epoch_;
  HashIndex& hot_index_;
  const HybridLog& hot_log_;
  std::unique_ptr<HybridLog> log_;
  std::mutex evict_mutex_;
  std::atomic<uint64_t> evicting_until_{0};

  std::atomic<uint64_t> inserts_{0};
  std::atomic<uint64_t> insert_aborts_{0};
  std::atomic<uint64_t> second_chances_{0};
  std::atomic<uint64_t> evicted_pages_{0};
  std::atomic<uint64_t> evicted_records_{0};
};

}  // namespace f2kv
