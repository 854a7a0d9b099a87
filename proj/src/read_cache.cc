#include "f2kv/read_cache.h"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace f2kv {

namespace {

HybridLogConfig cache_log_config(const ReadCacheConfig& c) {
  // One frame beyond the capacity stays free ahead of the tail; the mutable
  // share applies to the data pages only, leaving at least one read-only page.
  const uint64_t data_pages = std::max<uint64_t>(2, c.capacity_bytes / c.page_size);
  const uint64_t mutable_pages = std::clamp<uint64_t>(
      static_cast<uint64_t>(static_cast<double>(data_pages) * c.mutable_fraction), 1, data_pages - 1);
  HybridLogConfig lc;
  lc.page_size = c.page_size;
  lc.memory_pages = static_cast<uint32_t>(data_pages + 1);
  lc.mutable_fraction = (static_cast<double>(mutable_pages) + 0.5) / static_cast<double>(lc.memory_pages);
  lc.value_size = c.value_size;
  lc.auto_evict = false;
  return lc;
}

}  // namespace

ReadCache::ReadCache(const ReadCacheConfig& config, LightEpoch& epoch, HashIndex& hot_index,
                     const HybridLog& hot_log)
    : epoch_{epoch},
      hot_index_{hot_index},
      hot_log_{hot_log},
      log_{std::make_unique<HybridLog>(cache_log_config(config), epoch, nullptr)} {}

Address ReadCache::allocate() {
  Address a = log_->allocate();
  if (a.is_invalid()) {
    // Page buffer full: reclaim the oldest page and try once more.
    evict_page();
    epoch_.refresh();
    a = log_->allocate();
    if (a.is_invalid()) return a;
  }
  if (a.offset() == log_->first_slot_of_page(log_->page_of(a.offset()))) evict_ahead(log_->page_of(a.offset()));
  return a;
}

void ReadCache::evict_ahead(uint64_t opened_page) {
  // Keep one free frame ahead of the tail.
  const uint64_t pages = log_->memory_pages();
  if (opened_page + 2 <= pages) return;
  const uint64_t target = log_->page_start(opened_page + 2 - pages);
  while (log_->head() < target) {
    if (evict_page() == 0 && log_->head() < target) break;
  }
}

Status ReadCache::try_insert(Key key, std::span<const std::byte> value, Address next_hot, EntryHandle& handle,
                             IndexEntry expected, uint64_t hot_truncs) {
  Address a = allocate();
  if (a.is_invalid()) {
    insert_aborts_.fetch_add(1, std::memory_order_relaxed);
    return Status::Aborted;
  }
  RecordRef r = log_->record_at(a);
  r.set_key(key);
  std::memcpy(r.value().data(), value.data(), std::min(value.size(), r.value().size()));
  // Published only after the index swap and the freshness checks succeed.
  r.set_header(RecordHeader::make(next_hot, false, true));

  const Address cached = Address::read_cache(a.offset());
  const IndexEntry desired = expected.with_address(cached);
  if (HashIndex::try_update(handle, expected, desired) != Status::Ok) {
    insert_aborts_.fetch_add(1, std::memory_order_relaxed);
    return Status::Aborted;
  }
  if (a.offset() < evicting_until_.load() || hot_log_.num_truncs() != hot_truncs) {
    HashIndex::try_update(handle, desired, expected);
    insert_aborts_.fetch_add(1, std::memory_order_relaxed);
    return Status::Aborted;
  }
  r.clear_invalid();
  inserts_.fetch_add(1, std::memory_order_relaxed);
  return Status::Ok;
}

Status ReadCache::second_chance(Address cache_address, EntryHandle& handle) {
  const uint64_t old = cache_address.offset();
  if (old >= log_->read_only()) return Status::Ok;
  RecordRef src = log_->record_at(Address::log(old));
  RecordHeader h = src.header();
  if (h.invalid()) return Status::Aborted;
  Address a = log_->allocate();
  if (a.is_invalid()) return Status::Aborted;
  if (a.offset() == log_->first_slot_of_page(log_->page_of(a.offset()))) evict_ahead(log_->page_of(a.offset()));
  RecordRef dst = log_->record_at(a);
  std::memcpy(dst.data() + RecordLayout::kHeaderSize, src.data() + RecordLayout::kHeaderSize,
              log_->record_size() - RecordLayout::kHeaderSize);
  dst.set_header(RecordHeader::make(h.previous(), false, false));

  IndexEntry expected = handle.entry.with_address(cache_address);
  if (handle.entry.address() != cache_address ||
      HashIndex::try_update(handle, expected, expected.with_address(Address::read_cache(a.offset()))) != Status::Ok) {
    dst.mark_invalid();
    return Status::Aborted;
  }
  src.mark_invalid();
  second_chances_.fetch_add(1, std::memory_order_relaxed);
  return Status::Ok;
}

void ReadCache::invalidate_for(Key key, IndexEntry entry) {
  Address a = entry.address();
  if (!a.in_read_cache()) return;
  RecordRef r = record(a);
  if (r.key() == key) r.mark_invalid();
}

RecordRef ReadCache::lookup(Key key, IndexEntry entry) const {
  Address a = entry.address();
  if (!a.in_read_cache()) return {};
  RecordRef r = record(a);
  if (r.header().invalid() || r.key() != key) return {};
  return r;
}

size_t ReadCache::evict_page() {
  std::unique_lock lock{evict_mutex_, std::try_to_lock};
  if (!lock.owns_lock()) return 0;
  EpochGuard guard{epoch_};
  const uint64_t head = log_->head();
  const uint64_t end = log_->page_start(log_->page_of(head) + 1);
  if (end > log_->safe_read_only()) return 0;

  evicting_until_.store(end);
  size_t processed = 0;
  for (uint64_t addr = log_->slot_at_or_after(head); addr < end; addr = log_->next_slot(addr)) {
    // Invalid records are checked too: an insert in flight leaves its record
    // invalid while already linked from the index.
    RecordRef r = log_->record_at(Address::log(addr));
    EntryHandle e = hot_index_.find_entry(hash_key(r.key()));
    ++processed;
    if (!e.found() || e.address() != Address::read_cache(addr)) continue;
    Address prev = r.header().previous();
    IndexEntry desired = prev.is_valid() ? e.entry.with_address(prev) : IndexEntry{};
    HashIndex::try_update(e, e.entry, desired);
  }
  log_->shift_head(end);
  log_->truncate_begin(end);
  evicted_pages_.fetch_add(1, std::memory_order_relaxed);
  evicted_records_.fetch_add(processed, std::memory_order_relaxed);
  return std::max<size_t>(processed, 1);
}

ReadCacheStats ReadCache::stats() const {
  return ReadCacheStats{inserts_.load(), insert_aborts_.load(), second_chances_.load(), evicted_pages_.load(),
                        evicted_records_.load()};
}

}  // namespace f2kv
