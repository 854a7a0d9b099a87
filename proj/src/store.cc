#include "f2kv/store.h"

#include <algorithm>
#include <cassert>
#include <cstring>
#include <filesystem>
#include <vector>

namespace f2kv {

enum class Store::Counter : uint32_t {
  Reads,
  ReadHits,
  ReadCacheHits,
  Upserts,
  InPlace,
  Deletes,
  Rmws,
  UpsertRetries,
  RmwRetries,
  FalseAbsenceRescans,
  HotCompactions,
  ColdCompactions,
  ChunkCompactions,
  RecordsCompacted,
};

struct Store::Found {
  enum class Kind : uint8_t { None, Memory, Disk };
  Kind kind = Kind::None;
  Address address;
  RecordRef ref;
  RecordCopy copy;
  bool stale = false;
  bool error = false;

  bool found() const { return kind != Kind::None; }
  RecordHeader header() const { return kind == Kind::Memory ? ref.header() : copy.header(); }
};

namespace {

void yield_protected(LightEpoch& epoch) {
  if (epoch.is_protected()) {
    epoch.refresh();
  } else {
    epoch.drain();
  }
  std::this_thread::yield();
}

std::unique_ptr<Device> make_device(const StoreConfig& config, const std::string& name, uint32_t value_size,
                                    uint64_t page_size) {
  if (config.directory.empty()) return std::make_unique<MemoryDevice>(config.device_options);
  std::filesystem::create_directories(config.directory);
  std::string prefix = (std::filesystem::path{config.directory} / name).string();
  LogMeta{static_cast<uint32_t>(sizeof(Key)), value_size, page_size}.write(prefix + ".meta");
  return std::make_unique<FileDevice>(prefix, config.device_options, config.direct_io);
}

/// Streams [from, until) of a log's stable region through a fixed ring of
/// page frames. Worker threads claim records with a per-frame cursor; once
/// every claimed record of a frame is processed the frame is refilled with
/// the next page from an epoch trigger action.
class FrameScanner {
 public:
  FrameScanner(HybridLog& log, LightEpoch& epoch, uint64_t from, uint64_t until, uint32_t frames)
      : log_{log},
        epoch_{epoch},
        from_{from},
        until_{until},
        first_page_{log.page_of(from)},
        last_page_{log.page_of(until - 1)},
        rs_{log.record_size()} {
    uint64_t pages = last_page_ - first_page_ + 1;
    uint32_t n = static_cast<uint32_t>(std::min<uint64_t>(std::max<uint32_t>(frames, 1), pages));
    const size_t align = std::max<size_t>(log.device()->sector_size(), 4096);
    for (uint32_t i = 0; i < n; ++i) {
      frames_.push_back(std::make_unique<Frame>());
      frames_.back()->buffer = AlignedBuffer(log.page_size(), align);
    }
    active_.store(first_page_);
    for (uint64_t p = first_page_; p < first_page_ + n; ++p) load(p);
  }

  ~FrameScanner() {
    while (outstanding_.load() > 0) yield_protected(epoch_);
  }

  uint64_t frame_bytes() const { return frames_.size() * log_.page_size(); }
  bool failed() const { return failed_.load(); }

  template <typename Fn>
  void run(Fn&& fn) {
    for (;;) {
      uint64_t p = active_.load();
      if (p > last_page_) return;
      Frame& f = frame(p);
      uint64_t loaded = f.loaded_page.load();
      if (loaded != p) {
        if (loaded != kNone && loaded > p) active_.compare_exchange_strong(p, p + 1);
        yield_protected(epoch_);
        continue;
      }
      uint64_t c = f.cursor.load();
      if ((c >> kPageShift) != p) continue;
      uint64_t idx = c & kIndexMask;
      if (idx >= f.slots) {
        active_.compare_exchange_strong(p, p + 1);
        continue;
      }
      if (!f.cursor.compare_exchange_strong(c, c + 1)) continue;

      uint64_t address = f.first_slot + idx * rs_;
      RecordCopy record{log_.layout(), f.buffer.data() + (address - f.base)};
      if (!record.header().invalid()) fn(Address::log(address), record);
      if (f.done.fetch_add(1) + 1 == f.slots) close(p);
    }
  }

 private:
  static constexpr uint64_t kNone = UINT64_MAX;
  static constexpr uint32_t kPageShift = 24;
  static constexpr uint64_t kIndexMask = (1ULL << kPageShift) - 1;

  struct Frame {
    AlignedBuffer buffer;
    std::atomic<uint64_t> loaded_page{kNone};
    std::atomic<uint64_t> cursor{0};
    std::atomic<uint64_t> done{0};
    uint64_t slots = 0;
    uint64_t first_slot = 0;
    uint64_t base = 0;
  };

  Frame& frame(uint64_t page) { return *frames_[(page - first_page_) % frames_.size()]; }

  void load(uint64_t page) {
    Frame& f = frame(page);
    const uint64_t page_end = log_.page_start(page + 1);
    const uint64_t lo = std::max(from_, log_.page_start(page));
    const uint64_t hi = std::min(until_, page_end);
    uint64_t first = log_.slot_at_or_after(lo);
    uint64_t slots = 0;
    if (first < hi && log_.page_of(first) == page) slots = (hi - first + rs_ - 1) / rs_;
    while (slots > 0 && first + slots * rs_ > page_end) --slots;
    f.slots = slots;
    f.first_slot = first;
    f.done.store(0);
    f.cursor.store(page << kPageShift);
    if (slots == 0) {
      f.loaded_page.store(page);
      close(page);
      return;
    }
    const uint64_t sector = log_.device()->sector_size();
    const uint64_t base = first / sector * sector;
    const uint64_t end = (first + slots * rs_ + sector - 1) / sector * sector;
    f.base = base;
    outstanding_.fetch_add(1);
    log_.device()->read_async(base, std::span<std::byte>{f.buffer.data(), end - base}, [this, &f, page](IoStatus s) {
      if (s != IoStatus::Ok) {
        failed_.store(true);
        f.slots = 0;
        f.loaded_page.store(page);
        close(page);
      } else {
        f.loaded_page.store(page);
      }
      outstanding_.fetch_sub(1);
    });
  }

  void close(uint64_t page) {
    uint64_t next = page + frames_.size();
    if (next > last_page_) return;
    outstanding_.fetch_add(1);
    epoch_.bump_with_action([this, next] {
      load(next);
      outstanding_.fetch_sub(1);
    });
  }

  HybridLog& log_;
  LightEpoch& epoch_;
  const uint64_t from_;
  const uint64_t until_;
  const uint64_t first_page_;
  const uint64_t last_page_;
  const uint32_t rs_;
  std::vector<std::unique_ptr<Frame>> frames_;
  std::atomic<uint64_t> active_{0};
  std::atomic<uint64_t> outstanding_{0};
  std::atomic<bool> failed_{false};
};

}  // namespace

// ---------------------------------------------------------------------------
// Construction

Store::Store(const StoreConfig& config) : Store(config, StoreDevices{}) {}

Store::Store(const StoreConfig& config, StoreDevices devices)
    : config_{config}, layout_{config.value_size}, devices_{std::move(devices)} {
  if (!devices_.hot) devices_.hot = make_device(config_, "hot", config_.value_size, config_.hot_page_size);
  if (!devices_.cold) devices_.cold = make_device(config_, "cold", config_.value_size, config_.cold_page_size);
  if (!devices_.chunk) {
    devices_.chunk =
        make_device(config_, "chunk", config_.cold_index.chunk_bytes, config_.cold_index.chunk_log_page_size);
  }

  HashIndexConfig hic;
  hic.num_buckets = config_.hot_index_buckets;
  hot_index_ = std::make_unique<HashIndex>(hic);

  HybridLogConfig hot;
  hot.page_size = config_.hot_page_size;
  hot.memory_pages = config_.hot_memory_pages;
  hot.mutable_fraction = config_.mutable_fraction;
  hot.value_size = config_.value_size;
  hot.scan_frames = config_.compaction.frames;
  hot_log_ = std::make_unique<HybridLog>(hot, epoch_, devices_.hot.get());

  HybridLogConfig cold = hot;
  cold.page_size = config_.cold_page_size;
  cold.memory_pages = config_.cold_memory_pages;
  cold_log_ = std::make_unique<HybridLog>(cold, epoch_, devices_.cold.get());

  cold_index_ = std::make_unique<ColdIndex>(config_.cold_index, epoch_, *devices_.chunk);

  if (config_.read_cache) {
    ReadCacheConfig rc = config_.read_cache_config;
    rc.value_size = config_.value_size;
    read_cache_ = std::make_unique<ReadCache>(rc, epoch_, *hot_index_, *hot_log_);
  }

  shards_.reset(new Shard[kShards]);
  for (uint32_t s = 0; s < kShards; ++s) {
    for (auto& v : shards_[s].values) v.store(0, std::memory_order_relaxed);
  }
  if (config_.compaction.background) start_background();
}

Store::~Store() {
  stop_background();
  for (;;) {
    epoch_.drain();
    devices_.hot->wait_idle();
    devices_.cold->wait_idle();
    devices_.chunk->wait_idle();
    if (epoch_.pending_actions() == 0) break;
    std::this_thread::yield();
  }
}

void Store::count(Counter c, uint64_t n) {
  static std::atomic<uint32_t> next_shard{0};
  thread_local uint32_t shard = next_shard.fetch_add(1) % kShards;
  shards_[shard].values[static_cast<uint32_t>(c)].fetch_add(n, std::memory_order_relaxed);
}

StoreMetrics Store::metrics() const {
  uint64_t v[kCounters] = {};
  for (uint32_t s = 0; s < kShards; ++s) {
    for (uint32_t i = 0; i < kCounters; ++i) v[i] += shards_[s].values[i].load(std::memory_order_relaxed);
  }
  auto at = [&](Counter c) { return v[static_cast<uint32_t>(c)]; };
  StoreMetrics m;
  m.reads = at(Counter::Reads);
  m.read_hits = at(Counter::ReadHits);
  m.read_cache_hits = at(Counter::ReadCacheHits);
  m.upserts = at(Counter::Upserts);
  m.in_place_updates = at(Counter::InPlace);
  m.deletes = at(Counter::Deletes);
  m.rmws = at(Counter::Rmws);
  m.upsert_retries = at(Counter::UpsertRetries);
  m.rmw_retries = at(Counter::RmwRetries);
  m.false_absence_rescans = at(Counter::FalseAbsenceRescans);
  m.hot_compactions = at(Counter::HotCompactions);
  m.cold_compactions = at(Counter::ColdCompactions);
  m.chunk_compactions = at(Counter::ChunkCompactions);
  m.records_compacted = at(Counter::RecordsCompacted);
  m.hot_num_truncs = hot_log_->num_truncs();
  m.cold_num_truncs = cold_log_->num_truncs();
  m.peak_compaction_frame_bytes = peak_frame_bytes_.load();
  return m;
}

// ---------------------------------------------------------------------------
// Chain helpers

Store::Found Store::walk(HybridLog& log, Key key, Address a, uint64_t floor) {
  Found f;
  while (a.is_valid() && a.offset() >= floor) {
    RecordRef r;
    switch (log.resolve(a, r)) {
      case HybridLog::Residency::Stale:
        f.stale = true;
        return f;
      case HybridLog::Residency::InMemory: {
        RecordHeader h = r.header();
        if (!h.invalid() && r.key() == key) {
          f.kind = Found::Kind::Memory;
          f.address = a;
          f.ref = r;
          return f;
        }
        a = h.previous();
        break;
      }
      case HybridLog::Residency::OnDisk: {
        RecordCopy c;
        Status s = log.read_record(a, c);
        if (s == Status::StaleAddress) {
          f.stale = true;
          return f;
        }
        if (s != Status::Ok) {
          f.error = true;
          return f;
        }
        if (!c.header().invalid() && c.key() == key) {
          f.kind = Found::Kind::Disk;
          f.address = a;
          f.copy = std::move(c);
          return f;
        }
        a = c.header().previous();
        break;
      }
    }
  }
  return f;
}

Store::Found Store::walk_hot(Key key, Address from, uint64_t stop_at) {
  return walk(*hot_log_, key, from, stop_at);
}

Store::Found Store::walk_cold(Key key, Address from, uint64_t stop_at) {
  return walk(*cold_log_, key, from, stop_at);
}

Store::Found Store::cold_lookup(Key key, uint64_t hash, uint64_t stop_at) {
  Address head;
  Status s = cold_index_->find_entry(hash, head);
  Found f;
  if (s == Status::NotFound) return f;
  if (s != Status::Ok) {
    f.error = true;
    return f;
  }
  return walk_cold(key, head, stop_at);
}

Address Store::hot_part(IndexEntry entry) const {
  Address a = entry.address();
  if (a.in_read_cache()) return read_cache_->record(a).header().previous();
  return a;
}

// ---------------------------------------------------------------------------
// Upsert / delete

void Store::throttle_writers() {
  // Writers wait while background compaction falls behind the hot budget.
  if (!config_.compaction.background || epoch_.is_protected()) return;
  const uint64_t limit =
      config_.compaction.hot_disk_budget + uint64_t{config_.hot_memory_pages} * config_.hot_page_size;
  while (!stop_.load(std::memory_order_relaxed) && hot_log_->tail() - hot_log_->begin() > limit) {
    std::this_thread::sleep_for(std::chrono::microseconds{100});
  }
}

Status Store::upsert(Key key, std::span<const std::byte> value) {
  count(Counter::Upserts);
  throttle_writers();
  return append_hot(key, hash_key(key), value, false);
}

Status Store::remove(Key key) {
  count(Counter::Deletes);
  throttle_writers();
  return append_hot(key, hash_key(key), {}, true);
}

Status Store::append_hot(Key key, uint64_t hash, std::span<const std::byte> value, bool tombstone) {
  EpochGuard guard{epoch_};
  for (;;) {
    EntryHandle h = hot_index_->find_or_create_entry(hash);
    const IndexEntry entry = h.entry;
    if (read_cache_) read_cache_->invalidate_for(key, entry);
    const Address head = hot_part(entry);

    if (!tombstone) {
      // Newest in-memory record for the key; update it in place if mutable.
      Address a = head;
      while (a.is_valid() && a.offset() >= hot_log_->head()) {
        RecordRef r = hot_log_->record_at(a);
        RecordHeader hdr = r.header();
        if (!hdr.invalid() && r.key() == key) {
          if (!hdr.tombstone() && a.offset() >= hot_log_->read_only()) {
            r.lock();
            assert(a.offset() >= hot_log_->safe_read_only());
            std::memcpy(r.value().data(), value.data(), std::min(value.size(), r.value().size()));
            r.unlock();
            count(Counter::InPlace);
            return Status::Ok;
          }
          break;
        }
        a = hdr.previous();
      }
    }

    Address fresh = hot_log_->allocate_blocking();
    RecordRef r = hot_log_->record_at(fresh);
    r.set_key(key);
    if (!tombstone) std::memcpy(r.value().data(), value.data(), std::min(value.size(), r.value().size()));
    r.set_header(RecordHeader::make(head, tombstone));
    if (HashIndex::try_update(h, entry, entry.with_address(fresh)) == Status::Ok) return Status::Ok;
    r.mark_invalid();
    count(Counter::UpsertRetries);
  }
}

// ---------------------------------------------------------------------------
// Read

void Store::maybe_cache(Key key, uint64_t hash, const RecordCopy& record, EntryHandle& handle, Address next_hot,
                        uint64_t hot_truncs) {
  if (!read_cache_) return;
  IndexEntry expected = handle.entry;
  if (!handle.found()) {
    // Cold-only key: claim a fresh entry whose chain has no hot part.
    handle = hot_index_->find_or_create_entry(hash);
    if (handle.entry.address().is_valid()) return;
    expected = handle.entry;
    next_hot = Address::invalid();
  }
  read_cache_->try_insert(key, record.value(), next_hot, handle, expected, hot_truncs);
}

Store::Found Store::cold_read(Key key, uint64_t hash) {
  uint64_t truncs0 = cold_log_->num_truncs();
  Found f = cold_lookup(key, hash, 0);
  if (f.found() || f.error || !config_.false_absence_check) return f;
  // A cold-cold compaction may have copied the record and truncated the old
  // copy while this lookup was in flight. Its copy can sit below the tail seen
  // at the start (allocated before, published after), so the rescan follows
  // the whole chain from the current index entry.
  while (cold_log_->num_truncs() != truncs0) {
    truncs0 = cold_log_->num_truncs();
    count(Counter::FalseAbsenceRescans);
    f = cold_lookup(key, hash, 0);
    if (f.found() || f.error) break;
  }
  return f;
}

Status Store::read(Key key, std::span<std::byte> out) {
  count(Counter::Reads);
  const uint64_t hash = hash_key(key);
  EpochGuard guard{epoch_};
  const uint64_t hot_truncs = hot_log_->num_truncs();
  EntryHandle h = hot_index_->find_entry(hash);
  // Hot part of the chain, resolved before any I/O can let cache pages go.
  Address hot_head;

  if (h.found()) {
    hot_head = h.entry.address();
    if (hot_head.in_read_cache()) {
      RecordRef r = read_cache_->record(hot_head);
      RecordHeader hdr = r.header();
      if (!hdr.invalid() && r.key() == key) {
        std::memcpy(out.data(), r.value().data(), layout_.value_size);
        if (read_cache_->in_read_only_region(hot_head)) read_cache_->second_chance(hot_head, h);
        count(Counter::ReadHits);
        count(Counter::ReadCacheHits);
        return Status::Ok;
      }
      hot_head = hdr.previous();
    }
    Found f = walk_hot(key, hot_head, 0);
    if (f.error) return Status::IoError;
    if (f.found()) {
      if (f.header().tombstone()) return Status::NotFound;
      count(Counter::ReadHits);
      if (f.kind == Found::Kind::Memory) {
        f.ref.read_value(out);
        return Status::Ok;
      }
      std::memcpy(out.data(), f.copy.value().data(), layout_.value_size);
      maybe_cache(key, hash, f.copy, h, hot_head, hot_truncs);
      return Status::Ok;
    }
  }

  Found f = cold_read(key, hash);
  if (f.error) return Status::IoError;
  if (!f.found() || f.header().tombstone()) return Status::NotFound;
  count(Counter::ReadHits);
  if (f.kind == Found::Kind::Memory) {
    std::memcpy(out.data(), f.ref.value().data(), layout_.value_size);
    return Status::Ok;
  }
  std::memcpy(out.data(), f.copy.value().data(), layout_.value_size);
  maybe_cache(key, hash, f.copy, h, hot_head, hot_truncs);
  return Status::Ok;
}

// ---------------------------------------------------------------------------
// RMW

Status Store::rmw(Key key, std::span<const std::byte> input, const Updater& updater,
                  const Initializer& initializer) {
  count(Counter::Rmws);
  throttle_writers();
  const uint64_t hash = hash_key(key);
  EpochGuard guard{epoch_};
  for (;;) {
    Status s = rmw_attempt(key, hash, input, updater, initializer);
    if (s != Status::Aborted) return s;
    count(Counter::RmwRetries);
  }
}

Status Store::rmw_attempt(Key key, uint64_t hash, std::span<const std::byte> input, const Updater& updater,
                          const Initializer& initializer) {
  const uint32_t vs = layout_.value_size;
  const uint64_t hot_truncs = hot_log_->num_truncs();
  EntryHandle h = hot_index_->find_or_create_entry(hash);
  const IndexEntry start_entry = h.entry;
  const Address start_addr = hot_part(start_entry);

  std::vector<std::byte> old_value(vs);
  std::vector<std::byte> new_value(vs);
  bool have_old = false;
  bool in_hot = false;

  if (start_entry.address().in_read_cache()) {
    RecordRef r = read_cache_->record(start_entry.address());
    if (!r.header().invalid() && r.key() == key) {
      std::memcpy(old_value.data(), r.value().data(), vs);
      have_old = true;
      in_hot = true;
    }
  }
  if (!in_hot) {
    // Hot-log RMW without creation.
    Found f = walk_hot(key, start_addr, 0);
    if (f.error) return Status::IoError;
    if (f.found()) {
      in_hot = true;
      if (!f.header().tombstone()) {
        if (f.kind == Found::Kind::Memory) {
          const uint64_t a = f.address.offset();
          if (a >= hot_log_->read_only()) {
            f.ref.lock();
            assert(a >= hot_log_->safe_read_only());
            std::memcpy(old_value.data(), f.ref.value().data(), vs);
            updater(old_value, input, new_value);
            std::memcpy(f.ref.value().data(), new_value.data(), vs);
            f.ref.unlock();
            count(Counter::InPlace);
            return Status::Ok;
          }
          if (a + layout_.size() > hot_log_->safe_read_only()) {
            // Fuzzy region: an in-place writer may still be active.
            yield_protected(epoch_);
            return Status::Aborted;
          }
          f.ref.read_value(old_value);
        } else {
          std::memcpy(old_value.data(), f.copy.value().data(), vs);
        }
        have_old = true;
      }
    }
  }

  if (!in_hot) {
    // Not in the hot log: read the cold log.
    Found c = cold_read(key, hash);
    if (c.error) return Status::IoError;
    if (c.found() && !c.header().tombstone()) {
      if (c.kind == Found::Kind::Memory) {
        std::memcpy(old_value.data(), c.ref.value().data(), vs);
      } else {
        std::memcpy(old_value.data(), c.copy.value().data(), vs);
      }
      have_old = true;
    }
  }

  if (have_old) {
    updater(old_value, input, new_value);
  } else {
    initializer(key, input, new_value);
  }

  // Conditional insert into the hot log: succeed only if no record for the
  // key appeared after start_addr. An RCU of a found record requires the
  // chain to be untouched; a creation re-checks only the newer prefix.
  IndexEntry expected = start_entry;
  Address scanned_down_to = start_addr;
  for (;;) {
    // The entry may have moved while I/O was in flight. Cache records are
    // dereferenced only after confirming the entry under protection.
    if (h.reload() != expected) {
      if (in_hot) return Status::Aborted;
      expected = h.entry;
      if (expected.free()) return Status::Aborted;
      if (expected.address().in_read_cache()) {
        RecordRef rc = read_cache_->record(expected.address());
        if (!rc.header().invalid() && rc.key() == key) return Status::Aborted;
      }
      const Address newer_head = hot_part(expected);
      Found f = walk_hot(key, newer_head, scanned_down_to.offset() + 1);
      if (f.error) return Status::IoError;
      if (f.found()) return Status::Aborted;
      scanned_down_to = newer_head;
      continue;
    }
    if (read_cache_) read_cache_->invalidate_for(key, expected);
    const Address head = hot_part(expected);
    Address fresh = hot_log_->allocate_blocking();
    RecordRef r = hot_log_->record_at(fresh);
    r.set_key(key);
    std::memcpy(r.value().data(), new_value.data(), vs);
    r.set_header(RecordHeader::make(head, false));
    // No epoch refresh between this check and the swap, so a hot-index scrub
    // (which waits for epoch safety after truncation) cannot interleave.
    if (hot_log_->num_truncs() != hot_truncs) {
      r.mark_invalid();
      return Status::Aborted;
    }
    if (HashIndex::try_update(h, expected, expected.with_address(fresh)) == Status::Ok) return Status::Ok;
    r.mark_invalid();
  }
}

// ---------------------------------------------------------------------------
// Conditional inserts into the cold log

Status Store::conditional_insert_cold(const RecordCopy& record, Address start) {
  EpochGuard guard{epoch_};
  const Key key = record.key();
  const uint64_t hash = hash_key(key);
  Address head;
  Status s = cold_index_->find_entry(hash, head);
  if (s != Status::Ok && s != Status::NotFound) return s;
  if (s == Status::NotFound) head = Address::invalid();
  uint64_t floor = start.offset() + 1;
  for (;;) {
    Found f = walk_cold(key, head, floor);
    if (f.error) return Status::IoError;
    if (f.found()) return Status::Aborted;

    Address fresh = cold_log_->allocate_blocking();
    RecordRef r = cold_log_->record_at(fresh);
    r.set_key(key);
    std::memcpy(r.value().data(), record.value().data(), layout_.value_size);
    r.set_header(RecordHeader::make(head, record.header().tombstone()));
    Address current;
    if (cold_index_->modify_entry(hash, head, fresh, &current) == Status::Ok) return Status::Ok;
    r.mark_invalid();
    // Only the records that appeared since the last check need a look.
    floor = std::max(floor, head.offset() + 1);
    head = current;
  }
}

Status Store::conditional_insert_hot_to_cold(const RecordCopy& record, Address start) {
  EpochGuard guard{epoch_};
  const Key key = record.key();
  EntryHandle h = hot_index_->find_entry(hash_key(key));
  if (h.found()) {
    Found f = walk_hot(key, hot_part(h.entry), start.offset() + 1);
    if (f.error) return Status::IoError;
    if (f.found()) return Status::Aborted;
  }
  cold_upsert(record);
  return Status::Ok;
}

void Store::cold_upsert(const RecordCopy& record) {
  const Key key = record.key();
  const uint64_t hash = hash_key(key);
  Address head;
  if (cold_index_->find_entry(hash, head) != Status::Ok) head = Address::invalid();
  for (;;) {
    Address fresh = cold_log_->allocate_blocking();
    RecordRef r = cold_log_->record_at(fresh);
    r.set_key(key);
    std::memcpy(r.value().data(), record.value().data(), layout_.value_size);
    r.set_header(RecordHeader::make(head, record.header().tombstone()));
    Address current;
    if (cold_index_->modify_entry(hash, head, fresh, &current) == Status::Ok) return;
    r.mark_invalid();
    head = current;
  }
}

// ---------------------------------------------------------------------------
// Compaction

void Store::wait_for_epoch_safety() {
  auto done = std::make_shared<std::atomic<bool>>(false);
  epoch_.bump_with_action([done] { done->store(true); });
  while (!done->load()) yield_protected(epoch_);
}

CompactionResult Store::compact(HybridLog& source, bool hot_source, uint64_t until, uint32_t threads) {
  CompactionResult result;
  const uint64_t begin = source.begin();
  until = std::min(until, source.head());
  result.until = std::max(until, begin);
  if (until <= begin) return result;

  std::atomic<uint64_t> scanned{0};
  std::atomic<uint64_t> copied{0};
  std::atomic<uint64_t> aborted{0};
  std::atomic<uint64_t> elided{0};
  std::atomic<bool> io_error{false};
  bool failed = false;
  {
    EpochGuard guard{epoch_};
    FrameScanner scanner{source, epoch_, begin, until, std::max<uint32_t>(1, config_.compaction.frames)};
    result.frame_bytes = scanner.frame_bytes();
    uint64_t peak = peak_frame_bytes_.load();
    while (result.frame_bytes > peak && !peak_frame_bytes_.compare_exchange_weak(peak, result.frame_bytes)) {
    }

    auto process = [&](Address address, const RecordCopy& record) {
      scanned.fetch_add(1, std::memory_order_relaxed);
      Status s;
      if (hot_source) {
        s = conditional_insert_hot_to_cold(record, address);
      } else if (record.header().tombstone()) {
        // A live tombstone at the start of the cold log shadows nothing once
        // the prefix is truncated, so it is dropped instead of copied.
        EpochGuard g{epoch_};
        Address head;
        Status fs = cold_index_->find_entry(hash_key(record.key()), head);
        Found f = fs == Status::Ok ? walk_cold(record.key(), head, address.offset() + 1) : Found{};
        if (f.error || (fs != Status::Ok && fs != Status::NotFound)) {
          io_error.store(true);
        } else if (f.found()) {
          aborted.fetch_add(1, std::memory_order_relaxed);
        } else {
          elided.fetch_add(1, std::memory_order_relaxed);
        }
        return;
      } else {
        s = conditional_insert_cold(record, address);
      }
      if (s == Status::Ok) {
        copied.fetch_add(1, std::memory_order_relaxed);
      } else if (s == Status::Aborted) {
        aborted.fetch_add(1, std::memory_order_relaxed);
      } else {
        io_error.store(true);
      }
    };

    const uint32_t n = std::max<uint32_t>(1, threads);
    std::vector<std::thread> workers;
    for (uint32_t i = 1; i < n; ++i) {
      workers.emplace_back([&] {
        EpochGuard g{epoch_};
        scanner.run(process);
      });
    }
    scanner.run(process);
    for (auto& t : workers) t.join();
    failed = scanner.failed() || io_error.load();
  }

  result.scanned = scanned.load();
  result.copied = copied.load();
  result.aborted = aborted.load();
  result.elided = elided.load();
  if (failed) return result;

  {
    EpochGuard guard{epoch_};
    source.truncate_begin(until);
  }
  // Scrub only once every thread that might have checked the truncation
  // counter before it changed has moved on.
  wait_for_epoch_safety();
  if (hot_source) {
    hot_index_->scrub_stale_entries(until);
    count(Counter::HotCompactions);
  } else {
    cold_index_->scrub(until);
    count(Counter::ColdCompactions);
  }
  count(Counter::RecordsCompacted, result.copied);
  return result;
}

CompactionResult Store::compact_hot(uint64_t until, uint32_t threads) {
  std::lock_guard lock{hot_compaction_mutex_};
  return compact(*hot_log_, true, until, threads);
}

CompactionResult Store::compact_cold(uint64_t until, uint32_t threads) {
  std::lock_guard lock{cold_compaction_mutex_};
  return compact(*cold_log_, false, until, threads);
}

uint64_t Store::compact_chunk_log(uint64_t until) {
  std::lock_guard lock{chunk_compaction_mutex_};
  uint64_t moved = cold_index_->compact_chunk_log(until);
  count(Counter::ChunkCompactions);
  return moved;
}

void Store::flush_hot() { hot_log_->evict_until(hot_log_->tail()); }

void Store::flush_cold() {
  cold_log_->evict_until(cold_log_->tail());
  cold_index_->chunk_log().evict_until(cold_index_->chunk_log().tail());
}

// ---------------------------------------------------------------------------
// Background compaction

void Store::start_background() {
  stop_.store(false);
  hot_monitor_ = std::thread{[this] { monitor_hot(); }};
  cold_monitor_ = std::thread{[this] { monitor_cold(); }};
}

void Store::stop_background() {
  {
    std::lock_guard lock{monitor_mutex_};
    stop_.store(true);
  }
  monitor_cv_.notify_all();
  if (hot_monitor_.joinable()) hot_monitor_.join();
  if (cold_monitor_.joinable()) cold_monitor_.join();
}

namespace {

/// Compaction target for a log whose footprint passed the trigger, or 0.
uint64_t compaction_target(const HybridLog& log, uint64_t budget, const CompactionConfig& c) {
  const uint64_t begin = log.begin();
  const uint64_t footprint = log.tail() - begin;
  if (static_cast<double>(footprint) < c.trigger_fraction * static_cast<double>(budget)) return 0;
  const uint64_t until = begin + static_cast<uint64_t>(c.compact_fraction * static_cast<double>(budget));
  return std::min(until, log.head()) > begin ? until : 0;
}

}  // namespace

void Store::monitor_hot() {
  const auto& c = config_.compaction;
  while (!stop_.load()) {
    {
      std::unique_lock lock{monitor_mutex_};
      monitor_cv_.wait_for(lock, std::chrono::milliseconds{c.poll_interval_ms}, [this] { return stop_.load(); });
    }
    if (stop_.load()) break;
    if (uint64_t until = compaction_target(*hot_log_, c.hot_disk_budget, c)) compact_hot(until, c.threads);
  }
}

void Store::monitor_cold() {
  const auto& c = config_.compaction;
  while (!stop_.load()) {
    {
      std::unique_lock lock{monitor_mutex_};
      monitor_cv_.wait_for(lock, std::chrono::milliseconds{c.poll_interval_ms}, [this] { return stop_.load(); });
    }
    if (stop_.load()) break;
    if (uint64_t until = compaction_target(*cold_log_, c.cold_disk_budget, c)) compact_cold(until, c.threads);
    if (uint64_t until = compaction_target(cold_index_->chunk_log(), c.chunk_disk_budget, c)) {
      compact_chunk_log(until);
    }
  }
}

}  // namespace f2kv
