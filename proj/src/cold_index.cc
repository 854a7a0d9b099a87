#include "f2kv/cold_index.h"

#include <bit>
#include <cstring>
#include <stdexcept>
#include <thread>
#include <vector>

namespace f2kv {

namespace {

HashIndexConfig chunk_index_config(uint64_t num_chunks) {
  // Four chunks per bucket; the tag takes the bits right above the bucket
  // bits, so (bucket, tag) identifies a chunk id exactly and no overflow is needed.
  HashIndexConfig c;
  c.num_buckets = std::max<uint64_t>(1, num_chunks / 4);
  c.overflow_buckets = 0;
  c.tag_shift = static_cast<uint32_t>(std::countr_zero(c.num_buckets));
  return c;
}

HybridLogConfig chunk_log_config(const ColdIndexConfig& c) {
  HybridLogConfig lc;
  lc.page_size = c.chunk_log_page_size;
  lc.memory_pages = c.chunk_log_memory_pages;
  lc.value_size = c.chunk_bytes;
  return lc;
}

}  // namespace

ColdIndex::ColdIndex(const ColdIndexConfig& config, LightEpoch& epoch, Device& chunk_device)
    : num_chunks_{config.num_chunks},
      chunk_bits_{static_cast<uint32_t>(std::countr_zero(config.num_chunks))},
      entries_per_chunk_{config.chunk_bytes / 8},
      epoch_{epoch},
      chunk_index_{chunk_index_config(config.num_chunks)} {
  if (num_chunks_ == 0 || !std::has_single_bit(num_chunks_)) {
    throw std::invalid_argument("chunk count must be a power of two");
  }
  if (config.chunk_bytes < 64 || config.chunk_bytes > 4096 || !std::has_single_bit(config.chunk_bytes)) {
    throw std::invalid_argument("chunk size must be a power of two between 64 B and 4 KiB");
  }
  chunk_log_ = std::make_unique<HybridLog>(chunk_log_config(config), epoch, &chunk_device);
}

ColdIndex::~ColdIndex() = default;

std::span<uint64_t> ColdIndex::entries_of(RecordRef record) const {
  return {reinterpret_cast<uint64_t*>(record.value().data()), entries_per_chunk_};
}

Status ColdIndex::find_entry(uint64_t key_hash, Address& out) {
  const ChunkKey ck = chunk_key(key_hash);
  EpochGuard guard{epoch_};
  for (;;) {
    EntryHandle h = chunk_index_.find_entry(ck.chunk_id);
    if (!h.found() || h.address().is_invalid()) return Status::NotFound;
    RecordRef r;
    uint64_t word = 0;
    switch (chunk_log_->resolve(h.address(), r)) {
      case HybridLog::Residency::Stale:
        epoch_.refresh();
        continue;
      case HybridLog::Residency::InMemory:
        word = std::atomic_ref<uint64_t>{entries_of(r)[ck.offset]}.load();
        break;
      case HybridLog::Residency::OnDisk: {
        RecordCopy copy;
        Status s = chunk_log_->read_record(h.address(), copy);
        if (s == Status::StaleAddress) continue;
        if (s != Status::Ok) return s;
        std::memcpy(&word, copy.value().data() + 8 * ck.offset, sizeof(word));
        break;
      }
    }
    out = Address{word};
    return out.is_valid() ? Status::Ok : Status::NotFound;
  }
}

Status ColdIndex::update_chunk(uint64_t chunk_id, const ChunkEditor& editor, Address only_if_at) {
  const bool relocating = only_if_at.is_valid();
  const uint32_t rs = chunk_log_->record_size();
  EpochGuard guard{epoch_};
  std::vector<uint64_t> copy(entries_per_chunk_);
  for (;;) {
    EntryHandle h = relocating ? chunk_index_.find_entry(chunk_id) : chunk_index_.find_or_create_entry(chunk_id);
    if (relocating && (!h.found() || h.address() != only_if_at)) return Status::Aborted;
    const Address at = h.address();
    std::fill(copy.begin(), copy.end(), 0);
    if (at.is_valid()) {
      RecordRef r;
      auto residency = chunk_log_->resolve(at, r);
      if (residency == HybridLog::Residency::Stale) {
        epoch_.refresh();
        continue;
      }
      if (residency == HybridLog::Residency::InMemory) {
        if (!relocating && at.offset() >= chunk_log_->read_only()) {
          // Mutable region: edit in place.
          return editor(entries_of(r)) == Edit::Aborted ? Status::Aborted : Status::Ok;
        }
        if (at.offset() + rs > chunk_log_->safe_read_only()) {
          // Another thread may still be editing it in place.
          epoch_.refresh();
          std::this_thread::yield();
          continue;
        }
        auto src = entries_of(r);
        for (uint32_t i = 0; i < entries_per_chunk_; ++i) copy[i] = std::atomic_ref<uint64_t>{src[i]}.load();
      } else {
        RecordCopy rc;
        Status s = chunk_log_->read_record(at, rc);
        if (s == Status::StaleAddress) continue;
        if (s != Status::Ok) return s;
        std::memcpy(copy.data(), rc.value().data(), 8ULL * entries_per_chunk_);
      }
    }
    Edit e = editor(copy);
    if (e == Edit::Aborted) return Status::Aborted;
    if (e == Edit::NoChange && !relocating) return Status::Ok;

    Address fresh = chunk_log_->allocate_blocking();
    RecordRef nr = chunk_log_->record_at(fresh);
    nr.set_key(chunk_id);
    std::memcpy(nr.value().data(), copy.data(), 8ULL * entries_per_chunk_);
    nr.set_header(RecordHeader::make(Address::invalid(), false));
    if (HashIndex::try_update(h, h.entry, h.entry.with_address(fresh)) == Status::Ok) return Status::Ok;
    nr.mark_invalid();
    if (relocating) return Status::Aborted;
  }
}

Status ColdIndex::modify_entry(uint64_t key_hash, Address expected, Address desired, Address* current) {
  const ChunkKey ck = chunk_key(key_hash);
  Address seen = Address::invalid();
  Status s = update_chunk(ck.chunk_id, [&](std::span<uint64_t> entries) {
    std::atomic_ref<uint64_t> word{entries[ck.offset]};
    uint64_t cur = word.load();
    for (;;) {
      if (Address{cur} != expected) {
        seen = Address{cur};
        return Edit::Aborted;
      }
      if (expected == desired) return Edit::NoChange;
      if (word.compare_exchange_strong(cur, desired.control())) return Edit::Changed;
    }
  });
  if (current != nullptr) *current = s == Status::Ok ? desired : seen;
  return s;
}

uint64_t ColdIndex::scrub(uint64_t min_valid) {
  std::vector<uint64_t> dirty;
  chunk_log_->scan(chunk_log_->begin(), chunk_log_->tail(), [&](Address a, RecordRef r) {
    uint64_t chunk_id = r.key();
    EntryHandle h = chunk_index_.find_entry(chunk_id);
    if (!h.found() || h.address() != a) return;
    for (uint64_t& w : entries_of(r)) {
      Address e{std::atomic_ref<uint64_t>{w}.load()};
      if (e.is_valid() && e.offset() < min_valid) {
        dirty.push_back(chunk_id);
        return;
      }
    }
  });
  uint64_t cleared = 0;
  for (uint64_t chunk_id : dirty) {
    uint64_t attempt = 0;
    Status s = update_chunk(chunk_id, [&](std::span<uint64_t> entries) {
      Edit result = Edit::NoChange;
      attempt = 0;
      for (uint64_t& w : entries) {
        std::atomic_ref<uint64_t> word{w};
        uint64_t cur = word.load();
        Address e{cur};
        if (e.is_valid() && e.offset() < min_valid && word.compare_exchange_strong(cur, 0)) {
          ++attempt;
          result = Edit::Changed;
        }
      }
      return result;
    });
    if (s == Status::Ok) cleared += attempt;
  }
  return cleared;
}

uint64_t ColdIndex::compact_chunk_log(uint64_t until) {
  until = std::min(until, chunk_log_->head());
  if (until <= chunk_log_->begin()) return 0;
  std::vector<std::pair<uint64_t, Address>> live;
  chunk_log_->scan(chunk_log_->begin(), until, [&](Address a, RecordRef r) {
    EntryHandle h = chunk_index_.find_entry(r.key());
    if (h.found() && h.address() == a) live.emplace_back(r.key(), a);
  });
  uint64_t moved = 0;
  for (auto [chunk_id, at] : live) {
    Status s = update_chunk(chunk_id, [](std::span<uint64_t>) { return Edit::NoChange; }, at);
    if (s == Status::Ok) ++moved;
  }
  {
    EpochGuard guard{epoch_};
    chunk_log_->truncate_begin(until);
  }
  return moved;
}

}  // namespace f2kv
