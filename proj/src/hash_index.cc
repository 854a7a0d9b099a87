#include "f2kv/hash_index.h"

#include <stdexcept>
#include <thread>

namespace f2kv {

HashIndex::HashIndex(const HashIndexConfig& config)
    : num_buckets_{config.num_buckets},
      overflow_capacity_{config.overflow_buckets == UINT64_MAX ? config.num_buckets / 8 : config.overflow_buckets},
      tag_shift_{config.tag_shift} {
  if (num_buckets_ == 0 || (num_buckets_ & (num_buckets_ - 1)) != 0) {
    throw std::invalid_argument("bucket count must be a power of two");
  }
  buckets_.reset(new Bucket[num_buckets_]);
  for (uint64_t b = 0; b < num_buckets_; ++b) {
    for (auto& s : buckets_[b].slots) s.store(0, std::memory_order_relaxed);
  }
  if (overflow_capacity_ > 0) {
    overflow_.reset(new Bucket[overflow_capacity_]);
    for (uint64_t b = 0; b < overflow_capacity_; ++b) {
      for (auto& s : overflow_[b].slots) s.store(0, std::memory_order_relaxed);
    }
  }
}

HashIndex::Bucket* HashIndex::overflow_next(const Bucket* b) const {
  uint64_t link = b->slots[kEntrySlots].load();
  return link == 0 ? nullptr : &overflow_[link - 1];
}

HashIndex::Bucket* HashIndex::grow_chain(Bucket* last) {
  uint64_t index = UINT64_MAX;
  {
    std::lock_guard lock{spare_mutex_};
    if (!spare_overflow_.empty()) {
      index = spare_overflow_.back();
      spare_overflow_.pop_back();
    }
  }
  if (index == UINT64_MAX) {
    index = overflow_next_free_.fetch_add(1);
    if (index >= overflow_capacity_) {
      overflow_next_free_.fetch_sub(1);
      throw CapacityError("hash index overflow pool exhausted");
    }
  }
  uint64_t expected = 0;
  if (last->slots[kEntrySlots].compare_exchange_strong(expected, index + 1)) return &overflow_[index];
  // Someone else linked first; keep ours for later.
  std::lock_guard lock{spare_mutex_};
  spare_overflow_.push_back(index);
  return &overflow_[expected - 1];
}

template <typename Fn>
void HashIndex::for_each_slot(uint64_t bucket, Fn&& fn) const {
  for (const Bucket* b = &buckets_[bucket]; b != nullptr; b = overflow_next(b)) {
    for (uint32_t i = 0; i < kEntrySlots; ++i) {
      if (!fn(const_cast<std::atomic<uint64_t>*>(&b->slots[i]))) return;
    }
  }
}

EntryHandle HashIndex::find_entry(uint64_t hash) const {
  const uint16_t tag = tag_of(hash);
  EntryHandle result;
  for_each_slot(bucket_of(hash), [&](std::atomic<uint64_t>* slot) {
    IndexEntry e{slot->load()};
    if (e.occupied() && !e.tentative() && e.tag() == tag) {
      result.slot = slot;
      result.entry = e;
      return false;
    }
    return true;
  });
  return result;
}

EntryHandle HashIndex::find_or_create_entry(uint64_t hash) {
  const uint16_t tag = tag_of(hash);
  const uint64_t bucket = bucket_of(hash);
  const IndexEntry tentative{IndexEntry::make(Address::invalid(), tag).word | IndexEntry::kTentativeBit};
  for (;;) {
    EntryHandle existing = find_entry(hash);
    if (existing.found()) return existing;

    // Claim the first free slot in the chain, extending it if needed.
    std::atomic<uint64_t>* claimed = nullptr;
    Bucket* b = &buckets_[bucket];
    while (claimed == nullptr) {
      for (uint32_t i = 0; i < kEntrySlots && claimed == nullptr; ++i) {
        uint64_t expected = 0;
        if (b->slots[i].load() == 0 && b->slots[i].compare_exchange_strong(expected, tentative.word)) {
          claimed = &b->slots[i];
        }
      }
      if (claimed == nullptr) {
        Bucket* next = overflow_next(b);
        b = next != nullptr ? next : grow_chain(b);
      }
    }

    // Back off if any other entry with this tag exists, tentative or not.
    bool conflict = false;
    for_each_slot(bucket, [&](std::atomic<uint64_t>* slot) {
      if (slot == claimed) return true;
      IndexEntry e{slot->load()};
      if (e.occupied() && e.tag() == tag) {
        conflict = true;
        return false;
      }
      return true;
    });
    if (conflict) {
      claimed->store(0);
      std::this_thread::yield();
      continue;
    }
    IndexEntry visible = IndexEntry::make(Address::invalid(), tag);
    claimed->store(visible.word);
    return EntryHandle{claimed, visible};
  }
}

Status HashIndex::try_update(EntryHandle& handle, IndexEntry expected, IndexEntry desired) {
  uint64_t word = expected.word;
  if (handle.slot->compare_exchange_strong(word, desired.word)) {
    handle.entry = desired;
    return Status::Ok;
  }
  handle.entry = IndexEntry{word};
  return Status::Aborted;
}

uint64_t HashIndex::scrub_stale_entries(uint64_t min_valid) {
  uint64_t cleared = 0;
  auto scrub_bucket = [&](Bucket& b) {
    for (uint32_t i = 0; i < kEntrySlots; ++i) {
      uint64_t word = b.slots[i].load();
      IndexEntry e{word};
      if (!e.occupied() || e.tentative() || e.address().in_read_cache()) continue;
      if (e.address().offset() >= min_valid) continue;
      if (b.slots[i].compare_exchange_strong(word, 0)) ++cleared;
    }
  };
  for (uint64_t i = 0; i < num_buckets_; ++i) scrub_bucket(buckets_[i]);
  uint64_t used = std::min(overflow_next_free_.load(), overflow_capacity_);
  for (uint64_t i = 0; i < used; ++i) scrub_bucket(overflow_[i]);
  return cleared;
}

void HashIndex::for_each(const std::function<void(EntryHandle)>& fn) const {
  for (uint64_t b = 0; b < num_buckets_; ++b) {
    for_each_slot(b, [&](std::atomic<uint64_t>* slot) {
      IndexEntry e{slot->load()};
      if (e.occupied() && !e.tentative()) fn(EntryHandle{slot, e});
      return true;
    });
  }
}

uint64_t HashIndex::count_entries() const {
  uint64_t n = 0;
  for_each([&](EntryHandle) { ++n; });
  return n;
}

uint64_t HashIndex::overflow_buckets_used() const {
  return std::min(overflow_next_free_.load(), overflow_capacity_);
}

}  // namespace f2kv
