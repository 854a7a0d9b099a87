#include "f2kv/epoch.h"

#include <limits>
#include <thread>

#include "f2kv/status.h"

namespace f2kv {

namespace {

std::atomic<uint64_t> next_epoch_uid{1};

// Per-thread record of the slot held in each LightEpoch instance the thread
// has touched. Keyed by instance uid so a destroyed epoch's entry never
// aliases a new one at the same address.
struct ThreadSlots {
  static constexpr size_t kEntries = 8;
  struct Item {
    uint64_t uid = 0;
    uint32_t slot = LightEpoch::kTableSize;  // kTableSize = not protected
    uint32_t hint = 0;
  };
  std::array<Item, kEntries> items{};
  size_t next_victim = 0;

  Item& lookup(uint64_t uid) {
    for (auto& it : items) {
      if (it.uid == uid) return it;
    }
    for (auto& it : items) {
      if (it.uid == 0) {
        it.uid = uid;
        return it;
      }
    }
    // Evict an entry that is not currently protected.
    for (size_t n = 0; n < kEntries; ++n) {
      auto& it = items[(next_victim + n) % kEntries];
      if (it.slot == LightEpoch::kTableSize) {
        next_victim = (next_victim + n + 1) % kEntries;
        it = Item{uid, LightEpoch::kTableSize, 0};
        return it;
      }
    }
    throw CapacityError("thread is protected in too many epoch instances");
  }
  const Item* find(uint64_t uid) const {
    for (const auto& it : items) {
      if (it.uid == uid) return &it;
    }
    return nullptr;
  }
};

thread_local ThreadSlots tls_slots;

}  // namespace

LightEpoch::LightEpoch() : uid_{next_epoch_uid.fetch_add(1)} {}

LightEpoch::~LightEpoch() = default;

uint32_t LightEpoch::claim_slot(uint64_t epoch) {
  auto& item = tls_slots.lookup(uid_);
  uint64_t expected = kUnprotected;
  if (table_[item.hint].local_epoch.compare_exchange_strong(expected, epoch)) {
    item.slot = item.hint;
    return item.slot;
  }
  for (uint32_t n = 0; n < kTableSize; ++n) {
    uint32_t i = (item.hint + n) % kTableSize;
    expected = kUnprotected;
    if (table_[i].local_epoch.compare_exchange_strong(expected, epoch)) {
      item.slot = i;
      item.hint = i;
      return i;
    }
  }
  throw CapacityError("epoch table full: max protected threads reached");
}

uint64_t LightEpoch::protect() {
  auto& item = tls_slots.lookup(uid_);
  if (item.slot != kTableSize) return refresh();
  uint64_t e = global_epoch_.load();
  claim_slot(e);
  maybe_drain();
  return e;
}

uint64_t LightEpoch::refresh() {
  auto& item = tls_slots.lookup(uid_);
  if (item.slot == kTableSize) return protect();
  uint64_t e = global_epoch_.load();
  table_[item.slot].local_epoch.store(e);
  maybe_drain();
  return e;
}

void LightEpoch::unprotect() {
  auto& item = tls_slots.lookup(uid_);
  if (item.slot == kTableSize) return;
  table_[item.slot].local_epoch.store(kUnprotected);
  item.slot = kTableSize;
  maybe_drain();
}

bool LightEpoch::is_protected() const {
  const auto* item = tls_slots.find(uid_);
  return item != nullptr && item->slot != kTableSize;
}

uint32_t LightEpoch::current_slot() const {
  const auto* item = tls_slots.find(uid_);
  return item == nullptr ? kTableSize : item->slot;
}

uint64_t LightEpoch::safe_epoch() const {
  // Read global first: a thread protecting after this read gets a local epoch
  // >= the value read, so it cannot lower the result below what we return.
  uint64_t global = global_epoch_.load();
  uint64_t min_local = std::numeric_limits<uint64_t>::max();
  for (const auto& entry : table_) {
    uint64_t e = entry.local_epoch.load();
    if (e != kUnprotected && e < min_local) min_local = e;
  }
  if (min_local == std::numeric_limits<uint64_t>::max()) return global - 1;
  return min_local - 1;
}

size_t LightEpoch::drain() {
  size_t ran = 0;
  uint64_t safe = safe_epoch();
  for (auto& item : drain_list_) {
    uint64_t e = item.epoch.load();
    if (e >= DrainItem::kLocked || e > safe) continue;
    if (!item.epoch.compare_exchange_strong(e, DrainItem::kLocked)) continue;
    std::function<void()> action = std::move(item.action);
    item.action = nullptr;
    item.epoch.store(DrainItem::kFree);
    drain_count_.fetch_sub(1);
    action();
    ++ran;
  }
  return ran;
}

uint64_t LightEpoch::bump() { return global_epoch_.fetch_add(1) + 1; }

uint64_t LightEpoch::bump_with_action(std::function<void()> action) {
  uint64_t prior = global_epoch_.fetch_add(1);
  for (;;) {
    for (auto& item : drain_list_) {
      uint64_t e = item.epoch.load();
      if (e != DrainItem::kFree) continue;
      if (!item.epoch.compare_exchange_strong(e, DrainItem::kLocked)) continue;
      item.action = std::move(action);
      drain_count_.fetch_add(1);
      item.epoch.store(prior);
      maybe_drain();
      return prior + 1;
    }
    // Drain list full: force a drain (which runs the oldest safe actions on
    // this thread) and try again. If nothing is safe yet, let our own slot
    // move forward so we are not the one holding the list up.
    if (drain() == 0) {
      if (is_protected()) refresh();
      std::this_thread::yield();
    }
  }
}

}  // namespace f2kv
