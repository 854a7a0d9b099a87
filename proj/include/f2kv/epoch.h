#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>

namespace f2kv {

/// Epoch protection framework.
///
/// A global epoch counter E and a fixed table of per-thread local epochs.
/// Threads protect themselves before touching shared log memory and refresh
/// periodically. System-wide changes (page flush, eviction, truncation) are
/// registered as trigger actions at the current epoch via bump_with_action();
/// an action registered at epoch e runs only once every protected thread's
/// local epoch is greater than e.
///
/// A thread owns a table slot only while protected. protect() claims a slot
/// (reusing the thread's previous slot when possible), unprotect() frees it.
/// Protection is idempotent: protecting an already-protected thread refreshes.
class LightEpoch {
 public:
  static constexpr uint32_t kTableSize = 64;
  static constexpr uint32_t kDrainListSize = 256;
  /// Local epoch value of a free (unprotected) slot.
  static constexpr uint64_t kUnprotected = 0;
  static constexpr uint64_t kFirstEpoch = 1;

  LightEpoch();
  ~LightEpoch();
  LightEpoch(const LightEpoch&) = delete;
  LightEpoch& operator=(const LightEpoch&) = delete;

  /// Enters protection (or refreshes if already protected). Returns the local epoch.
  /// Throws CapacityError when all kTableSize slots are held by other threads.
  uint64_t protect();
  /// Copies the global epoch into this thread's slot and runs any now-safe actions.
  uint64_t refresh();
  void unprotect();
  bool is_protected() const;

  /// Advances the global epoch; `action` runs once the pre-increment epoch is safe.
  /// Returns the new global epoch.
  uint64_t bump_with_action(std::function<void()> action);
  uint64_t bump();

  uint64_t current_epoch() const { return global_epoch_.load(); }
  /// Largest e such that every protected thread's local epoch is > e.
  uint64_t safe_epoch() const;
  /// Runs every registered action whose epoch is safe. Returns how many ran.
  size_t drain();
  size_t pending_actions() const { return drain_count_.load(); }
  /// Local epoch held in `slot` (kUnprotected if free). For checkers and tests.
  uint64_t slot_epoch(uint32_t slot) const { return table_[slot].local_epoch.load(); }
  /// Slot currently held by the calling thread, or kTableSize.
  uint32_t current_slot() const;

 private:
  struct alignas(64) Entry {
    std::atomic<uint64_t> local_epoch{kUnprotected};
  };
  struct alignas(64) DrainItem {
    static constexpr uint64_t kFree = UINT64_MAX;
    static constexpr uint64_t kLocked = UINT64_MAX - 1;
    std::atomic<uint64_t> epoch{kFree};
    std::function<void()> action;
  };

  uint32_t claim_slot(uint64_t epoch);
  void maybe_drain() {
    if (drain_count_.load() > 0) drain();
  }

  const uint64_t uid_;
  alignas(64) std::atomic<uint64_t> global_epoch_{kFirstEpoch};
  alignas(64) std::atomic<int64_t> drain_count_{0};
  std::array<Entry, kTableSize> table_;
  std::array<DrainItem, kDrainListSize> drain_list_;
};

/// Scoped protection; only unprotects if it was the one that protected.
class EpochGuard {
 public:
  explicit EpochGuard(LightEpoch& epoch) : epoch_{epoch}, owner_{!epoch.is_protected()} {
    epoch_.protect();
  }
  ~EpochGuard() {
    if (owner_) epoch_.unprotect();
  }
  EpochGuard(const EpochGuard&) = delete;
  EpochGuard& operator=(const EpochGuard&) = delete;

 private:
  LightEpoch& epoch_;
  bool owner_;
};

/// Leaves protection for the lifetime of the object (e.g. while blocked on I/O),
/// re-entering on destruction if the thread was protected before.
class EpochSuspend {
 public:
  explicit EpochSuspend(LightEpoch& epoch) : epoch_{epoch}, was_protected_{epoch.is_protected()} {
    if (was_protected_) epoch_.unprotect();
  }
  ~EpochSuspend() {
    if (was_protected_) epoch_.protect();
  }
  EpochSuspend(const EpochSuspend&) = delete;
  EpochSuspend& operator=(const EpochSuspend&) = delete;

 private:
  LightEpoch& epoch_;
  bool was_protected_;
};

}  // namespace f2kv
