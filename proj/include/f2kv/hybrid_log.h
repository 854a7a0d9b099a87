#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "f2kv/address.h"
#include "f2kv/aligned_buffer.h"
#include "f2kv/device.h"
#include "f2kv/epoch.h"
#include "f2kv/record.h"
#include "f2kv/status.h"

namespace f2kv {

struct HybridLogConfig {
  uint64_t page_size = 32ULL << 20;
  /// In-memory frames in the circular page buffer (>= 2).
  uint32_t memory_pages = 4;
  /// Share of the in-memory region that accepts in-place updates.
  double mutable_fraction = 0.9;
  uint32_t value_size = 108;
  /// When false, HEAD moves only through explicit shift_head() calls (read cache).
  bool auto_evict = true;
  /// Frames used by scan() to stream disk-resident pages.
  uint32_t scan_frames = 4;
};

/// Text sidecar describing a log's record format: `<prefix>.meta`.
struct LogMeta {
  uint32_t key_size = 8;
  uint32_t value_size = 0;
  uint64_t page_size = 0;

  void write(const std::string& path) const;
  static LogMeta read(const std::string& path);
};

struct MarkerSnapshot {
  uint64_t begin;
  uint64_t head;
  uint64_t read_only;
  uint64_t tail;
};

/// Log-structured record store spanning memory and disk.
///
/// Address space regions, delimited by monotonic markers:
///   [BEGIN, HEAD)       stable: on the device only
///   [HEAD, READ_ONLY)   in memory, immutable
///   [READ_ONLY, TAIL)   in memory, in-place updatable
///
/// Records have a fixed size per log and never straddle a page. Marker moves
/// that change region classification (flush, eviction, truncation) take effect
/// through epoch trigger actions, so no protected thread observes memory being
/// reused under it.
class HybridLog {
 public:
  using RecordVisitor = std::function<void(Address, RecordRef)>;

  /// `device` may be null only for logs that never flush (auto_evict == false).
  HybridLog(const HybridLogConfig& config, LightEpoch& epoch, Device* device);
  ~HybridLog();
  HybridLog(const HybridLog&) = delete;
  HybridLog& operator=(const HybridLog&) = delete;

  const RecordLayout& layout() const { return layout_; }
  uint32_t record_size() const { return record_size_; }
  uint64_t page_size() const { return page_size_; }
  uint32_t memory_pages() const { return memory_pages_; }
  uint32_t mutable_pages() const { return mutable_pages_; }
  LightEpoch& epoch() const { return epoch_; }
  Device* device() const { return device_; }

  /// Reserves one zeroed record slot at the tail. Returns INVALID when the
  /// page buffer cannot admit a new page yet; refresh the epoch and retry.
  Address allocate();
  /// allocate() in a loop, refreshing the epoch between attempts.
  Address allocate_blocking();

  enum class Residency : uint8_t { InMemory, OnDisk, Stale };
  /// Classifies `address` and, when in memory, points `out` at its bytes.
  /// The caller must be protected for as long as it uses `out`.
  Residency resolve(Address address, RecordRef& out) const;
  /// Unchecked access to the frame backing `address` (caller guarantees residency).
  RecordRef record_at(Address address) const;

  /// Reads a record from the device. Completion gets StaleAddress when the
  /// address is (or becomes) truncated before the I/O completes.
  Device::Ticket read_record_async(Address address, std::function<void(Status, RecordCopy)> done);
  /// Blocking variant: leaves epoch protection while waiting.
  Status read_record(Address address, RecordCopy& out);

  /// Throws std::invalid_argument if the new value is below the current one
  /// or would break BEGIN <= HEAD <= READ_ONLY <= TAIL.
  void shift_read_only(uint64_t new_read_only);
  void shift_head(uint64_t new_head);
  /// Sets BEGIN, bumps num_truncs and schedules device truncation. Returns
  /// the new truncation count. Throws if `until` > HEAD.
  uint64_t truncate_begin(uint64_t until);

  uint64_t begin() const { return begin_.load(); }
  uint64_t head() const { return head_.load(); }
  uint64_t safe_head() const { return safe_head_.load(); }
  uint64_t read_only() const { return read_only_.load(); }
  uint64_t safe_read_only() const { return safe_read_only_.load(); }
  uint64_t tail() const { return tail_.load(); }
  uint64_t flushed_until() const { return flushed_until_.load(); }
  uint64_t num_truncs() const { return num_truncs_.load(); }
  MarkerSnapshot markers() const;
  /// Atomic (tail, num_truncs) pair: re-reads until num_truncs is stable around the tail read.
  std::pair<uint64_t, uint64_t> tail_and_truncs() const;

  /// Visits every valid record with address in [from, to) in address order.
  /// Disk-resident pages stream through `scan_frames` page buffers.
  Status scan(uint64_t from, uint64_t to, const RecordVisitor& visitor);

  /// Flushes everything below `until` (at most TAIL) and waits for it.
  void flush_until(uint64_t until);
  /// Flushes and evicts everything below `until`, waiting until it is safe.
  void evict_until(uint64_t until);
  /// Waits until all issued flush I/O has completed.
  void wait_for_flushes();

  /// First record slot at or after `address`.
  uint64_t slot_at_or_after(uint64_t address) const;
  /// Slot following the record at `address`.
  uint64_t next_slot(uint64_t address) const;
  uint64_t page_of(uint64_t address) const { return address / page_size_; }
  uint64_t page_start(uint64_t page) const { return page * page_size_; }
  uint64_t first_slot_of_page(uint64_t page) const {
    return page * page_size_ + (page == 0 ? Address::kFirstValidOffset : 0);
  }

  /// Reads [from, to) of the stable region of a device laid out by a log with
  /// the given format, without an open log. Used to verify on-disk contents.
  static Status scan_device(Device& device, const LogMeta& meta, uint64_t from, uint64_t to,
                            const RecordVisitor& visitor, uint32_t frames = 4);

  bool io_error() const { return io_error_.load(); }

 private:
  std::byte* frame_for_page(uint64_t page) const {
    return const_cast<std::byte*>(frames_.data()) + (page % memory_pages_) * page_size_;
  }
  bool frame_available(uint64_t page) const;
  void on_page_opened(uint64_t page);
  bool advance_read_only(uint64_t target);
  bool advance_head(uint64_t target);
  void on_safe_read_only(uint64_t target);
  void on_safe_head(uint64_t target);
  void try_advance_head();
  void issue_next_flush();
  void on_flush_done(uint64_t from, uint64_t to, bool ok);
  void spin_wait(const std::function<bool()>& done);

  static bool atomic_max(std::atomic<uint64_t>& a, uint64_t value, uint64_t* previous = nullptr);

  const RecordLayout layout_;
  const uint32_t record_size_;
  const uint64_t page_size_;
  const uint32_t memory_pages_;
  const uint32_t mutable_pages_;
  const bool auto_evict_;
  const uint32_t scan_frames_;
  LightEpoch& epoch_;
  Device* device_;
  AlignedBuffer frames_;

  alignas(64) std::atomic<uint64_t> tail_;
  alignas(64) std::atomic<uint64_t> begin_{Address::kFirstValidOffset};
  std::atomic<uint64_t> head_{Address::kFirstValidOffset};
  std::atomic<uint64_t> safe_head_{Address::kFirstValidOffset};
  std::atomic<uint64_t> read_only_{Address::kFirstValidOffset};
  std::atomic<uint64_t> safe_read_only_{Address::kFirstValidOffset};
  std::atomic<uint64_t> flushed_until_{Address::kFirstValidOffset};
  std::atomic<uint64_t> desired_head_{Address::kFirstValidOffset};
  std::atomic<uint64_t> num_truncs_{0};
  std::atomic<bool> io_error_{false};

  std::mutex head_mutex_;
  std::mutex flush_mutex_;
  std::deque<std::pair<uint64_t, uint64_t>> flush_queue_;
  bool flush_in_progress_ = false;
  std::atomic<uint64_t> outstanding_io_{0};
};

}  // namespace f2kv
