#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>

#include "f2kv/cold_index.h"
#include "f2kv/device.h"
#include "f2kv/epoch.h"
#include "f2kv/hash_index.h"
#include "f2kv/hybrid_log.h"
#include "f2kv/read_cache.h"
#include "f2kv/record.h"
#include "f2kv/status.h"

namespace f2kv {

struct CompactionConfig {
  uint64_t hot_disk_budget = 5ULL << 30;
  uint64_t cold_disk_budget = 35ULL << 30;
  uint64_t chunk_disk_budget = 1ULL << 30;
  double trigger_fraction = 0.8;
  double compact_fraction = 0.1;
  /// Start monitor threads that compact when a log passes its trigger.
  bool background = false;
  uint32_t threads = 1;
  /// Source pages buffered by a compaction pass.
  uint32_t frames = 4;
  uint32_t poll_interval_ms = 2;
};

struct StoreConfig {
  uint32_t value_size = 108;

  uint64_t hot_index_buckets = 1ULL << 20;
  uint64_t hot_page_size = 32ULL << 20;
  uint32_t hot_memory_pages = 4;
  double mutable_fraction = 0.9;

  uint64_t cold_page_size = 32ULL << 20;
  uint32_t cold_memory_pages = 2;
  ColdIndexConfig cold_index{};

  bool read_cache = true;
  ReadCacheConfig read_cache_config{};

  CompactionConfig compaction{};

  /// Re-check the newly appended part of the cold log when a cold-log
  /// truncation raced with a cold lookup. Disable only to demonstrate the anomaly.
  bool false_absence_check = true;

  /// Directory for log files; empty keeps everything in memory devices.
  std::string directory;
  bool direct_io = true;
  Device::Options device_options{};
};

/// Optional externally owned devices (e.g. with test hooks installed).
struct StoreDevices {
  std::unique_ptr<Device> hot;
  std::unique_ptr<Device> cold;
  std::unique_ptr<Device> chunk;
};

struct StoreMetrics {
  uint64_t reads = 0;
  uint64_t read_hits = 0;
  uint64_t read_cache_hits = 0;
  uint64_t upserts = 0;
  uint64_t in_place_updates = 0;
  uint64_t deletes = 0;
  uint64_t rmws = 0;
  uint64_t upsert_retries = 0;
  uint64_t rmw_retries = 0;
  uint64_t false_absence_rescans = 0;
  uint64_t hot_compactions = 0;
  uint64_t cold_compactions = 0;
  uint64_t chunk_compactions = 0;
  uint64_t records_compacted = 0;
  uint64_t hot_num_truncs = 0;
  uint64_t cold_num_truncs = 0;
  uint64_t peak_compaction_frame_bytes = 0;
};

struct CompactionResult {
  uint64_t until = 0;
  uint64_t scanned = 0;
  uint64_t copied = 0;
  uint64_t aborted = 0;
  uint64_t elided = 0;
  uint64_t frame_bytes = 0;
};

/// Concurrent key-value store over a hot log (in-memory index), a cold log
/// (two-level index) and an optional read cache. All user operations are
/// synchronous and thread-safe.
class Store {
 public:
  using Updater = std::function<void(std::span<const std::byte> old_value, std::span<const std::byte> input,
                                     std::span<std::byte> new_value)>;
  using Initializer = std::function<void(Key key, std::span<const std::byte> input, std::span<std::byte> value)>;

  explicit Store(const StoreConfig& config);
  Store(const StoreConfig& config, StoreDevices devices);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  Status upsert(Key key, std::span<const std::byte> value);
  Status remove(Key key);
  /// `out` must hold value_size bytes.
  Status read(Key key, std::span<std::byte> out);
  Status rmw(Key key, std::span<const std::byte> input, const Updater& updater, const Initializer& initializer);

  /// Copies the live records of [hot BEGIN, until) into the cold log and truncates.
  CompactionResult compact_hot(uint64_t until, uint32_t threads = 1);
  /// Copies the live records of [cold BEGIN, until) to the cold tail and truncates.
  CompactionResult compact_cold(uint64_t until, uint32_t threads = 1);
  uint64_t compact_chunk_log(uint64_t until);

  /// Cold-log insert that succeeds only if no record for the key lies in
  /// (start, tail] of the cold chain. Used by cold-cold compaction.
  Status conditional_insert_cold(const RecordCopy& record, Address start);
  /// Hot-to-cold insert: aborted if the hot chain holds a newer record for the key.
  Status conditional_insert_hot_to_cold(const RecordCopy& record, Address start);

  /// Flushes the whole hot log and evicts it from memory.
  void flush_hot();
  /// Same for the cold log and the chunk log.
  void flush_cold();

  StoreMetrics metrics() const;
  const StoreConfig& config() const { return config_; }
  uint32_t value_size() const { return layout_.value_size; }
  uint32_t record_size() const { return layout_.size(); }

  LightEpoch& epoch() { return epoch_; }
  HybridLog& hot_log() { return *hot_log_; }
  HybridLog& cold_log() { return *cold_log_; }
  HashIndex& hot_index() { return *hot_index_; }
  ColdIndex& cold_index() { return *cold_index_; }
  ReadCache* read_cache() { return read_cache_.get(); }
  Device& hot_device() { return *devices_.hot; }
  Device& cold_device() { return *devices_.cold; }
  Device& chunk_device() { return *devices_.chunk; }

 private:
  struct Found;
  enum class Counter : uint32_t;

  static Found walk(HybridLog& log, Key key, Address from, uint64_t stop_at);
  // Chain walks. Both return the newest record for `key` in the given range.
  Found walk_hot(Key key, Address from, uint64_t stop_at);
  Found walk_cold(Key key, Address from, uint64_t stop_at);
  Found cold_lookup(Key key, uint64_t hash, uint64_t stop_at);
  Address hot_part(IndexEntry entry) const;

  Status append_hot(Key key, uint64_t hash, std::span<const std::byte> value, bool tombstone);
  Status rmw_attempt(Key key, uint64_t hash, std::span<const std::byte> input, const Updater& updater,
                     const Initializer& initializer);
  void cold_upsert(const RecordCopy& record);
  Found cold_read(Key key, uint64_t hash);
  /// Caches a record read from disk. `handle` is the hot entry seen at the
  /// start of the read (may be absent); `next_hot` is its hot part.
  void maybe_cache(Key key, uint64_t hash, const RecordCopy& record, EntryHandle& handle, Address next_hot,
                   uint64_t hot_truncs);

  CompactionResult compact(HybridLog& source, bool hot_source, uint64_t until, uint32_t threads);
  void wait_for_epoch_safety();

  void start_background();
  void stop_background();
  void monitor_hot();
  void monitor_cold();

  void throttle_writers();
  void count(Counter c, uint64_t n = 1);

  StoreConfig config_;
  RecordLayout layout_;
  // Declared first so it outlives every component that registers actions on it.
  LightEpoch epoch_;
  StoreDevices devices_;
  std::unique_ptr<HashIndex> hot_index_;
  std::unique_ptr<HybridLog> hot_log_;
  std::unique_ptr<HybridLog> cold_log_;
  std::unique_ptr<ColdIndex> cold_index_;
  std::unique_ptr<ReadCache> read_cache_;

  std::mutex hot_compaction_mutex_;
  std::mutex cold_compaction_mutex_;
  std::mutex chunk_compaction_mutex_;

  std::atomic<bool> stop_{false};
  std::mutex monitor_mutex_;
  std::condition_variable monitor_cv_;
  std::thread hot_monitor_;
  std::thread cold_monitor_;

  static constexpr uint32_t kShards = 64;
  static constexpr uint32_t kCounters = 17;
  struct alignas(64) Shard {
    std::atomic<uint64_t> values[kCounters];
  };
  std::unique_ptr<Shard[]> shards_;
  std::atomic<uint64_t> peak_frame_bytes_{0};
};

}  // namespace f2kv
