#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>

#include "f2kv/address.h"
#include "f2kv/device.h"
#include "f2kv/epoch.h"
#include "f2kv/hash_index.h"
#include "f2kv/hybrid_log.h"
#include "f2kv/status.h"

namespace f2kv {

struct ColdIndexConfig {
  /// Power of two.
  uint64_t num_chunks = 1ULL << 15;
  /// Power of two between 64 B and 4 KiB; 8 bytes per entry.
  uint32_t chunk_bytes = 256;
  uint64_t chunk_log_page_size = 32ULL << 20;
  uint32_t chunk_log_memory_pages = 3;
};

struct ChunkKey {
  uint64_t chunk_id;
  uint32_t offset;
};

/// Two-level index over the cold log. An in-memory hash table maps chunk ids
/// to chunk records; each chunk holds a fixed group of cold-log addresses and
/// lives in its own hybrid log (mostly on disk). All updates are
/// read-modify-writes of a whole chunk, guarded by an expected-entry check.
class ColdIndex {
 public:
  ColdIndex(const ColdIndexConfig& config, LightEpoch& epoch, Device& chunk_device);
  ~ColdIndex();

  ChunkKey chunk_key(uint64_t key_hash) const {
    return ChunkKey{key_hash & (num_chunks_ - 1),
                    static_cast<uint32_t>((key_hash >> chunk_bits_) & (entries_per_chunk_ - 1))};
  }
  uint32_t entries_per_chunk() const { return entries_per_chunk_; }
  uint64_t num_chunks() const { return num_chunks_; }

  /// Cold-log address for the hash, or NotFound. Costs at most one device read.
  Status find_entry(uint64_t key_hash, Address& out);

  /// Replaces the entry if it still equals `expected` (INVALID means
  /// "expect absent"). On Aborted, `current` holds the entry observed.
  Status modify_entry(uint64_t key_hash, Address expected, Address desired, Address* current = nullptr);

  /// Clears every entry that points below `min_valid` (after cold-log truncation).
  /// Returns the number of entries cleared.
  uint64_t scrub(uint64_t min_valid);

  /// Relocates live chunk records below `until` to the chunk-log tail and
  /// truncates the chunk log there. Returns the number of chunks moved.
  uint64_t compact_chunk_log(uint64_t until);

  /// Footprint of the in-memory chunk index (excludes the chunk log's page buffer).
  uint64_t in_memory_bytes() const { return chunk_index_.size_bytes(); }
  HybridLog& chunk_log() { return *chunk_log_; }
  const HashIndex& chunk_index() const { return chunk_index_; }

 private:
  enum class Edit : uint8_t { NoChange, Changed, Aborted };
  using ChunkEditor = std::function<Edit(std::span<uint64_t> entries)>;

  /// Read-modify-write of one chunk. The editor may run more than once and
  /// must use atomic compare-exchange on the entry words.
  Status update_chunk(uint64_t chunk_id, const ChunkEditor& editor, Address only_if_at = Address::invalid());
  std::span<uint64_t> entries_of(RecordRef record) const;

  const uint64_t num_chunks_;
  const uint32_t chunk_bits_;
  const uint32_t entries_per_chunk_;
  LightEpoch& epoch_;
  HashIndex chunk_index_;
  std::unique_ptr<HybridLog> chunk_log_;
};

}  // namespace f2kv
