#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "f2kv/address.h"
#include "f2kv/key_hash.h"

namespace f2kv {

/// Fixed record shape of one log: 8-byte header, 8-byte key, value bytes,
/// padded to 8-byte alignment.
struct RecordLayout {
  static constexpr uint32_t kHeaderSize = 8;
  static constexpr uint32_t kKeySize = sizeof(Key);

  uint32_t value_size = 0;

  constexpr uint32_t value_offset() const { return kHeaderSize + kKeySize; }
  constexpr uint32_t size() const { return (kHeaderSize + kKeySize + value_size + 7) & ~7U; }
};

/// View over a record's bytes (in a log page, a frame, or a copy).
/// Header access is atomic; key and value are plain bytes.
class RecordRef {
 public:
  RecordRef() = default;
  RecordRef(std::byte* base, const RecordLayout& layout) : base_{base}, value_size_{layout.value_size} {}

  explicit operator bool() const { return base_ != nullptr; }
  std::byte* data() const { return base_; }

  std::atomic_ref<uint64_t> header_word() const {
    return std::atomic_ref<uint64_t>{*reinterpret_cast<uint64_t*>(base_)};
  }
  RecordHeader header() const { return RecordHeader{header_word().load()}; }
  void set_header(RecordHeader h) const { header_word().store(h.control); }

  Key key() const {
    Key k;
    std::memcpy(&k, base_ + RecordLayout::kHeaderSize, sizeof(Key));
    return k;
  }
  void set_key(Key k) const { std::memcpy(base_ + RecordLayout::kHeaderSize, &k, sizeof(Key)); }

  std::span<std::byte> value() const { return {base_ + RecordLayout::kHeaderSize + RecordLayout::kKeySize, value_size_}; }

  /// Sets the invalid bit atomically. Returns false if it was already set.
  bool mark_invalid() const {
    uint64_t old = header_word().fetch_or(RecordHeader::kInvalidBit);
    return (old & RecordHeader::kInvalidBit) == 0;
  }
  void clear_invalid() const { header_word().fetch_and(~RecordHeader::kInvalidBit); }

  /// Spins until the record's in-place lock is taken. Returns the header seen before locking.
  RecordHeader lock() const;
  /// Releases the lock and bumps the version.
  void unlock() const;

  /// Consistent copy of the value even while in-place writers are active.
  /// Returns the header observed with that value.
  RecordHeader read_value(std::span<std::byte> out) const;

 private:
  std::byte* base_ = nullptr;
  uint32_t value_size_ = 0;
};

/// Owned copy of a record (e.g. read from disk).
class RecordCopy {
 public:
  RecordCopy() = default;
  explicit RecordCopy(const RecordLayout& layout) : layout_{layout}, bytes_(layout.size()) {}
  RecordCopy(const RecordLayout& layout, const std::byte* src) : layout_{layout}, bytes_(src, src + layout.size()) {}

  RecordRef ref() { return RecordRef{bytes_.data(), layout_}; }
  RecordHeader header() const {
    uint64_t h;
    std::memcpy(&h, bytes_.data(), sizeof(h));
    return RecordHeader{h};
  }
  Key key() const {
    Key k;
    std::memcpy(&k, bytes_.data() + RecordLayout::kHeaderSize, sizeof(k));
    return k;
  }
  std::span<const std::byte> value() const {
    return {bytes_.data() + layout_.value_offset(), layout_.value_size};
  }
  std::span<const std::byte> bytes() const { return bytes_; }
  bool empty() const { return bytes_.empty(); }

 private:
  RecordLayout layout_{};
  std::vector<std::byte> bytes_;
};

}  // namespace f2kv
