#pragma once

#include <atomic>
#include <compare>
#include <cstdint>

namespace f2kv {

/// 48-bit packed reference into a log's address space: a 47-bit byte offset
/// plus the ReadCacheFlag (bit 47), which marks addresses that point into the
/// read cache rather than a log. The all-zero value is INVALID; real records
/// start at kFirstValidOffset.
class Address {
 public:
  static constexpr uint32_t kBits = 48;
  static constexpr uint64_t kMask = (1ULL << kBits) - 1;
  static constexpr uint64_t kReadCacheBit = 1ULL << 47;
  static constexpr uint64_t kOffsetMask = kReadCacheBit - 1;
  static constexpr uint64_t kMaxOffset = kOffsetMask;
  static constexpr uint64_t kFirstValidOffset = 64;

  constexpr Address() = default;
  constexpr explicit Address(uint64_t control) : control_{control & kMask} {}

  static constexpr Address invalid() { return Address{}; }
  static constexpr Address log(uint64_t offset) { return Address{offset & kOffsetMask}; }
  static constexpr Address read_cache(uint64_t offset) { return Address{(offset & kOffsetMask) | kReadCacheBit}; }

  constexpr uint64_t control() const { return control_; }
  constexpr uint64_t offset() const { return control_ & kOffsetMask; }
  constexpr bool in_read_cache() const { return (control_ & kReadCacheBit) != 0; }
  constexpr bool is_invalid() const { return offset() == 0; }
  constexpr bool is_valid() const { return offset() != 0; }

  friend constexpr bool operator==(Address a, Address b) { return a.control_ == b.control_; }

 private:
  uint64_t control_ = 0;
};

/// The 8-byte header at the front of every record.
///
///   bits  0..47  previous address in the hash chain (with ReadCacheFlag)
///   bit   48     invalid
///   bit   49     tombstone
///   bit   50     locked (an in-place writer holds the record)
///   bits 51..63  version, bumped on every in-place write (seqlock)
struct RecordHeader {
  static constexpr uint64_t kInvalidBit = 1ULL << 48;
  static constexpr uint64_t kTombstoneBit = 1ULL << 49;
  static constexpr uint64_t kLockBit = 1ULL << 50;
  static constexpr uint32_t kVersionShift = 51;
  static constexpr uint64_t kVersionMask = ((1ULL << 13) - 1) << kVersionShift;

  uint64_t control = 0;

  static constexpr RecordHeader make(Address previous, bool tombstone, bool invalid = false) {
    return RecordHeader{previous.control() | (tombstone ? kTombstoneBit : 0) | (invalid ? kInvalidBit : 0)};
  }

  constexpr Address previous() const { return Address{control & Address::kMask}; }
  constexpr bool invalid() const { return (control & kInvalidBit) != 0; }
  constexpr bool tombstone() const { return (control & kTombstoneBit) != 0; }
  constexpr bool locked() const { return (control & kLockBit) != 0; }
  constexpr uint64_t version_bits() const { return control & (kVersionMask | kLockBit); }
};

}  // namespace f2kv
