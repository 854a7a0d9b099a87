#include "f2kv/record.h"

#include <thread>

namespace f2kv {

namespace {
inline void cpu_relax(uint32_t& spins) {
  if (++spins % 64 == 0) std::this_thread::yield();
}
}  // namespace

RecordHeader RecordRef::lock() const {
  auto word = header_word();
  uint32_t spins = 0;
  uint64_t h = word.load();
  for (;;) {
    if ((h & RecordHeader::kLockBit) != 0) {
      cpu_relax(spins);
      h = word.load();
      continue;
    }
    if (word.compare_exchange_weak(h, h | RecordHeader::kLockBit)) return RecordHeader{h};
  }
}

void RecordRef::unlock() const {
  auto word = header_word();
  uint64_t h = word.load();
  for (;;) {
    uint64_t version = ((h & RecordHeader::kVersionMask) >> RecordHeader::kVersionShift) + 1;
    uint64_t next = (h & ~(RecordHeader::kLockBit | RecordHeader::kVersionMask)) |
                    ((version << RecordHeader::kVersionShift) & RecordHeader::kVersionMask);
    if (word.compare_exchange_weak(h, next)) return;
  }
}

RecordHeader RecordRef::read_value(std::span<std::byte> out) const {
  auto word = header_word();
  auto src = value();
  uint32_t spins = 0;
  for (;;) {
    uint64_t before = word.load(std::memory_order_acquire);
    if ((before & RecordHeader::kLockBit) != 0) {
      cpu_relax(spins);
      continue;
    }
    std::memcpy(out.data(), src.data(), std::min(out.size(), src.size()));
    std::atomic_thread_fence(std::memory_order_acquire);
    uint64_t after = word.load(std::memory_order_relaxed);
    if (RecordHeader{before}.version_bits() == RecordHeader{after}.version_bits()) return RecordHeader{after};
  }
}

}  // namespace f2kv
