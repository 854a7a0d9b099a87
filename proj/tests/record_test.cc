#include <gtest/gtest.h>

#include <atomic>
#include <thread>
#include <vector>

#include "f2kv/record.h"

namespace f2kv {
namespace {

TEST(Address, ReadCacheBitAndValidity) {
  EXPECT_TRUE(Address::invalid().is_invalid());
  Address a = Address::log(4096);
  Address c = Address::read_cache(4096);
  EXPECT_FALSE(a.in_read_cache());
  EXPECT_TRUE(c.in_read_cache());
  EXPECT_EQ(a.offset(), c.offset());
  EXPECT_NE(a, c);
}

TEST(RecordHeader, FieldsAreIndependent) {
  for (bool tomb : {false, true}) {
    for (bool inv : {false, true}) {
      RecordHeader h = RecordHeader::make(Address::read_cache(123456), tomb, inv);
      EXPECT_EQ(h.previous(), Address::read_cache(123456));
      EXPECT_EQ(h.tombstone(), tomb);
      EXPECT_EQ(h.invalid(), inv);
      EXPECT_FALSE(h.locked());
    }
  }
}

TEST(RecordLayout, SizeIsPaddedToEightBytes) {
  EXPECT_EQ(RecordLayout{108}.size(), 128u);
  EXPECT_EQ(RecordLayout{8}.size(), 24u);
  EXPECT_EQ(RecordLayout{9}.size(), 32u);
}

TEST(RecordRef, InvalidBitToggles) {
  RecordLayout layout{8};
  std::vector<std::byte> bytes(layout.size());
  RecordRef r{bytes.data(), layout};
  r.set_header(RecordHeader::make(Address::log(64), false));
  EXPECT_TRUE(r.mark_invalid());
  EXPECT_FALSE(r.mark_invalid());
  EXPECT_TRUE(r.header().invalid());
  r.clear_invalid();
  EXPECT_FALSE(r.header().invalid());
  EXPECT_EQ(r.header().previous(), Address::log(64));
}

// Property: a reader never observes a value torn between two writers' patterns.
TEST(RecordRef, ReadValueNeverTorn) {
  RecordLayout layout{64};
  alignas(8) std::vector<std::byte> bytes(layout.size());
  RecordRef r{bytes.data(), layout};
  r.set_header(RecordHeader::make(Address::invalid(), false));
  std::atomic<bool> stop{false};
  std::vector<std::thread> writers;
  for (int w = 0; w < 2; ++w) {
    writers.emplace_back([&, w] {
      for (uint8_t i = 0; !stop.load(); ++i) {
        r.lock();
        std::memset(r.value().data(), (w * 100 + i % 100), r.value().size());
        r.unlock();
      }
    });
  }
  std::vector<std::byte> out(64);
  uint64_t torn = 0;
  for (int i = 0; i < 200000; ++i) {
    r.read_value(out);
    for (auto b : out) {
      if (b != out[0]) {
        ++torn;
        break;
      }
    }
  }
  stop = true;
  for (auto& w : writers) w.join();
  EXPECT_EQ(torn, 0u);
  EXPECT_FALSE(r.header().locked());
}

}  // namespace
}  // namespace f2kv
