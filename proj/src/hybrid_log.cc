#include "f2kv/hybrid_log.h"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace f2kv {

namespace {

uint64_t round_down(uint64_t v, uint64_t a) { return v / a * a; }
uint64_t round_up(uint64_t v, uint64_t a) { return (v + a - 1) / a * a; }

uint32_t compute_mutable_pages(const HybridLogConfig& c) {
  auto m = static_cast<uint32_t>(std::floor(c.memory_pages * c.mutable_fraction));
  return std::clamp<uint32_t>(m, 1, c.memory_pages - 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// LogMeta

void LogMeta::write(const std::string& path) const {
  std::ofstream out{path, std::ios::trunc};
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "key_size " << key_size << "\n"
      << "value_size " << value_size << "\n"
      << "page_size " << page_size << "\n";
}

LogMeta LogMeta::read(const std::string& path) {
  std::ifstream in{path};
  if (!in) throw std::runtime_error("cannot read " + path);
  LogMeta meta;
  std::string name;
  uint64_t value = 0;
  while (in >> name >> value) {
    if (name == "key_size") meta.key_size = static_cast<uint32_t>(value);
    else if (name == "value_size") meta.value_size = static_cast<uint32_t>(value);
    else if (name == "page_size") meta.page_size = value;
  }
  if (meta.page_size == 0) throw std::runtime_error("malformed log metadata in " + path);
  return meta;
}

// ---------------------------------------------------------------------------
// HybridLog

HybridLog::HybridLog(const HybridLogConfig& config, LightEpoch& epoch, Device* device)
    : layout_{config.value_size},
      record_size_{layout_.size()},
      page_size_{config.page_size},
      memory_pages_{config.memory_pages},
      mutable_pages_{config.memory_pages >= 2 ? compute_mutable_pages(config) : 1},
      auto_evict_{config.auto_evict},
      scan_frames_{std::max<uint32_t>(1, config.scan_frames)},
      epoch_{epoch},
      device_{device} {
  if (memory_pages_ < 2) throw std::invalid_argument("hybrid log needs at least two in-memory pages");
  if (record_size_ + Address::kFirstValidOffset > page_size_) {
    throw std::invalid_argument("record does not fit in a page");
  }
  if (device_ == nullptr && auto_evict_) throw std::invalid_argument("an evicting log needs a device");
  if (device_ != nullptr && page_size_ % device_->sector_size() != 0) {
    throw std::invalid_argument("page size must be a multiple of the device sector size");
  }
  size_t align = device_ ? device_->sector_size() : 64;
  frames_ = AlignedBuffer(static_cast<size_t>(page_size_) * memory_pages_, std::max<size_t>(align, 4096));
  tail_.store(Address::kFirstValidOffset);
}

HybridLog::~HybridLog() {
  // Pending trigger actions and I/O completions reference this log.
  for (;;) {
    if (epoch_.is_protected()) {
      epoch_.refresh();
    } else {
      epoch_.drain();
    }
    wait_for_flushes();
    if (epoch_.pending_actions() == 0 && outstanding_io_.load() == 0) break;
    std::this_thread::yield();
  }
}

bool HybridLog::atomic_max(std::atomic<uint64_t>& a, uint64_t value, uint64_t* previous) {
  uint64_t cur = a.load();
  while (cur < value) {
    if (a.compare_exchange_weak(cur, value)) {
      if (previous) *previous = cur;
      return true;
    }
  }
  if (previous) *previous = cur;
  return false;
}

MarkerSnapshot HybridLog::markers() const {
  MarkerSnapshot s;
  s.begin = begin_.load();
  s.head = head_.load();
  s.read_only = read_only_.load();
  s.tail = tail_.load();
  return s;
}

std::pair<uint64_t, uint64_t> HybridLog::tail_and_truncs() const {
  for (;;) {
    uint64_t t0 = num_truncs_.load();
    uint64_t tail = tail_.load();
    if (num_truncs_.load() == t0) return {tail, t0};
  }
}

uint64_t HybridLog::slot_at_or_after(uint64_t address) const {
  uint64_t page = page_of(address);
  uint64_t first = first_slot_of_page(page);
  if (address <= first) return first;
  uint64_t k = (address - first + record_size_ - 1) / record_size_;
  uint64_t slot = first + k * record_size_;
  if (slot + record_size_ > page_start(page + 1)) return first_slot_of_page(page + 1);
  return slot;
}

uint64_t HybridLog::next_slot(uint64_t address) const {
  uint64_t n = address + record_size_;
  uint64_t page_end = page_start(page_of(address) + 1);
  if (n + record_size_ > page_end) return first_slot_of_page(page_of(address) + 1);
  return n;
}

bool HybridLog::frame_available(uint64_t page) const {
  if (page < memory_pages_) return true;
  return safe_head_.load() >= page_start(page - memory_pages_ + 1);
}

Address HybridLog::allocate() {
  uint64_t cur = tail_.load();
  for (;;) {
    uint64_t page = page_of(cur);
    uint64_t offset = cur - page_start(page);
    uint64_t slot = cur;
    bool opens_page = offset == 0;
    if (offset + record_size_ > page_size_) {
      slot = page_start(page + 1);
      opens_page = true;
    }
    uint64_t slot_page = page_of(slot);
    if (opens_page && !frame_available(slot_page)) return Address::invalid();
    uint64_t next = slot + record_size_;
    if (tail_.compare_exchange_weak(cur, next)) {
      if (opens_page) on_page_opened(slot_page);
      return Address::log(slot);
    }
  }
}

Address HybridLog::allocate_blocking() {
  for (uint32_t spins = 0;; ++spins) {
    Address a = allocate();
    if (a.is_valid()) return a;
    if (epoch_.is_protected()) {
      epoch_.refresh();
    } else {
      epoch_.drain();
    }
    std::this_thread::yield();
  }
}

void HybridLog::on_page_opened(uint64_t page) {
  if (page + 1 > mutable_pages_) advance_read_only(page_start(page + 1 - mutable_pages_));
  if (page + 2 > memory_pages_) {
    atomic_max(desired_head_, page_start(page + 2 - memory_pages_));
    try_advance_head();
  }
}

HybridLog::Residency HybridLog::resolve(Address address, RecordRef& out) const {
  uint64_t a = address.offset();
  if (a < begin_.load()) return Residency::Stale;
  if (a >= head_.load()) {
    out = record_at(address);
    return Residency::InMemory;
  }
  return Residency::OnDisk;
}

RecordRef HybridLog::record_at(Address address) const {
  uint64_t a = address.offset();
  return RecordRef{frame_for_page(page_of(a)) + (a % page_size_), layout_};
}

void HybridLog::shift_read_only(uint64_t new_read_only) {
  if (new_read_only < read_only_.load()) throw std::invalid_argument("read-only marker cannot move backwards");
  if (new_read_only > tail_.load()) throw std::invalid_argument("read-only marker cannot pass the tail");
  advance_read_only(new_read_only);
}

void HybridLog::shift_head(uint64_t new_head) {
  if (new_head < head_.load()) throw std::invalid_argument("head marker cannot move backwards");
  if (new_head > read_only_.load()) throw std::invalid_argument("head marker cannot pass the read-only marker");
  if (device_ != nullptr && new_head > flushed_until_.load()) {
    throw std::invalid_argument("head marker cannot pass unflushed data");
  }
  advance_head(new_head);
}

bool HybridLog::advance_read_only(uint64_t target) {
  if (!atomic_max(read_only_, target)) return false;
  epoch_.bump_with_action([this, target] { on_safe_read_only(target); });
  return true;
}

void HybridLog::on_safe_read_only(uint64_t target) {
  uint64_t prev = 0;
  if (!atomic_max(safe_read_only_, target, &prev)) return;
  if (device_ == nullptr) {
    atomic_max(flushed_until_, target);
    try_advance_head();
    return;
  }
  {
    std::lock_guard lock{flush_mutex_};
    if (!flush_queue_.empty() && flush_queue_.back().second == prev) {
      flush_queue_.back().second = target;
    } else {
      flush_queue_.emplace_back(prev, target);
    }
  }
  issue_next_flush();
}

void HybridLog::issue_next_flush() {
  uint64_t from = 0;
  uint64_t to = 0;
  {
    std::lock_guard lock{flush_mutex_};
    if (flush_in_progress_ || flush_queue_.empty()) return;
    std::tie(from, to) = flush_queue_.front();
    flush_queue_.pop_front();
    flush_in_progress_ = true;
  }
  const uint64_t sector = device_->sector_size();
  struct Batch {
    std::atomic<uint32_t> remaining{0};
    std::atomic<bool> ok{true};
  };
  auto batch = std::make_shared<Batch>();
  std::vector<std::pair<uint64_t, uint64_t>> pieces;
  for (uint64_t p = page_of(from); p <= page_of(to - 1); ++p) {
    uint64_t lo = std::max(from, page_start(p));
    uint64_t hi = std::min(to, page_start(p + 1));
    pieces.emplace_back(round_down(lo, sector), round_up(hi, sector));
  }
  batch->remaining.store(static_cast<uint32_t>(pieces.size()));
  outstanding_io_.fetch_add(1);
  for (auto [lo, hi] : pieces) {
    std::byte* src = frame_for_page(page_of(lo)) + (lo % page_size_);
    device_->write_async(lo, std::span<const std::byte>{src, hi - lo}, [this, batch, from, to](IoStatus s) {
      if (s != IoStatus::Ok) batch->ok.store(false);
      if (batch->remaining.fetch_sub(1) == 1) {
        on_flush_done(from, to, batch->ok.load());
        outstanding_io_.fetch_sub(1);
      }
    });
  }
}

void HybridLog::on_flush_done(uint64_t /*from*/, uint64_t to, bool ok) {
  if (!ok) io_error_.store(true);
  {
    std::lock_guard lock{flush_mutex_};
    atomic_max(flushed_until_, to);
    flush_in_progress_ = false;
  }
  try_advance_head();
  issue_next_flush();
}

void HybridLog::try_advance_head() {
  if (!auto_evict_) return;
  uint64_t target = std::min({desired_head_.load(), flushed_until_.load(), read_only_.load()});
  if (target > head_.load()) advance_head(target);
}

bool HybridLog::advance_head(uint64_t target) {
  if (!atomic_max(head_, target)) return false;
  epoch_.bump_with_action([this, target] { on_safe_head(target); });
  return true;
}

void HybridLog::on_safe_head(uint64_t target) {
  std::lock_guard lock{head_mutex_};
  uint64_t old = safe_head_.load();
  if (target <= old) return;
  // Zero every frame whose page now lies entirely below the new head, so the
  // next page mapped onto it starts clean.
  for (uint64_t p = page_of(old); page_start(p + 1) <= target; ++p) {
    std::memset(frame_for_page(p), 0, page_size_);
  }
  safe_head_.store(target);
}

uint64_t HybridLog::truncate_begin(uint64_t until) {
  if (until > head_.load()) throw std::invalid_argument("cannot truncate above the head marker");
  // Counted first: a reader that sees the new BEGIN also sees the new count.
  uint64_t n = num_truncs_.fetch_add(1) + 1;
  atomic_max(begin_, until);
  if (device_ != nullptr) {
    epoch_.bump_with_action([this, until] { device_->truncate_below(until); });
  }
  return n;
}

void HybridLog::spin_wait(const std::function<bool()>& done) {
  while (!done()) {
    if (epoch_.is_protected()) {
      epoch_.refresh();
    } else {
      epoch_.drain();
    }
    std::this_thread::yield();
  }
}

void HybridLog::flush_until(uint64_t until) {
  until = std::min(until, tail_.load());
  if (until > read_only_.load()) advance_read_only(until);
  spin_wait([&] { return flushed_until_.load() >= until; });
}

void HybridLog::evict_until(uint64_t until) {
  until = std::min(until, tail_.load());
  flush_until(until);
  if (until > head_.load()) advance_head(until);
  spin_wait([&] { return safe_head_.load() >= until; });
}

void HybridLog::wait_for_flushes() {
  for (;;) {
    {
      std::lock_guard lock{flush_mutex_};
      if (!flush_in_progress_ && flush_queue_.empty()) return;
    }
    std::this_thread::yield();
  }
}

Device::Ticket HybridLog::read_record_async(Address address, std::function<void(Status, RecordCopy)> done) {
  const uint64_t a = address.offset();
  if (a < begin_.load()) {
    done(Status::StaleAddress, RecordCopy{});
    return 0;
  }
  const uint64_t sector = device_->sector_size();
  uint64_t lo = round_down(a, sector);
  uint64_t hi = round_up(a + record_size_, sector);
  auto buffer = std::make_shared<AlignedBuffer>(hi - lo, std::max<uint64_t>(sector, 4096));
  outstanding_io_.fetch_add(1);
  return device_->read_async(lo, buffer->span(), [this, a, lo, buffer, done = std::move(done)](IoStatus s) {
    if (a < begin_.load() || s == IoStatus::Truncated) {
      done(Status::StaleAddress, RecordCopy{});
    } else if (s != IoStatus::Ok) {
      done(Status::IoError, RecordCopy{});
    } else {
      done(Status::Ok, RecordCopy{layout_, buffer->data() + (a - lo)});
    }
    outstanding_io_.fetch_sub(1);
  });
}

Status HybridLog::read_record(Address address, RecordCopy& out) {
  std::mutex m;
  std::condition_variable cv;
  bool finished = false;
  Status result = Status::Ok;
  read_record_async(address, [&](Status s, RecordCopy copy) {
    std::lock_guard lock{m};
    result = s;
    out = std::move(copy);
    finished = true;
    cv.notify_one();
  });
  EpochSuspend suspend{epoch_};
  std::unique_lock lock{m};
  cv.wait(lock, [&] { return finished; });
  return result;
}

Status HybridLog::scan(uint64_t from, uint64_t to, const RecordVisitor& visitor) {
  EpochGuard guard{epoch_};
  if (from < begin_.load()) return Status::StaleAddress;
  to = std::min(to, tail_.load());
  uint64_t addr = slot_at_or_after(from);
  while (addr < to) {
    uint64_t page = page_of(addr);
    uint64_t page_end = std::min(page_start(page + 1), to);
    if (addr >= head_.load()) {
      // In-memory page: visit directly under protection.
      for (; addr < page_end && page_of(addr) == page; addr = next_slot(addr)) {
        RecordRef r = record_at(Address::log(addr));
        if (!r.header().invalid()) visitor(Address::log(addr), r);
      }
      epoch_.refresh();
      continue;
    }
    // Disk-resident pages: stream them through scan_frames_ buffers.
    uint64_t disk_end = std::min(to, head_.load());
    Status s;
    {
      EpochSuspend suspend{epoch_};
      LogMeta meta{8, layout_.value_size, page_size_};
      s = scan_device(*device_, meta, addr, disk_end, visitor, scan_frames_);
    }
    if (s != Status::Ok) return begin_.load() > addr ? Status::StaleAddress : s;
    if (begin_.load() > addr) return Status::StaleAddress;
    addr = slot_at_or_after(disk_end);
  }
  return Status::Ok;
}

Status HybridLog::scan_device(Device& device, const LogMeta& meta, uint64_t from, uint64_t to,
                              const RecordVisitor& visitor, uint32_t frames) {
  if (from >= to) return Status::Ok;
  const RecordLayout layout{meta.value_size};
  const uint64_t ps = meta.page_size;
  const uint64_t sector = device.sector_size();
  const uint64_t first_page = from / ps;
  const uint64_t last_page = (to - 1) / ps;

  struct Frame {
    AlignedBuffer buffer;
    uint64_t page = 0;
    uint64_t lo = 0;
    std::mutex m;
    std::condition_variable cv;
    bool ready = false;
    IoStatus status = IoStatus::Ok;
  };
  std::vector<std::unique_ptr<Frame>> ring;
  for (uint32_t i = 0; i < frames; ++i) {
    ring.push_back(std::make_unique<Frame>());
    ring.back()->buffer = AlignedBuffer(ps, std::max<uint64_t>(sector, 4096));
  }
  auto issue = [&](uint64_t page) {
    Frame& f = *ring[page % frames];
    f.page = page;
    f.ready = false;
    uint64_t lo = std::max(round_down(from, sector), page * ps);
    uint64_t hi = std::min(round_up(to, sector), (page + 1) * ps);
    f.lo = lo;
    device.read_async(lo, std::span<std::byte>{f.buffer.data(), hi - lo}, [&f](IoStatus s) {
      std::lock_guard lock{f.m};
      f.status = s;
      f.ready = true;
      f.cv.notify_one();
    });
  };
  auto wait = [](Frame& f) {
    std::unique_lock lock{f.m};
    f.cv.wait(lock, [&] { return f.ready; });
    return f.status;
  };

  uint64_t next_issue = first_page;
  for (; next_issue <= last_page && next_issue < first_page + frames; ++next_issue) issue(next_issue);
  Status result = Status::Ok;
  for (uint64_t page = first_page; page <= last_page; ++page) {
    Frame& f = *ring[page % frames];
    IoStatus s = wait(f);
    if (result == Status::Ok && s != IoStatus::Ok) {
      result = s == IoStatus::Truncated ? Status::StaleAddress : Status::IoError;
    }
    if (result == Status::Ok) {
      uint64_t page_first = page * ps + (page == 0 ? Address::kFirstValidOffset : 0);
      uint64_t addr = page_first;
      if (from > addr) addr = page_first + (from - page_first + layout.size() - 1) / layout.size() * layout.size();
      uint64_t end = std::min(to, (page + 1) * ps);
      for (; addr < end && addr + layout.size() <= (page + 1) * ps; addr += layout.size()) {
        RecordRef r{f.buffer.data() + (addr - f.lo), layout};
        if (!r.header().invalid()) visitor(Address::log(addr), r);
      }
    }
    if (next_issue <= last_page) issue(next_issue++);
  }
  return result;
}

}  // namespace f2kv
