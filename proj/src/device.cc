#include "f2kv/device.h"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <system_error>

namespace f2kv {

// ---------------------------------------------------------------------------
// IoExecutor

IoExecutor::IoExecutor(uint32_t threads) {
  workers_.reserve(threads);
  for (uint32_t i = 0; i < threads; ++i) workers_.emplace_back([this] { run(); });
}

IoExecutor::~IoExecutor() {
  {
    std::lock_guard lock{mutex_};
    stop_ = true;
  }
  cv_.notify_all();
  for (auto& t : workers_) t.join();
}

void IoExecutor::submit(std::function<void()> job) {
  if (workers_.empty()) {
    job();
    return;
  }
  {
    std::lock_guard lock{mutex_};
    queue_.push_back(std::move(job));
    ++in_flight_;
  }
  cv_.notify_one();
}

void IoExecutor::wait_idle() {
  if (workers_.empty()) return;
  std::unique_lock lock{mutex_};
  idle_cv_.wait(lock, [this] { return in_flight_ == 0; });
}

void IoExecutor::run() {
  for (;;) {
    std::function<void()> job;
    {
      std::unique_lock lock{mutex_};
      cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
      if (queue_.empty()) return;
      job = std::move(queue_.front());
      queue_.pop_front();
    }
    job();
    {
      std::lock_guard lock{mutex_};
      if (--in_flight_ == 0) idle_cv_.notify_all();
    }
  }
}

// ---------------------------------------------------------------------------
// Device

Device::Device(Options options) : options_{options}, executor_{options.io_threads} {
  if (options_.sector_size == 0 || (options_.sector_size & (options_.sector_size - 1)) != 0) {
    throw std::invalid_argument("sector size must be a power of two");
  }
  if (options_.segment_size == 0 || options_.segment_size % options_.sector_size != 0) {
    throw std::invalid_argument("segment size must be a multiple of the sector size");
  }
}

Device::~Device() = default;

void Device::check_alignment(uint64_t offset, size_t length) const {
  if (offset % options_.sector_size != 0 || length % options_.sector_size != 0) {
    throw std::invalid_argument("device I/O offset and length must be sector-aligned");
  }
}

void Device::set_read_hook(std::function<void(uint64_t, size_t)> hook) {
  std::lock_guard lock{hook_mutex_};
  read_hook_ = hook ? std::make_shared<std::function<void(uint64_t, size_t)>>(std::move(hook)) : nullptr;
}

IoStatus Device::write_sync(uint64_t offset, const std::byte* data, size_t len) {
  const uint64_t seg_size = options_.segment_size;
  while (len > 0) {
    uint64_t seg = offset / seg_size;
    uint64_t seg_off = offset % seg_size;
    size_t n = static_cast<size_t>(std::min<uint64_t>(len, seg_size - seg_off));
    IoStatus s = do_write(seg, seg_off, data, n);
    if (s != IoStatus::Ok) return s;
    offset += n;
    data += n;
    len -= n;
  }
  return IoStatus::Ok;
}

IoStatus Device::read_sync(uint64_t offset, std::byte* data, size_t len) {
  const uint64_t seg_size = options_.segment_size;
  while (len > 0) {
    uint64_t seg = offset / seg_size;
    uint64_t seg_off = offset % seg_size;
    size_t n = static_cast<size_t>(std::min<uint64_t>(len, seg_size - seg_off));
    IoStatus s = do_read(seg, seg_off, data, n);
    if (s != IoStatus::Ok) return s;
    offset += n;
    data += n;
    len -= n;
  }
  return IoStatus::Ok;
}

Device::Ticket Device::write_async(uint64_t offset, std::span<const std::byte> buffer, Callback done) {
  check_alignment(offset, buffer.size());
  Ticket ticket = next_ticket_.fetch_add(1);
  executor_.submit([this, offset, buffer, done = std::move(done)] {
    IoStatus s = write_sync(offset, buffer.data(), buffer.size());
    if (s == IoStatus::Ok) {
      bytes_written_.fetch_add(buffer.size(), std::memory_order_relaxed);
      write_ops_.fetch_add(1, std::memory_order_relaxed);
    }
    done(s);
  });
  return ticket;
}

Device::Ticket Device::read_async(uint64_t offset, std::span<std::byte> buffer, Callback done) {
  check_alignment(offset, buffer.size());
  Ticket ticket = next_ticket_.fetch_add(1);
  std::shared_ptr<std::function<void(uint64_t, size_t)>> hook;
  {
    std::lock_guard lock{hook_mutex_};
    hook = read_hook_;
  }
  executor_.submit([this, offset, buffer, hook = std::move(hook), done = std::move(done)] {
    if (hook) (*hook)(offset, buffer.size());
    IoStatus s = read_sync(offset, buffer.data(), buffer.size());
    if (s == IoStatus::Ok) {
      bytes_read_.fetch_add(buffer.size(), std::memory_order_relaxed);
      read_ops_.fetch_add(1, std::memory_order_relaxed);
    }
    done(s);
  });
  return ticket;
}

void Device::truncate_below(uint64_t offset) {
  uint64_t seg = offset / options_.segment_size;
  uint64_t prev = truncated_below_.load();
  while (seg > prev && !truncated_below_.compare_exchange_weak(prev, seg)) {
  }
  if (seg > prev) do_drop_segments_below(seg);
}

IoStats Device::stats() const {
  return IoStats{bytes_read_.load(), bytes_written_.load(), read_ops_.load(), write_ops_.load()};
}

// ---------------------------------------------------------------------------
// MemoryDevice

MemoryDevice::MemoryDevice(Options options) : Device{options} {}

MemoryDevice::~MemoryDevice() { executor_.wait_idle(); }

size_t MemoryDevice::segment_count() const {
  std::lock_guard lock{mutex_};
  return segments_.size();
}

std::shared_ptr<MemoryDevice::Segment> MemoryDevice::segment(uint64_t index, bool create) {
  std::lock_guard lock{mutex_};
  auto it = segments_.find(index);
  if (it != segments_.end()) return it->second;
  if (!create) return nullptr;
  auto seg = std::make_shared<Segment>();
  segments_.emplace(index, seg);
  return seg;
}

IoStatus MemoryDevice::do_write(uint64_t segment_index, uint64_t seg_offset, const std::byte* data, size_t len) {
  auto seg = segment(segment_index, true);
  const uint32_t sector = options_.sector_size;
  std::lock_guard lock{seg->mutex};
  if (seg->bytes.size() < seg_offset + len) {
    seg->bytes.resize(seg_offset + len);
    seg->written.resize((seg_offset + len) / sector, false);
  }
  std::memcpy(seg->bytes.data() + seg_offset, data, len);
  for (uint64_t s = seg_offset / sector; s < (seg_offset + len) / sector; ++s) seg->written[s] = true;
  return IoStatus::Ok;
}

IoStatus MemoryDevice::do_read(uint64_t segment_index, uint64_t seg_offset, std::byte* data, size_t len) {
  auto seg = segment(segment_index, false);
  if (!seg) return IoStatus::Unwritten;
  const uint32_t sector = options_.sector_size;
  std::lock_guard lock{seg->mutex};
  if (seg->bytes.size() < seg_offset + len) return IoStatus::Unwritten;
  for (uint64_t s = seg_offset / sector; s < (seg_offset + len) / sector; ++s) {
    if (!seg->written[s]) return IoStatus::Unwritten;
  }
  std::memcpy(data, seg->bytes.data() + seg_offset, len);
  return IoStatus::Ok;
}

void MemoryDevice::do_drop_segments_below(uint64_t segment_index) {
  std::lock_guard lock{mutex_};
  segments_.erase(segments_.begin(), segments_.lower_bound(segment_index));
}

// ---------------------------------------------------------------------------
// FileDevice

FileDevice::Segment::~Segment() {
  if (fd >= 0) ::close(fd);
}

FileDevice::FileDevice(std::string prefix, Options options, bool direct_io)
    : Device{options}, prefix_{std::move(prefix)}, want_direct_{direct_io} {}

FileDevice::~FileDevice() { executor_.wait_idle(); }

std::string FileDevice::segment_path(uint64_t segment) const {
  return prefix_ + ".log." + std::to_string(segment);
}

size_t FileDevice::segment_count() const {
  std::lock_guard lock{mutex_};
  return segments_.size();
}

std::shared_ptr<FileDevice::Segment> FileDevice::segment(uint64_t index, bool create) {
  std::lock_guard lock{mutex_};
  if (index < dropped_below_) return nullptr;
  auto it = segments_.find(index);
  if (it != segments_.end()) return it->second;

  std::string path = segment_path(index);
  int flags = O_RDWR | (create ? O_CREAT : 0);
  int fd = -1;
#ifdef O_DIRECT
  if (want_direct_) {
    fd = ::open(path.c_str(), flags | O_DIRECT, 0644);
    if (fd >= 0) direct_active_.store(true);
  }
#endif
  if (fd < 0) fd = ::open(path.c_str(), flags, 0644);
  if (fd < 0) {
    if (!create && errno == ENOENT) return nullptr;
    throw std::system_error(errno, std::generic_category(), "open " + path);
  }
  auto seg = std::make_shared<Segment>();
  seg->fd = fd;
  seg->path = path;
  struct stat st {};
  if (::fstat(fd, &st) == 0) seg->written_end.store(static_cast<uint64_t>(st.st_size));
  segments_.emplace(index, seg);
  return seg;
}

IoStatus FileDevice::do_write(uint64_t segment_index, uint64_t seg_offset, const std::byte* data, size_t len) {
  auto seg = segment(segment_index, true);
  if (!seg) return IoStatus::Truncated;
  size_t done = 0;
  while (done < len) {
    ssize_t n = ::pwrite(seg->fd, data + done, len - done, static_cast<off_t>(seg_offset + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      return IoStatus::Failed;
    }
    done += static_cast<size_t>(n);
  }
  uint64_t end = seg_offset + len;
  uint64_t prev = seg->written_end.load();
  while (end > prev && !seg->written_end.compare_exchange_weak(prev, end)) {
  }
  return IoStatus::Ok;
}

IoStatus FileDevice::do_read(uint64_t segment_index, uint64_t seg_offset, std::byte* data, size_t len) {
  auto seg = segment(segment_index, false);
  if (!seg) {
    std::lock_guard lock{mutex_};
    return segment_index < dropped_below_ ? IoStatus::Truncated : IoStatus::Unwritten;
  }
  if (seg_offset + len > seg->written_end.load()) return IoStatus::Unwritten;
  size_t done = 0;
  while (done < len) {
    ssize_t n = ::pread(seg->fd, data + done, len - done, static_cast<off_t>(seg_offset + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      return IoStatus::Failed;
    }
    if (n == 0) return IoStatus::Unwritten;
    done += static_cast<size_t>(n);
  }
  return IoStatus::Ok;
}

void FileDevice::do_drop_segments_below(uint64_t segment_index) {
  std::vector<std::shared_ptr<Segment>> dropped;
  {
    std::lock_guard lock{mutex_};
    // Segments that exist on disk but were never opened in this process.
    for (uint64_t s = dropped_below_; s < segment_index; ++s) {
      if (segments_.count(s) == 0) ::unlink(segment_path(s).c_str());
    }
    dropped_below_ = std::max(dropped_below_, segment_index);
    for (auto it = segments_.begin(); it != segments_.end() && it->first < segment_index;) {
      dropped.push_back(it->second);
      it = segments_.erase(it);
    }
  }
  // In-flight reads keep their shared_ptr (and fd) alive; the file name goes now.
  for (auto& seg : dropped) ::unlink(seg->path.c_str());
}

}  // namespace f2kv
