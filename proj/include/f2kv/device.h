#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace f2kv {

enum class IoStatus : uint8_t { Ok, Unwritten, Truncated, Failed };

struct IoStats {
  uint64_t bytes_read = 0;
  uint64_t bytes_written = 0;
  uint64_t read_ops = 0;
  uint64_t write_ops = 0;
};

/// Executes I/O requests either inline on the submitting thread (threads == 0)
/// or on a small pool of worker threads.
class IoExecutor {
 public:
  explicit IoExecutor(uint32_t threads);
  ~IoExecutor();
  IoExecutor(const IoExecutor&) = delete;
  IoExecutor& operator=(const IoExecutor&) = delete;

  void submit(std::function<void()> job);
  /// Blocks until every submitted job has finished.
  void wait_idle();
  uint32_t threads() const { return static_cast<uint32_t>(workers_.size()); }

 private:
  void run();

  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<std::function<void()>> queue_;
  uint64_t in_flight_ = 0;
  bool stop_ = false;
  std::vector<std::thread> workers_;
};

/// Sector-aligned storage behind one log's address space. Byte offset N of the
/// device holds log address N. Storage is split into fixed-size segments so a
/// dead prefix can be dropped a segment at a time.
class Device {
 public:
  using Callback = std::function<void(IoStatus)>;
  using Ticket = uint64_t;

  struct Options {
    uint64_t segment_size = 1ULL << 30;
    uint32_t sector_size = 4096;
    uint32_t io_threads = 2;
  };

  virtual ~Device();

  /// Throws std::invalid_argument on misaligned offset/length. `buffer` must
  /// stay valid until `done` fires. Completion may run on any thread.
  Ticket write_async(uint64_t offset, std::span<const std::byte> buffer, Callback done);
  Ticket read_async(uint64_t offset, std::span<std::byte> buffer, Callback done);
  /// Drops every whole segment that lies entirely below `offset`. Idempotent.
  void truncate_below(uint64_t offset);
  /// Waits for all outstanding I/O issued so far.
  void wait_idle() { executor_.wait_idle(); }

  IoStats stats() const;
  uint32_t sector_size() const { return options_.sector_size; }
  uint64_t segment_size() const { return options_.segment_size; }
  /// Number of segments currently held.
  virtual size_t segment_count() const = 0;

  /// Test hook: runs on the I/O path before every read executes (e.g. to inject delay).
  void set_read_hook(std::function<void(uint64_t offset, size_t length)> hook);

 protected:
  explicit Device(Options options);

  // Synchronous primitives over [offset, offset+len) within one segment.
  virtual IoStatus do_write(uint64_t segment, uint64_t seg_offset, const std::byte* data, size_t len) = 0;
  virtual IoStatus do_read(uint64_t segment, uint64_t seg_offset, std::byte* data, size_t len) = 0;
  virtual void do_drop_segments_below(uint64_t segment) = 0;

  void check_alignment(uint64_t offset, size_t length) const;

  Options options_;

 private:
  IoStatus write_sync(uint64_t offset, const std::byte* data, size_t len);
  IoStatus read_sync(uint64_t offset, std::byte* data, size_t len);

  std::atomic<uint64_t> next_ticket_{1};
  std::atomic<uint64_t> bytes_read_{0};
  std::atomic<uint64_t> bytes_written_{0};
  std::atomic<uint64_t> read_ops_{0};
  std::atomic<uint64_t> write_ops_{0};
  std::atomic<uint64_t> truncated_below_{0};
  std::shared_ptr<std::function<void(uint64_t, size_t)>> read_hook_;
  mutable std::mutex hook_mutex_;

 protected:
  // Declared last so worker threads stop before derived state goes away;
  // derived destructors call executor_.wait_idle() first.
  IoExecutor executor_;
};

/// RAM-backed device. Used as the test double and for purely in-memory runs.
class MemoryDevice final : public Device {
 public:
  explicit MemoryDevice(Options options);
  MemoryDevice() : MemoryDevice(Options{}) {}
  ~MemoryDevice() override;
  size_t segment_count() const override;

 protected:
  IoStatus do_write(uint64_t segment, uint64_t seg_offset, const std::byte* data, size_t len) override;
  IoStatus do_read(uint64_t segment, uint64_t seg_offset, std::byte* data, size_t len) override;
  void do_drop_segments_below(uint64_t segment) override;

 private:
  struct Segment {
    std::mutex mutex;
    std::vector<std::byte> bytes;
    std::vector<bool> written;  // per sector
  };
  std::shared_ptr<Segment> segment(uint64_t index, bool create);

  mutable std::mutex mutex_;
  std::map<uint64_t, std::shared_ptr<Segment>> segments_;
};

/// File-backed device: `<prefix>.log.<segment_number>` files of raw pages.
/// Opens with O_DIRECT when requested and supported, buffered otherwise.
class FileDevice final : public Device {
 public:
  FileDevice(std::string prefix, Options options, bool direct_io = true);
  ~FileDevice() override;
  size_t segment_count() const override;
  bool direct_io_active() const { return direct_active_.load(); }
  const std::string& prefix() const { return prefix_; }
  std::string segment_path(uint64_t segment) const;

 protected:
  IoStatus do_write(uint64_t segment, uint64_t seg_offset, const std::byte* data, size_t len) override;
  IoStatus do_read(uint64_t segment, uint64_t seg_offset, std::byte* data, size_t len) override;
  void do_drop_segments_below(uint64_t segment) override;

 private:
  struct Segment {
    ~Segment();
    int fd = -1;
    std::atomic<uint64_t> written_end{0};
    std::string path;
  };
  std::shared_ptr<Segment> segment(uint64_t index, bool create);

  std::string prefix_;
  bool want_direct_;
  std::atomic<bool> direct_active_{false};
  mutable std::mutex mutex_;
  std::map<uint64_t, std::shared_ptr<Segment>> segments_;
  uint64_t dropped_below_ = 0;
};

}  // namespace f2kv
