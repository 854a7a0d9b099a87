#include "f2kv/bench/workload.h"

#include <pthread.h>
#include <sched.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "json.hpp"

namespace f2kv::bench {

OpMix mix_fractions(Mix mix) {
  switch (mix) {
    case Mix::A:
      return {0.5, 0.5, 0, 0};
    case Mix::B:
      return {0.95, 0.05, 0, 0};
    case Mix::C:
      return {1.0, 0, 0, 0};
    case Mix::D:
      return {0.95, 0, 0.05, 0};
    case Mix::F:
      return {0.5, 0, 0, 0.5};
  }
  return {};
}

Mix parse_mix(const std::string& text) {
  if (text == "A") return Mix::A;
  if (text == "B") return Mix::B;
  if (text == "C") return Mix::C;
  if (text == "D") return Mix::D;
  if (text == "F") return Mix::F;
  throw std::invalid_argument("unknown workload: " + text);
}

std::string mix_name(Mix mix) { return std::string(1, "ABCDF"[static_cast<int>(mix)]); }

void WorkloadSpec::validate() const {
  distribution.validate();
  if (key_count == 0) throw std::invalid_argument("key count must be positive");
  if (thread_count == 0) throw std::invalid_argument("thread count must be positive");
  if (value_size < sizeof(uint64_t)) throw std::invalid_argument("value size must hold at least 8 bytes");
  OpMix m = mix_fractions(mix);
  double total = m.read + m.update + m.insert + m.rmw;
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("operation fractions must sum to 1");
}

// ---------------------------------------------------------------------------
// Store sizing

namespace {

uint64_t pow2_floor(uint64_t x) { return x == 0 ? 0 : std::bit_floor(x); }
uint64_t pow2_ceil(uint64_t x) { return std::bit_ceil(std::max<uint64_t>(x, 1)); }

}  // namespace

uint64_t final_key_count(const WorkloadSpec& spec) {
  const double inserts = mix_fractions(spec.mix).insert * static_cast<double>(spec.op_count + spec.warmup_ops);
  return spec.key_count + static_cast<uint64_t>(std::ceil(inserts));
}

StoreConfig store_config_for_budget(const BudgetSpec& b) {
  StoreConfig c;
  c.value_size = b.value_size;
  c.directory = b.directory;
  const uint64_t rs = RecordLayout{b.value_size}.size();
  const uint64_t dataset = b.key_count * rs;
  const uint64_t hot_disk = b.hot_disk != 0 ? b.hot_disk : std::max<uint64_t>(dataset / 10, 1ULL << 20);
  const uint64_t cold_disk = b.cold_disk != 0 ? b.cold_disk : std::max<uint64_t>(dataset * 4, 16ULL << 20);

  // Read cache.
  c.read_cache = b.read_cache > 0;
  uint64_t used = 0;
  if (c.read_cache) {
    uint64_t page = std::clamp<uint64_t>(pow2_floor(b.read_cache / 8), 64 << 10, 2 << 20);
    c.read_cache_config.page_size = page;
    c.read_cache_config.capacity_bytes = std::max<uint64_t>(b.read_cache / page, 2) * page;
    used += c.read_cache_config.capacity_bytes + page;
  }

  // Hot index: entries for every key the hot log (plus its page buffer) or
  // the cache can hold, two to four per bucket on average, plus the eighth
  // as many overflow buckets the index allocates.
  const uint64_t cache_records = c.read_cache ? c.read_cache_config.capacity_bytes / rs : 0;
  const uint64_t hot_entries = std::min(b.key_count, (hot_disk + b.memory_budget) / rs + cache_records);
  c.hot_index_buckets = std::max<uint64_t>(pow2_floor(hot_entries / 2), 1 << 8);
  used += c.hot_index_buckets * 64 + c.hot_index_buckets / 8 * 64;

  // Cold index: about one entry per two chunk slots keeps chains short.
  const uint32_t entries_per_chunk = b.chunk_size / 8;
  c.cold_index.chunk_bytes = b.chunk_size;
  c.cold_index.num_chunks = std::max<uint64_t>(pow2_ceil(b.key_count * 2 / entries_per_chunk), 64);
  c.cold_index.chunk_log_page_size = 64 << 10;
  c.cold_index.chunk_log_memory_pages = 3;
  used += c.cold_index.num_chunks / 4 * 64;
  used += c.cold_index.chunk_log_page_size * c.cold_index.chunk_log_memory_pages;

  // Cold log tail.
  c.cold_page_size = 64 << 10;
  c.cold_memory_pages = 2;
  used += c.cold_page_size * c.cold_memory_pages;

  // The rest is the hot log's page buffer.
  if (b.memory_budget < used + 3 * (64 << 10)) {
    throw std::invalid_argument("memory budget of " + std::to_string(b.memory_budget) +
                                " bytes is too small; fixed structures alone need " + std::to_string(used));
  }
  const uint64_t hot_memory = b.memory_budget - used;
  c.hot_page_size = std::clamp<uint64_t>(pow2_floor(hot_memory / 8), 64 << 10, 32 << 20);
  c.hot_memory_pages = static_cast<uint32_t>(std::max<uint64_t>(hot_memory / c.hot_page_size, 3));

  c.compaction.background = b.background_compaction;
  c.compaction.threads = b.compaction_threads;
  c.compaction.hot_disk_budget = hot_disk;
  c.compaction.cold_disk_budget = cold_disk;
  c.compaction.chunk_disk_budget = std::max<uint64_t>(c.cold_index.num_chunks * (b.chunk_size + 16) * 4, 4 << 20);
  c.device_options.segment_size = std::clamp<uint64_t>(pow2_floor(hot_disk / 4), 4 << 20, 1ULL << 30);
  return c;
}

// ---------------------------------------------------------------------------
// Driver

void fill_value(std::span<std::byte> value, uint64_t key, uint64_t sequence) {
  uint64_t words[2] = {key, sequence};
  std::memset(value.data(), 0, value.size());
  std::memcpy(value.data(), words, std::min(value.size(), sizeof(words)));
}

namespace {

void pin_to_cpu(uint32_t index) {
  const uint32_t cpus = std::max(1u, std::thread::hardware_concurrency());
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(index % cpus, &set);
  pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
}

void add_one(std::span<const std::byte> old_value, std::span<const std::byte> input, std::span<std::byte> out) {
  std::memcpy(out.data(), old_value.data(), out.size());
  uint64_t v = 0;
  uint64_t d = 0;
  std::memcpy(&v, old_value.data() + 8, sizeof(v));
  std::memcpy(&d, input.data(), sizeof(d));
  v += d;
  std::memcpy(out.data() + 8, &v, sizeof(v));
}

void init_one(Key key, std::span<const std::byte> input, std::span<std::byte> out) {
  uint64_t d = 0;
  std::memcpy(&d, input.data(), sizeof(d));
  fill_value(out, key, d);
}

struct PhaseCounters {
  std::atomic<uint64_t> returned{0};
  std::atomic<uint64_t> not_found{0};
  std::atomic<uint64_t> writes{0};
};

/// Runs `ops` operations split across the spec's threads.
void run_phase(Store& store, const WorkloadSpec& spec, uint64_t ops, uint64_t seed_offset,
               std::atomic<uint64_t>& live_keys, PhaseCounters& counters) {
  const OpMix mix = mix_fractions(spec.mix);
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (uint32_t t = 0; t < spec.thread_count; ++t) {
    const uint64_t share = ops / spec.thread_count + (t < ops % spec.thread_count ? 1 : 0);
    workers.emplace_back([&, t, share] {
      if (spec.pin_threads) pin_to_cpu(t);
      const uint64_t seed = spec.seed * 1'000'003 + seed_offset * 7919 + t;
      KeyGenerator keys{spec.distribution, spec.key_count, seed};
      std::uniform_real_distribution<double> coin{0.0, 1.0};
      std::vector<std::byte> value(spec.value_size);
      uint64_t one = 1;
      std::span<const std::byte> input{reinterpret_cast<const std::byte*>(&one), sizeof(one)};
      uint64_t returned = 0;
      uint64_t not_found = 0;
      uint64_t writes = 0;
      for (uint64_t i = 0; i < share && !failed.load(std::memory_order_relaxed); ++i) {
        const double p = coin(keys.rng());
        Status s;
        if (p < mix.read) {
          s = store.read(keys.next(live_keys.load(std::memory_order_relaxed)), value);
          if (s == Status::Ok) ++returned;
          if (s == Status::NotFound) {
            ++not_found;
            s = Status::Ok;
          }
        } else if (p < mix.read + mix.update) {
          Key k = keys.next(live_keys.load(std::memory_order_relaxed));
          fill_value(value, k, i);
          s = store.upsert(k, value);
          ++writes;
        } else if (p < mix.read + mix.update + mix.insert) {
          Key k = live_keys.fetch_add(1);
          fill_value(value, k, i);
          s = store.upsert(k, value);
          ++writes;
        } else {
          s = store.rmw(keys.next(live_keys.load(std::memory_order_relaxed)), input, add_one, init_one);
          ++writes;
        }
        if (s != Status::Ok) {
          std::lock_guard lock{failure_mutex};
          failed.store(true);
          failure = "operation failed with status " + std::string{to_string(s)};
        }
      }
      counters.returned += returned;
      counters.not_found += not_found;
      counters.writes += writes;
    });
  }
  for (auto& w : workers) w.join();
  if (failed.load()) throw std::runtime_error(failure);
}

IoStats device_totals(Store& store) {
  IoStats total;
  for (Device* d : {&store.hot_device(), &store.cold_device(), &store.chunk_device()}) {
    IoStats s = d->stats();
    total.bytes_read += s.bytes_read;
    total.bytes_written += s.bytes_written;
    total.read_ops += s.read_ops;
    total.write_ops += s.write_ops;
  }
  return total;
}

}  // namespace

void load(Store& store, const WorkloadSpec& spec) {
  std::vector<std::thread> loaders;
  std::atomic<uint64_t> next{0};
  std::atomic<bool> failed{false};
  for (uint32_t t = 0; t < spec.thread_count; ++t) {
    loaders.emplace_back([&, t] {
      if (spec.pin_threads) pin_to_cpu(t);
      std::vector<std::byte> value(spec.value_size);
      constexpr uint64_t kBatch = 1024;
      for (;;) {
        uint64_t from = next.fetch_add(kBatch);
        if (from >= spec.key_count) return;
        for (uint64_t k = from; k < std::min(from + kBatch, spec.key_count); ++k) {
          fill_value(value, k, 0);
          if (store.upsert(k, value) != Status::Ok) failed.store(true);
        }
      }
    });
  }
  for (auto& l : loaders) l.join();
  if (failed.load()) throw std::runtime_error("load phase failed");
}

RunReport run(Store& store, const WorkloadSpec& spec) {
  spec.validate();
  if (spec.load) load(store, spec);
  std::atomic<uint64_t> live_keys{spec.key_count};
  PhaseCounters warm;
  if (spec.warmup_ops > 0) run_phase(store, spec, spec.warmup_ops, 1, live_keys, warm);

  const StoreMetrics m0 = store.metrics();
  const IoStats io0 = device_totals(store);
  PhaseCounters counters;
  const auto start = std::chrono::steady_clock::now();
  run_phase(store, spec, spec.op_count, 2, live_keys, counters);
  // Writes already issued count toward this phase.
  store.hot_device().wait_idle();
  store.cold_device().wait_idle();
  store.chunk_device().wait_idle();
  const auto stop = std::chrono::steady_clock::now();
  const StoreMetrics m1 = store.metrics();
  const IoStats io1 = device_totals(store);

  RunReport r;
  r.workload = mix_name(spec.mix);
  r.distribution = spec.distribution.name();
  r.threads = spec.thread_count;
  r.ops = spec.op_count;
  r.duration_s = std::chrono::duration<double>(stop - start).count();
  r.throughput_kops = r.duration_s > 0 ? static_cast<double>(r.ops) / r.duration_s / 1000.0 : 0;
  r.device_read_bytes = io1.bytes_read - io0.bytes_read;
  r.device_write_bytes = io1.bytes_written - io0.bytes_written;
  r.records_returned = counters.returned.load();
  r.user_writes = counters.writes.load();
  r.not_found = counters.not_found.load();
  r.record_size = store.record_size();
  if (r.records_returned > 0) {
    r.read_amplification =
        static_cast<double>(r.device_read_bytes) / static_cast<double>(r.records_returned * r.record_size);
  }
  if (r.user_writes > 0) {
    r.write_amplification =
        static_cast<double>(r.device_write_bytes) / static_cast<double>(r.user_writes * r.record_size);
  }
  r.upsert_retries = m1.upsert_retries - m0.upsert_retries;
  r.rmw_retries = m1.rmw_retries - m0.rmw_retries;
  r.hot_num_truncs = m1.hot_num_truncs;
  r.cold_num_truncs = m1.cold_num_truncs;
  r.read_cache_hits = m1.read_cache_hits - m0.read_cache_hits;
  r.hot_compactions = m1.hot_compactions - m0.hot_compactions;
  r.cold_compactions = m1.cold_compactions - m0.cold_compactions;
  if (spec.distribution.kind == DistributionKind::Latest) {
    r.notes = "latest: zipfian theta=" + std::to_string(spec.distribution.theta) + " over recency rank";
  }
  return r;
}

// ---------------------------------------------------------------------------
// Reports

std::string to_text(const RunReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "workload " << r.workload << "  distribution " << r.distribution << "  threads " << r.threads << "\n";
  out << "ops " << r.ops << " in " << r.duration_s << " s  throughput " << r.throughput_kops << " kops/s\n";
  out << "device read " << r.device_read_bytes << " B  write " << r.device_write_bytes << " B\n";
  out << "read amplification " << r.read_amplification << "  write amplification " << r.write_amplification
      << "  (record size " << r.record_size << " B)\n";
  out << "records returned " << r.records_returned << "  not found " << r.not_found << "  user writes "
      << r.user_writes << "\n";
  out << "retries: upsert " << r.upsert_retries << "  rmw " << r.rmw_retries << "\n";
  out << "num_truncs: hot " << r.hot_num_truncs << "  cold " << r.cold_num_truncs << "  compactions: hot "
      << r.hot_compactions << "  cold " << r.cold_compactions << "\n";
  out << "read cache hits " << r.read_cache_hits << "\n";
  if (!r.notes.empty()) out << "note: " << r.notes << "\n";
  return out.str();
}

std::string to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["workload"] = r.workload;
  j["distribution"] = r.distribution;
  j["threads"] = r.threads;
  j["ops"] = r.ops;
  j["duration_s"] = r.duration_s;
  j["throughput_kops"] = r.throughput_kops;
  j["device_read_bytes"] = r.device_read_bytes;
  j["device_write_bytes"] = r.device_write_bytes;
  j["records_returned"] = r.records_returned;
  j["user_writes"] = r.user_writes;
  j["record_size"] = r.record_size;
  j["read_amplification"] = r.read_amplification;
  j["write_amplification"] = r.write_amplification;
  j["not_found"] = r.not_found;
  j["upsert_retries"] = r.upsert_retries;
  j["rmw_retries"] = r.rmw_retries;
  j["hot_num_truncs"] = r.hot_num_truncs;
  j["cold_num_truncs"] = r.cold_num_truncs;
  j["read_cache_hits"] = r.read_cache_hits;
  j["hot_compactions"] = r.hot_compactions;
  j["cold_compactions"] = r.cold_compactions;
  j["notes"] = r.notes;
  return j.dump(2);
}

}  // namespace f2kv::bench
