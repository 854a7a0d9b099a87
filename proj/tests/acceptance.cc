// Acceptance checks. Each criterion prints one PASS/FAIL line with the
// measured quantities; the exit code is nonzero if any selected criterion fails.
//
//   acceptance            run every criterion
//   acceptance 3 7        run a subset

#include <algorithm>
#include <barrier>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "f2kv/bench/generator.h"
#include "f2kv/bench/workload.h"
#include "f2kv/key_hash.h"
#include "f2kv/store.h"
#include "test_util.h"

namespace f2kv {
namespace {

using testing::small_store_config;
using testing::u64_of;
using testing::value_of;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// 1. Mixed operations against a model map, with forced compactions of both logs.
Outcome oracle_equivalence() {
  constexpr uint64_t kKeys = 100000;
  constexpr uint64_t kOps = 1000000;
  StoreConfig c = small_store_config(8);
  c.hot_index_buckets = 1 << 15;
  c.cold_index.num_chunks = 1 << 13;
  Store store{c};
  std::unordered_map<Key, uint64_t> model;
  bench::KeyGenerator keys{bench::DistributionSpec::parse("zipfian"), kKeys, 17};
  std::mt19937_64 rng{23};
  std::vector<std::byte> out(8);
  uint64_t mismatches = 0;
  uint64_t hot_forced = 0;
  uint64_t cold_forced = 0;

  auto check = [&](Key k) {
    Status s = store.read(k, out);
    auto it = model.find(k);
    if (it == model.end()) {
      if (s != Status::NotFound) ++mismatches;
    } else if (s != Status::Ok || u64_of(out) != it->second) {
      ++mismatches;
    }
  };

  const auto t0 = std::chrono::steady_clock::now();
  for (uint64_t i = 0; i < kOps; ++i) {
    const Key k = keys.next();
    const uint64_t p = rng() % 100;
    if (p < 50) {
      check(k);
    } else if (p < 95) {
      store.upsert(k, value_of(i + 1, 8));
      model[k] = i + 1;
    } else {
      store.remove(k);
      model.erase(k);
    }
    if (i % 150000 == 75000) {
      if (store.compact_hot(store.hot_log().head()).until > 0) ++hot_forced;
    }
    if (i % 250000 == 200000) {
      if (store.compact_cold(store.cold_log().head()).until > 0) ++cold_forced;
    }
  }
  for (Key k = 0; k < kKeys; ++k) check(k);
  const double secs = seconds_since(t0);
  const StoreMetrics m = store.metrics();
  Outcome o;
  o.pass = mismatches == 0 && m.hot_compactions >= 5 && m.cold_compactions >= 3;
  o.detail = fmt("mismatches %llu over %llu ops + %llu final reads; hot compactions %llu, cold %llu; %.1f s",
                 (unsigned long long)mismatches, (unsigned long long)kOps, (unsigned long long)kKeys,
                 (unsigned long long)m.hot_compactions, (unsigned long long)m.cold_compactions, secs);
  return o;
}

// 2. Concurrent increments with background compaction, repeated.
Outcome rmw_atomicity() {
  constexpr int kRepetitions = 50;
  constexpr int kThreads = 8;
  constexpr int kOps = 10000;
  constexpr int kKeys = 64;
  int exact = 0;
  uint64_t hot_compactions = 0;
  uint64_t cold_compactions = 0;
  uint64_t retries = 0;
  std::string first_bad;
  for (int rep = 0; rep < kRepetitions; ++rep) {
    StoreConfig c = small_store_config(8);
    c.compaction.background = true;
    c.compaction.hot_disk_budget = 512 << 10;
    c.compaction.cold_disk_budget = 256 << 10;
    c.compaction.chunk_disk_budget = 512 << 10;
    c.compaction.trigger_fraction = 0.5;
    c.compaction.compact_fraction = 0.2;
    c.compaction.poll_interval_ms = 1;
    Store store{c};
    std::vector<std::thread> threads;
    std::atomic<uint64_t> failed_ops{0};
    for (int t = 0; t < kThreads; ++t) {
      threads.emplace_back([&, t] {
        std::mt19937_64 rng(rep * 100 + t);
        auto one = value_of(1, 8);
        for (int i = 0; i < kOps; ++i) {
          if (store.rmw(rng() % kKeys, one, testing::add_u64, testing::init_u64) != Status::Ok) ++failed_ops;
          // Filler upserts keep both logs moving so compactions run during the increments.
          store.upsert(1000 + rng() % 20000, value_of(i, 8));
        }
      });
    }
    for (auto& th : threads) th.join();
    uint64_t sum = 0;
    std::vector<std::byte> out(8);
    for (Key k = 0; k < kKeys; ++k) {
      if (store.read(k, out) == Status::Ok) sum += u64_of(out);
    }
    const StoreMetrics m = store.metrics();
    hot_compactions += m.hot_compactions;
    cold_compactions += m.cold_compactions;
    retries += m.rmw_retries;
    if (sum == uint64_t{kThreads} * kOps && failed_ops == 0) {
      ++exact;
    } else if (first_bad.empty()) {
      first_bad = fmt(" (rep %d: sum %llu)", rep, (unsigned long long)sum);
    }
  }
  Outcome o;
  o.pass = exact == kRepetitions && hot_compactions > 0 && cold_compactions > 0;
  o.detail = fmt("%d/%d repetitions summed to exactly %d; hot compactions %llu, cold %llu, rmw retries %llu", exact,
                 kRepetitions, kThreads * kOps, (unsigned long long)hot_compactions,
                 (unsigned long long)cold_compactions, (unsigned long long)retries) +
             first_bad;
  return o;
}

// 3. Reader racing a cold-cold compaction that copies the key and truncates
// its old location, with random delays injected into device point reads.
struct FalseAbsenceRun {
  uint64_t trials = 0;
  uint64_t not_found = 0;
  uint64_t wrong = 0;
  uint64_t rescans = 0;
  uint64_t cold_compactions = 0;
};

FalseAbsenceRun false_absence_trials(bool check_enabled, uint64_t trials, bool stop_at_first) {
  StoreConfig c = small_store_config(8);
  c.read_cache = false;
  c.false_absence_check = check_enabled;
  Store store{c};

  std::atomic<uint32_t> max_delay_us{0};
  auto delay_hook = [&](uint64_t, size_t length) {
    thread_local std::mt19937 rng{std::random_device{}()};
    const uint32_t d = max_delay_us.load();
    if (length <= 4096 && d > 0) std::this_thread::sleep_for(std::chrono::microseconds{rng() % d});
  };
  store.cold_device().set_read_hook(delay_hook);
  store.chunk_device().set_read_hook(delay_hook);

  FalseAbsenceRun run;
  std::barrier sync{3};
  std::atomic<bool> done{false};
  Key key = 0;
  uint32_t reader_jitter = 0;
  uint32_t compactor_jitter = 0;
  Status read_status = Status::Ok;
  uint64_t read_value = 0;

  std::thread reader{[&] {
    std::vector<std::byte> out(8);
    for (;;) {
      sync.arrive_and_wait();
      if (done) return;
      std::this_thread::sleep_for(std::chrono::microseconds{reader_jitter});
      read_status = store.read(key, out);
      read_value = u64_of(out);
      sync.arrive_and_wait();
    }
  }};
  std::thread compactor{[&] {
    for (;;) {
      sync.arrive_and_wait();
      if (done) return;
      std::this_thread::sleep_for(std::chrono::microseconds{compactor_jitter});
      store.compact_cold(store.cold_log().tail());
      sync.arrive_and_wait();
    }
  }};

  std::mt19937_64 rng{check_enabled ? 5u : 6u};
  const RecordLayout layout = store.cold_log().layout();
  for (uint64_t t = 0; t < trials; ++t) {
    key = 1 + t;
    RecordCopy rec{layout};
    RecordRef r = rec.ref();
    r.set_key(key);
    const uint64_t v = t * 7 + 3;
    std::memcpy(r.value().data(), &v, sizeof(v));
    r.set_header(RecordHeader::make(Address::invalid(), false));
    store.conditional_insert_cold(rec, Address::invalid());
    store.flush_cold();

    reader_jitter = static_cast<uint32_t>(rng() % 60);
    compactor_jitter = static_cast<uint32_t>(rng() % 60);
    max_delay_us = static_cast<uint32_t>(50 + rng() % 250);
    sync.arrive_and_wait();
    sync.arrive_and_wait();
    max_delay_us = 0;
    ++run.trials;
    if (read_status == Status::NotFound) {
      ++run.not_found;
    } else if (read_status != Status::Ok || read_value != v) {
      ++run.wrong;
    }

    // Retire the key so the live part of the cold log stays small.
    r.set_header(RecordHeader::make(Address::invalid(), true));
    store.conditional_insert_cold(rec, Address::log(store.cold_log().tail()));
    // Stands in for the chunk-log monitor, which is off here.
    if (t % 512 == 511) store.compact_chunk_log(store.cold_index().chunk_log().head());
    if (stop_at_first && run.not_found > 0) break;
  }
  done = true;
  sync.arrive_and_wait();
  reader.join();
  compactor.join();
  const StoreMetrics m = store.metrics();
  run.rescans = m.false_absence_rescans;
  run.cold_compactions = m.cold_compactions;
  return run;
}

Outcome false_absence() {
  constexpr uint64_t kTrials = 100000;
  const auto t0 = std::chrono::steady_clock::now();
  FalseAbsenceRun guarded = false_absence_trials(true, kTrials, false);
  FalseAbsenceRun unguarded = false_absence_trials(false, kTrials, true);
  Outcome o;
  o.pass = guarded.trials == kTrials && guarded.not_found == 0 && guarded.wrong == 0 && unguarded.not_found >= 1;
  o.detail = fmt(
      "with re-check: %llu trials, %llu false absences, %llu wrong values, %llu rescans; "
      "without: first false absence after %llu trials (%llu found); %.1f s",
      (unsigned long long)guarded.trials, (unsigned long long)guarded.not_found, (unsigned long long)guarded.wrong,
      (unsigned long long)guarded.rescans, (unsigned long long)unguarded.trials,
      (unsigned long long)unguarded.not_found, seconds_since(t0));
  return o;
}

// 4. Device reads per cold point read with the read cache off.
Outcome cold_read_io() {
  constexpr uint64_t kKeys = 10000;
  StoreConfig c = small_store_config(8);
  c.read_cache = false;
  c.hot_index_buckets = 1 << 13;
  c.cold_index.num_chunks = 1 << 12;
  Store store{c};

  // Keys whose cold-index slots are all distinct, so every cold chain has one record.
  std::vector<Key> keys;
  std::unordered_set<uint64_t> slots;
  for (Key k = 0; keys.size() < kKeys; ++k) {
    ChunkKey ck = store.cold_index().chunk_key(hash_key(k));
    if (slots.insert(ck.chunk_id * store.cold_index().entries_per_chunk() + ck.offset).second) keys.push_back(k);
  }
  for (Key k : keys) store.upsert(k, value_of(k, 8));
  store.flush_hot();
  store.compact_hot(store.hot_log().tail());
  store.flush_cold();

  auto reads = [&] {
    return store.hot_device().stats().read_ops + store.cold_device().stats().read_ops +
           store.chunk_device().stats().read_ops;
  };
  uint64_t exactly_two = 0;
  uint64_t one_with_chunk_hit = 0;
  uint64_t other = 0;
  uint64_t bad = 0;
  std::vector<std::byte> out(8);
  for (Key k : keys) {
    const uint64_t before = reads();
    const uint64_t chunk_before = store.chunk_device().stats().read_ops;
    if (store.read(k, out) != Status::Ok || u64_of(out) != k) ++bad;
    const uint64_t n = reads() - before;
    const uint64_t chunk_reads = store.chunk_device().stats().read_ops - chunk_before;
    if (n == 2) {
      ++exactly_two;
    } else if (n == 1 && chunk_reads == 0) {
      ++one_with_chunk_hit;
    } else {
      ++other;
    }
  }
  const double share = static_cast<double>(exactly_two + one_with_chunk_hit) / kKeys;
  Outcome o;
  o.pass = bad == 0 && share >= 0.99;
  o.detail = fmt("%llu reads: %llu at exactly 2 I/Os, %llu at 1 (chunk in memory), %llu other, %llu bad values",
                 (unsigned long long)kKeys, (unsigned long long)exactly_two, (unsigned long long)one_with_chunk_hit,
                 (unsigned long long)other, (unsigned long long)bad);
  return o;
}

// 5. In-memory bytes of the cold index per cold key.
Outcome cold_index_memory() {
  constexpr uint64_t kKeys = 1000000;
  StoreConfig c = small_store_config(8);
  c.read_cache = false;
  c.hot_index_buckets = 1 << 18;
  c.hot_page_size = 1 << 20;
  c.cold_page_size = 1 << 20;
  c.cold_index.chunk_bytes = 256;
  c.cold_index.num_chunks = std::bit_ceil(kKeys * 2 / 32);
  c.device_options.segment_size = 16 << 20;
  Store store{c};
  for (Key k = 0; k < kKeys; ++k) store.upsert(k, value_of(k, 8));
  store.flush_hot();
  store.compact_hot(store.hot_log().tail());

  uint64_t missing = 0;
  std::vector<std::byte> out(8);
  for (Key k = 0; k < kKeys; k += 997) {
    if (store.read(k, out) != Status::Ok || u64_of(out) != k) ++missing;
  }
  const HybridLog& chunks = store.cold_index().chunk_log();
  const uint64_t index_bytes = store.cold_index().in_memory_bytes();
  const uint64_t buffer_bytes = chunks.page_size() * chunks.memory_pages();
  const double per_key = static_cast<double>(index_bytes) / kKeys;
  const double per_key_total = static_cast<double>(index_bytes + buffer_bytes) / kKeys;
  Outcome o;
  o.pass = missing == 0 && store.metrics().hot_compactions > 0 && per_key_total <= 2.0;
  o.detail = fmt("%llu cold keys, %llu chunks: chunk index %.3f B/key, %.3f B/key with chunk-log page buffer; "
                 "sampled reads missing %llu",
                 (unsigned long long)kKeys, (unsigned long long)c.cold_index.num_chunks, per_key, per_key_total,
                 (unsigned long long)missing);
  return o;
}

// 6. Frame memory of one compaction over a 1 GiB region of 32 MiB pages.
Outcome compaction_memory() {
  constexpr uint64_t kRegion = 1ULL << 30;
  constexpr uint64_t kPage = 32ULL << 20;
  // More record bytes than one page, so updates land in the read-only region and append.
  constexpr uint64_t kKeys = 1000000;
  StoreConfig c;
  c.value_size = 108;
  c.hot_index_buckets = 1 << 18;
  c.hot_page_size = kPage;
  c.hot_memory_pages = 4;
  c.mutable_fraction = 0.05;
  c.cold_page_size = kPage;
  c.cold_memory_pages = 2;
  c.cold_index.num_chunks = 1 << 16;
  c.cold_index.chunk_log_page_size = 1 << 20;
  c.cold_index.chunk_log_memory_pages = 3;
  c.read_cache = false;
  c.device_options.segment_size = 64ULL << 20;
  Store store{c};

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::byte> value(108);
  for (uint64_t i = 0; store.hot_log().head() < store.hot_log().begin() + kRegion; ++i) {
    std::memcpy(value.data(), &i, sizeof(i));
    store.upsert(i % kKeys, value);
  }
  const uint64_t begin = store.hot_log().begin();
  CompactionResult r = store.compact_hot(begin + kRegion);
  const uint64_t peak = store.metrics().peak_compaction_frame_bytes;
  const uint64_t limit = 4 * kPage;
  Outcome o;
  o.pass = r.until - begin >= kRegion && peak > 0 && peak <= limit && r.scanned > 0;
  o.detail = fmt("compacted %.2f GiB (%llu records scanned, %llu copied); peak frame bytes %.1f MiB, limit %.0f MiB; "
                 "%.1f s",
                 static_cast<double>(r.until - begin) / (1ULL << 30), (unsigned long long)r.scanned,
                 (unsigned long long)r.copied, static_cast<double>(peak) / (1 << 20),
                 static_cast<double>(limit) / (1 << 20), seconds_since(t0));
  return o;
}

// 7. YCSB-C zipfian at a 10% memory budget, with and without a read cache.
Outcome read_cache_benefit() {
  bench::WorkloadSpec s;
  s.key_count = 500000;
  s.mix = bench::Mix::C;
  s.distribution = bench::DistributionSpec::parse("zipfian");
  s.op_count = 500000;
  s.warmup_ops = 100000;
  const uint64_t budget = s.key_count * RecordLayout{s.value_size}.size() / 10;

  std::vector<double> with_cache;
  std::vector<double> without_cache;
  for (int run = 0; run < 3; ++run) {
    for (bool cache : {true, false}) {
      bench::BudgetSpec b;
      b.key_count = bench::final_key_count(s);
      b.value_size = s.value_size;
      b.memory_budget = budget;
      b.read_cache = cache ? budget / 4 : 0;
      s.seed = 1 + run;
      Store store{bench::store_config_for_budget(b)};
      bench::RunReport r = bench::run(store, s);
      (cache ? with_cache : without_cache).push_back(r.throughput_kops);
    }
  }
  const double on = median3(with_cache);
  const double off = median3(without_cache);
  Outcome o;
  o.pass = on >= 1.5 * off;
  o.detail = fmt("%llu keys, budget %.2f MiB: median %.1f kops/s with cache vs %.1f without (%.2fx)",
                 (unsigned long long)s.key_count, static_cast<double>(budget) / (1 << 20), on, off, on / off);
  return o;
}

// 8. Compaction with 1 and 4 threads over identical logs.
using LogMap = std::map<Key, std::optional<uint64_t>>;

LogMap target_map(Store& store) {
  // Newest record per key in the cold log; tombstones map to nullopt.
  LogMap m;
  HybridLog& log = store.cold_log();
  log.scan(log.begin(), log.tail(), [&](Address, RecordRef r) {
    RecordHeader h = r.header();
    if (h.invalid()) return;
    m[r.key()] = h.tombstone() ? std::nullopt : std::optional<uint64_t>{u64_of(r.value())};
  });
  return m;
}

LogMap read_map(Store& store, uint64_t keys) {
  LogMap m;
  std::vector<std::byte> out(8);
  for (Key k = 0; k < keys; ++k) {
    if (store.read(k, out) == Status::Ok) m[k] = u64_of(out);
  }
  return m;
}

Outcome multi_thread_compaction() {
  constexpr uint64_t kKeys = 20000;
  struct Snapshot {
    LogMap after_hot;
    LogMap after_cold;
    LogMap reads;
    CompactionResult hot;
    CompactionResult cold;
  };
  LogMap model;
  auto build_and_compact = [&](uint32_t threads) {
    StoreConfig c = small_store_config(8);
    c.read_cache = false;
    c.hot_index_buckets = 1 << 13;
    c.cold_index.num_chunks = 1 << 11;
    Store store{c};
    std::mt19937_64 rng{99};
    model.clear();
    for (uint64_t i = 0; i < 200000; ++i) {
      const Key k = rng() % kKeys;
      if (rng() % 10 == 0) {
        store.remove(k);
        model[k] = std::nullopt;
      } else {
        store.upsert(k, value_of(i, 8));
        model[k] = i;
      }
    }
    store.flush_hot();
    Snapshot s;
    s.hot = store.compact_hot(store.hot_log().tail(), threads);
    s.after_hot = target_map(store);
    store.flush_cold();
    s.cold = store.compact_cold(store.cold_log().tail(), threads);
    s.after_cold = target_map(store);
    s.reads = read_map(store, kKeys);
    return s;
  };
  Snapshot one = build_and_compact(1);
  Snapshot four = build_and_compact(4);

  LogMap live;
  for (auto& [k, v] : model) {
    if (v) live[k] = v;
  }
  LogMap after_cold_live;
  for (auto& [k, v] : four.after_cold) {
    if (v) after_cold_live[k] = v;
  }
  Outcome o;
  o.pass = one.after_hot == four.after_hot && one.after_cold == four.after_cold && one.reads == four.reads &&
           one.after_hot == model && four.reads == live && after_cold_live == live;
  o.detail = fmt("hot-cold: %llu vs %llu records copied, target maps %s; cold-cold: %llu vs %llu copied, maps %s; "
                 "reads match model: %s",
                 (unsigned long long)one.hot.copied, (unsigned long long)four.hot.copied,
                 one.after_hot == four.after_hot ? "identical" : "DIFFER", (unsigned long long)one.cold.copied,
                 (unsigned long long)four.cold.copied, one.after_cold == four.after_cold ? "identical" : "DIFFER",
                 four.reads == live && one.reads == live ? "yes" : "no");
  return o;
}

// 9. Generator shape, measured against independent estimates.
Outcome distribution_shape() {
  bench::KeyGenerator hotspot{bench::DistributionSpec::parse("hotspot:0.1"), 1000000, 3};
  uint64_t hot = 0;
  constexpr uint64_t kSamples = 1000000;
  for (uint64_t i = 0; i < kSamples; ++i) hot += hotspot.is_hot(hotspot.next()) ? 1 : 0;
  const double ratio = static_cast<double>(hot) / kSamples;

  constexpr uint64_t kKeys = 10000;
  bench::KeyGenerator zipf{bench::DistributionSpec::parse("zipfian"), kKeys, 11};
  std::vector<uint64_t> counts(kKeys);
  for (uint64_t i = 0; i < kSamples; ++i) ++counts[zipf.next_rank()];
  // Least-squares fit of log frequency on log rank.
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (uint64_t r = 0; r < kKeys; ++r) {
    if (counts[r] == 0) continue;
    const double x = std::log(static_cast<double>(r + 1));
    const double y = std::log(static_cast<double>(counts[r]));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    n += 1;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  Outcome o;
  o.pass = std::abs(ratio - 0.9) <= 0.005 && std::abs(slope + 0.99) <= 0.05;
  o.detail = fmt("hotspot:0.1 hit ratio %.4f (target 0.9 +- 0.005); zipfian log-log slope %.4f (target -0.99 +- 0.05)",
                 ratio, slope);
  return o;
}

// 10. YCSB-B throughput with 1 and 4 threads, memory resident.
Outcome scalability() {
  bench::WorkloadSpec s;
  s.key_count = 200000;
  s.mix = bench::Mix::B;
  s.distribution = bench::DistributionSpec::parse("zipfian");
  s.op_count = 2000000;
  s.warmup_ops = 200000;
  bench::BudgetSpec b;
  b.key_count = bench::final_key_count(s);
  b.memory_budget = 256ULL << 20;
  b.background_compaction = false;

  std::vector<double> single;
  std::vector<double> quad;
  uint64_t device_reads = 0;
  for (int run = 0; run < 3; ++run) {
    for (uint32_t threads : {1u, 4u}) {
      s.thread_count = threads;
      s.seed = 1 + run;
      Store store{bench::store_config_for_budget(b)};
      bench::RunReport r = bench::run(store, s);
      device_reads += r.device_read_bytes;
      (threads == 1 ? single : quad).push_back(r.throughput_kops);
    }
  }
  const double t1 = median3(single);
  const double t4 = median3(quad);
  Outcome o;
  o.pass = t4 >= 2.5 * t1 && device_reads == 0;
  o.detail = fmt("median %.1f kops/s at 1 thread, %.1f at 4 (%.2fx, target 2.5x); %u hardware threads available; "
                 "device read bytes %llu",
                 t1, t4, t4 / t1, std::thread::hardware_concurrency(), (unsigned long long)device_reads);
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace f2kv

int main(int argc, char** argv) {
  using namespace f2kv;
  const std::vector<Criterion> all = {
      {1, "oracle equivalence", oracle_equivalence},
      {2, "rmw atomicity", rmw_atomicity},
      {3, "false absence", false_absence},
      {4, "cold read I/O", cold_read_io},
      {5, "cold index memory", cold_index_memory},
      {6, "compaction memory", compaction_memory},
      {7, "read cache benefit", read_cache_benefit},
      {8, "multi-thread compaction", multi_thread_compaction},
      {9, "distribution shape", distribution_shape},
      {10, "scalability", scalability},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::stoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : all) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    Outcome o = c.run();
    std::printf("criterion %2d  %-24s %s  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
