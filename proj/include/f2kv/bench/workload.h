#pragma once

#include <cstdint>
#include <string>

#include "f2kv/bench/generator.h"
#include "f2kv/store.h"

namespace f2kv::bench {

enum class Mix : uint8_t { A, B, C, D, F };

struct OpMix {
  double read = 0;
  double update = 0;
  double insert = 0;
  double rmw = 0;
};

OpMix mix_fractions(Mix mix);
Mix parse_mix(const std::string& text);
std::string mix_name(Mix mix);

struct WorkloadSpec {
  uint64_t key_count = 1'000'000;
  uint32_t value_size = 108;
  Mix mix = Mix::A;
  DistributionSpec distribution{};
  uint64_t op_count = 1'000'000;
  uint64_t warmup_ops = 100'000;
  uint32_t thread_count = 1;
  uint64_t seed = 1;
  /// Insert every key once before warm-up.
  bool load = true;
  /// Pin worker i to CPU i mod hardware threads.
  bool pin_threads = true;

  void validate() const;
};

/// Memory and disk sizing for a benchmark store.
struct BudgetSpec {
  uint64_t key_count = 1'000'000;
  uint32_t value_size = 108;
  /// Total in-memory bytes: hot index, hot log, read cache, cold log tail,
  /// chunk index and chunk log pages.
  uint64_t memory_budget = 0;
  uint64_t hot_disk = 0;  // 0: a tenth of the dataset
  uint64_t cold_disk = 0;  // 0: four times the dataset
  uint64_t read_cache = 0;  // 0 disables the read cache
  uint32_t chunk_size = 256;
  std::string directory;
  bool background_compaction = true;
  uint32_t compaction_threads = 1;
};

/// Keys present once the warmup and timed phases have run (inserts included).
uint64_t final_key_count(const WorkloadSpec& spec);

/// Derives a store configuration from a budget. Throws std::invalid_argument
/// if the budget cannot hold the fixed structures plus a minimal hot log.
StoreConfig store_config_for_budget(const BudgetSpec& budget);

struct RunReport {
  std::string workload;
  std::string distribution;
  uint32_t threads = 0;
  uint64_t ops = 0;
  double duration_s = 0;
  double throughput_kops = 0;
  uint64_t device_read_bytes = 0;
  uint64_t device_write_bytes = 0;
  uint64_t records_returned = 0;
  uint64_t user_writes = 0;
  uint32_t record_size = 0;
  double read_amplification = 0;
  double write_amplification = 0;
  uint64_t not_found = 0;
  uint64_t upsert_retries = 0;
  uint64_t rmw_retries = 0;
  uint64_t hot_num_truncs = 0;
  uint64_t cold_num_truncs = 0;
  uint64_t read_cache_hits = 0;
  uint64_t hot_compactions = 0;
  uint64_t cold_compactions = 0;
  std::string notes;
};

/// Inserts keys [0, key_count) with `threads` loader threads.
void load(Store& store, const WorkloadSpec& spec);

/// Load (optional), warm-up and timed run. Throws std::runtime_error if any
/// operation ends in an error status.
RunReport run(Store& store, const WorkloadSpec& spec);

/// Value written for `key` by the op with the given sequence number.
void fill_value(std::span<std::byte> value, uint64_t key, uint64_t sequence);

std::string to_text(const RunReport& report);
std::string to_json(const RunReport& report);

}  // namespace f2kv::bench
