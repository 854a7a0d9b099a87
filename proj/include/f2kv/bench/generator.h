#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace f2kv::bench {

enum class DistributionKind : uint8_t { Uniform, Zipfian, Hotspot, Latest };

struct DistributionSpec {
  DistributionKind kind = DistributionKind::Zipfian;
  double theta = 0.99;
  double hot_fraction = 0.1;
  double hot_access_prob = 0.9;

  /// Parses "uniform", "zipfian", "latest" or "hotspot:H". Throws std::invalid_argument.
  static DistributionSpec parse(const std::string& text);
  std::string name() const;
  void validate() const;
};

/// YCSB zipfian over ranks [0, items): rank 0 is the most popular.
/// The item count may grow (used by the latest distribution); the zeta
/// constant is then extended incrementally.
class ZipfianGenerator {
 public:
  ZipfianGenerator(uint64_t items, double theta);

  uint64_t next(std::mt19937_64& rng);
  uint64_t next(std::mt19937_64& rng, uint64_t items);
  uint64_t items() const { return items_; }

  static double zeta(uint64_t from, uint64_t to, double theta, double initial);

 private:
  void grow(uint64_t items);

  uint64_t items_;
  double theta_;
  double alpha_;
  double zeta2_;
  double zetan_;
  double eta_;
};

/// Pseudo-random bijection on [0, n) used to scatter popular ranks over the
/// key space. Cycle-walks an invertible mix on the next power of two.
class KeyPermutation {
 public:
  KeyPermutation(uint64_t n, uint64_t seed);
  uint64_t operator()(uint64_t x) const;
  uint64_t size() const { return n_; }

 private:
  uint64_t mix(uint64_t x) const;

  uint64_t n_;
  uint32_t bits_;
  uint64_t mask_;
  uint64_t seed_;
};

/// Per-thread key-index source for one distribution. Deterministic given the seed.
class KeyGenerator {
 public:
  KeyGenerator(const DistributionSpec& spec, uint64_t key_count, uint64_t seed);

  /// Key index in [0, live_keys). `live_keys` only matters for the latest
  /// distribution, where it is the number of keys inserted so far.
  uint64_t next(uint64_t live_keys);
  uint64_t next() { return next(key_count_); }

  /// Raw zipfian rank before scrambling (zipfian distribution only).
  uint64_t next_rank();
  /// True if the index lies in the hotspot's hot set.
  bool is_hot(uint64_t index) const { return index < hot_keys_; }
  uint64_t hot_keys() const { return hot_keys_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  DistributionSpec spec_;
  uint64_t key_count_;
  uint64_t hot_keys_;
  std::mt19937_64 rng_;
  ZipfianGenerator zipf_;
  KeyPermutation permutation_;
};

}  // namespace f2kv::bench
