#include "f2kv/bench/generator.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace f2kv::bench {

DistributionSpec DistributionSpec::parse(const std::string& text) {
  DistributionSpec s;
  if (text == "zipfian") {
    s.kind = DistributionKind::Zipfian;
  } else if (text == "uniform") {
    s.kind = DistributionKind::Uniform;
  } else if (text == "latest") {
    s.kind = DistributionKind::Latest;
  } else if (text.rfind("hotspot:", 0) == 0) {
    s.kind = DistributionKind::Hotspot;
    size_t used = 0;
    const std::string arg = text.substr(8);
    try {
      s.hot_fraction = std::stod(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != arg.size()) throw std::invalid_argument("bad hotspot fraction: " + text);
  } else {
    throw std::invalid_argument("unknown distribution: " + text);
  }
  s.validate();
  return s;
}

std::string DistributionSpec::name() const {
  switch (kind) {
    case DistributionKind::Uniform:
      return "uniform";
    case DistributionKind::Zipfian:
      return "zipfian";
    case DistributionKind::Latest:
      return "latest";
    case DistributionKind::Hotspot: {
      std::string h = std::to_string(hot_fraction);
      h.erase(h.find_last_not_of('0') + 1);
      if (h.back() == '.') h.pop_back();
      return "hotspot:" + h;
    }
  }
  return "?";
}

void DistributionSpec::validate() const {
  if (!(theta > 0 && theta < 1)) throw std::invalid_argument("theta must lie in (0, 1)");
  if (!(hot_fraction > 0 && hot_fraction < 1)) throw std::invalid_argument("hot fraction must lie in (0, 1)");
  if (!(hot_access_prob >= 0 && hot_access_prob <= 1)) throw std::invalid_argument("hot access probability must lie in [0, 1]");
}

// ---------------------------------------------------------------------------

double ZipfianGenerator::zeta(uint64_t from, uint64_t to, double theta, double initial) {
  double sum = initial;
  for (uint64_t i = from; i < to; ++i) sum += 1.0 / std::pow(static_cast<double>(i + 1), theta);
  return sum;
}

ZipfianGenerator::ZipfianGenerator(uint64_t items, double theta)
    : items_{std::max<uint64_t>(items, 1)},
      theta_{theta},
      alpha_{1.0 / (1.0 - theta)},
      zeta2_{zeta(0, 2, theta, 0)},
      zetan_{zeta(0, items_, theta, 0)} {
  eta_ = (1 - std::pow(2.0 / static_cast<double>(items_), 1 - theta_)) / (1 - zeta2_ / zetan_);
}

void ZipfianGenerator::grow(uint64_t items) {
  zetan_ = zeta(items_, items, theta_, zetan_);
  items_ = items;
  eta_ = (1 - std::pow(2.0 / static_cast<double>(items_), 1 - theta_)) / (1 - zeta2_ / zetan_);
}

uint64_t ZipfianGenerator::next(std::mt19937_64& rng) { return next(rng, items_); }

uint64_t ZipfianGenerator::next(std::mt19937_64& rng, uint64_t items) {
  if (items > items_) grow(items);
  const uint64_t n = std::min(items, items_);
  std::uniform_real_distribution<double> uniform{0.0, 1.0};
  const double u = uniform(rng);
  const double uz = u * zetan_;
  if (uz < 1.0) return 0;
  if (uz < 1.0 + std::pow(0.5, theta_)) return std::min<uint64_t>(1, n - 1);
  auto r = static_cast<uint64_t>(static_cast<double>(n) * std::pow(eta_ * u - eta_ + 1, alpha_));
  return std::min(r, n - 1);
}

// ---------------------------------------------------------------------------

KeyPermutation::KeyPermutation(uint64_t n, uint64_t seed)
    : n_{std::max<uint64_t>(n, 1)},
      bits_{std::max<uint32_t>(2, static_cast<uint32_t>(std::bit_width(n_ - 1)))},
      mask_{bits_ >= 64 ? ~0ULL : (1ULL << bits_) - 1},
      seed_{seed} {}

uint64_t KeyPermutation::mix(uint64_t x) const {
  // Each step is a bijection on bits_-bit integers.
  const uint32_t half = bits_ / 2 + 1;
  x = (x ^ seed_) & mask_;
  x = (x * 0x9E3779B97F4A7C15ULL) & mask_;
  x ^= x >> half;
  x = (x * 0xBF58476D1CE4E5B9ULL) & mask_;
  x ^= x >> half;
  x = (x * 0x94D049BB133111EBULL) & mask_;
  x ^= x >> half;
  return x;
}

uint64_t KeyPermutation::operator()(uint64_t x) const {
  do {
    x = mix(x);
  } while (x >= n_);
  return x;
}

// ---------------------------------------------------------------------------

KeyGenerator::KeyGenerator(const DistributionSpec& spec, uint64_t key_count, uint64_t seed)
    : spec_{spec},
      key_count_{std::max<uint64_t>(key_count, 1)},
      hot_keys_{std::clamp<uint64_t>(static_cast<uint64_t>(std::llround(spec.hot_fraction * key_count_)), 1,
                                     key_count_)},
      rng_{seed},
      zipf_{spec.kind == DistributionKind::Zipfian ? key_count_ : 1, spec.theta},
      permutation_{key_count_, seed * 0x2545F4914F6CDD1DULL + 1} {
  spec_.validate();
}

uint64_t KeyGenerator::next_rank() { return zipf_.next(rng_, key_count_); }

uint64_t KeyGenerator::next(uint64_t live_keys) {
  switch (spec_.kind) {
    case DistributionKind::Uniform:
      return std::uniform_int_distribution<uint64_t>{0, key_count_ - 1}(rng_);
    case DistributionKind::Zipfian:
      return permutation_(zipf_.next(rng_, key_count_));
    case DistributionKind::Latest: {
      const uint64_t live = std::max<uint64_t>(live_keys, 1);
      return live - 1 - zipf_.next(rng_, live);
    }
    case DistributionKind::Hotspot: {
      std::uniform_real_distribution<double> coin{0.0, 1.0};
      if (hot_keys_ == key_count_ || coin(rng_) < spec_.hot_access_prob) {
        return std::uniform_int_distribution<uint64_t>{0, hot_keys_ - 1}(rng_);
      }
      return std::uniform_int_distribution<uint64_t>{hot_keys_, key_count_ - 1}(rng_);
    }
  }
  return 0;
}

}  // namespace f2kv::bench
