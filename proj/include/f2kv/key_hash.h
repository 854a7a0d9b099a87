#pragma once

#include <cstdint>

namespace f2kv {

using Key = uint64_t;

/// 64-bit finalizer (murmur3 fmix64 constants). Every bit of the key affects
/// every bit of the hash, so bucket, tag, chunk id and chunk offset can all be
/// carved out of disjoint bit ranges.
constexpr uint64_t hash_key(Key key) {
  uint64_t h = key;
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return h;
}

}  // namespace f2kv
