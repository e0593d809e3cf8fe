// Copyright 2026 The FedSampling Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Hierarchically keyed deterministic random streams.
//
// A stream is identified by a master seed plus an ordered path of
// (label, index) pairs, e.g. {("round", t), ("client", c), ("purpose", 0)}.
// The path is hashed into a 64-bit key and the stream is a SplitMix64
// counter sequence starting from that key, so any client's draws depend
// only on its own key and never on the order other streams are consumed.
// All distributions are implemented here rather than via <random> so
// results are identical across standard library implementations.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedsampling/error.hpp"

namespace fedsampling {

struct PathElement {
  std::string label;
  std::uint64_t index = 0;
};

struct StreamKey {
  std::uint64_t seed = 0;
  std::vector<PathElement> path;

  StreamKey child(std::string_view label, std::uint64_t index) const {
    StreamKey k = *this;
    k.path.push_back({std::string(label), index});
    return k;
  }
};

namespace detail {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t absorb(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ mix64(v + kGolden));
}

inline std::uint64_t hash_label(std::string_view s) {
  // FNV-1a, then avalanche.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return mix64(h ^ s.size());
}

}  // namespace detail

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer on [lo, hi], both inclusive. Rejection sampling removes
  // modulo bias.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    detail::require(lo <= hi, "uniform_int: lo > hi");
    const std::uint64_t span =
        static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
    if (span == ~std::uint64_t{0}) return static_cast<std::int64_t>(next_u64());
    const std::uint64_t range = span + 1;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % range);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + x % range);
  }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform_unit() < p;
  }

  // Box-Muller; one variate per call, no cached state.
  double standard_normal() {
    double u1;
    do {
      u1 = uniform_unit();
    } while (u1 <= 0.0);
    const double u2 = uniform_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i - 1)));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Running hash of a key path. Extending a prefix gives the same key as
// hashing the full StreamKey, without allocating the path.
class KeyPrefix {
 public:
  explicit KeyPrefix(std::uint64_t seed) : h_(detail::mix64(seed ^ 0x5851f42d4c957f2dULL)) {}

  KeyPrefix child(std::string_view label, std::uint64_t index) const {
    KeyPrefix k = *this;
    k.h_ = detail::absorb(detail::absorb(h_, detail::hash_label(label)), index);
    k.depth_ = depth_ + 1;
    return k;
  }

  RandomStream stream() const {
    detail::require(depth_ > 0, "derive: stream path must be non-empty");
    return RandomStream(h_);
  }

  std::uint64_t hash() const { return h_; }

 private:
  std::uint64_t h_;
  std::size_t depth_ = 0;
};

inline std::uint64_t key_hash(const StreamKey& key) {
  KeyPrefix k(key.seed);
  for (const auto& el : key.path) k = k.child(el.label, el.index);
  return k.hash();
}

inline RandomStream derive(const StreamKey& key) {
  detail::require(!key.path.empty(), "derive: stream path must be non-empty");
  return RandomStream(key_hash(key));
}

inline RandomStream derive(std::uint64_t seed, std::initializer_list<PathElement> path) {
  return derive(StreamKey{seed, std::vector<PathElement>(path)});
}

}  // namespace fedsampling
