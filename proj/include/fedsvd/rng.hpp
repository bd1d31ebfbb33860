// Copyright 2026 The fedsvd-sim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDSVD_RNG_HPP_
#define FEDSVD_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedsvd {

using Rng = std::mt19937_64;

// Tags that keep derived streams for different purposes apart.
enum class Stream : std::uint64_t {
  kData = 1,
  kPartition = 2,
  kBackbone = 3,
  kServerInit = 4,
  kClientSampling = 5,
  kClientTraining = 6,
  kAdapterReinit = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Hash of (master, stream, path...). Streams derived from different paths are
// independent of scheduling order.
inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::initializer_list<std::uint64_t> path = {}) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 1));
  return h;
}

inline Rng make_rng(std::uint64_t master, Stream stream,
                    std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(master, stream, path));
}

}  // namespace fedsvd

#endif  // FEDSVD_RNG_HPP_
