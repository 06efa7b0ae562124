// Copyright 2026 The gradnas Authors.
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

#ifndef GRADNAS_SEED_HPP_
#define GRADNAS_SEED_HPP_

#include <cstdint>
#include <string_view>

namespace gradnas {

// Seed splitting. Every random stream in the pipeline is derived from one
// master seed: child = splitmix64(master ^ splitmix64(index + 1)). Streams
// are addressed by (repeat, stream tag, trajectory index, ...) chains.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

// Named sub-streams used by the experiment drivers.
enum class Stream : std::uint64_t {
  kSampleCollection = 1,
  kPredictorInit = 2,
  kSearch = 3,
  kBaseline = 4,
  kAuxPredictorInit = 5,
};
inline std::uint64_t derive_seed(std::uint64_t parent, Stream s) {
  return derive_seed(parent, static_cast<std::uint64_t>(s) << 32);
}

// 64-bit FNV-1a; used for content digests and space fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace gradnas

#endif  // GRADNAS_SEED_HPP_
