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

#include "gradnas/seed.hpp"

#include <gtest/gtest.h>

#include <set>

namespace gradnas {
namespace {

TEST(Splitmix64, PublishedFirstOutputs) {
  // Reference generator seeded with 0: x is the running state.
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(splitmix64(0x9e3779b97f4a7c15ULL), 0x6e789e6aa1b965f4ULL);
}

TEST(DeriveSeed, DeterministicAndDistinct) {
  EXPECT_EQ(derive_seed(42, 7), derive_seed(42, 7));
  std::set<std::uint64_t> seen;
  for (std::uint64_t m = 0; m < 32; ++m) {
    for (std::uint64_t i = 0; i < 32; ++i) seen.insert(derive_seed(m, i));
  }
  EXPECT_EQ(seen.size(), 32u * 32u);
}

TEST(DeriveSeed, StreamsDoNotCollideWithRepeatIndices) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t r = 0; r < 100; ++r) seen.insert(derive_seed(5, r));
  for (Stream s : {Stream::kSampleCollection, Stream::kPredictorInit, Stream::kSearch,
                   Stream::kBaseline, Stream::kAuxPredictorInit}) {
    EXPECT_TRUE(seen.insert(derive_seed(5, s)).second);
  }
}

TEST(Fnv1a64, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

}  // namespace
}  // namespace gradnas
