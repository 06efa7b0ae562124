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

#include "gradnas/arch_space.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <string>

#include "test_util.hpp"

namespace gradnas {
namespace {

// Index layout of the AnyNet space: D1 W1 R1 G1 D2 ...
constexpr std::size_t kD = 0, kW = 1, kR = 2, kG = 3;
std::size_t at(int stage, std::size_t field) { return 4 * (stage - 1) + field; }

DiscreteArch regnetx600() {
  const std::array<double, 4> d{1, 3, 5, 7}, w{48, 96, 240, 528}, g{2, 4, 10, 22};
  DiscreteArch a;
  a.values.resize(16);
  for (int s = 1; s <= 4; ++s) {
    a.values[at(s, kD)] = d[s - 1];
    a.values[at(s, kW)] = w[s - 1];
    a.values[at(s, kR)] = 1.0;
    a.values[at(s, kG)] = g[s - 1];
  }
  return a;
}

DiscreteArch all_ops(int op) { return DiscreteArch{std::vector<double>(6, op)}; }

Encoding random_encoding(const SpaceDef& s, std::mt19937_64& rng) {
  Encoding e{Matrix(s.encoding_rows(), s.encoding_cols())};
  if (s.kind == SpaceKind::kSize) {
    std::uniform_real_distribution<double> u(-0.2, 1.2);  // includes out-of-box
    for (Eigen::Index j = 0; j < e.values.cols(); ++j) e.values(0, j) = u(rng);
  } else {
    std::normal_distribution<double> n(0.0, 3.0);
    for (Eigen::Index i = 0; i < e.values.size(); ++i) e.values.data()[i] = n(rng);
  }
  return e;
}

TEST(AnynetSpace, Shape) {
  const SpaceDef s = build_anynet_space();
  EXPECT_EQ(s.params.size(), 16u);
  EXPECT_EQ(s.kind, SpaceKind::kSize);
  EXPECT_EQ(s.params[at(3, kW)].name, "W3");
  EXPECT_EQ(s.encoding_rows(), 1);
  EXPECT_EQ(s.encoding_cols(), 16);
}

TEST(AnynetSpace, CardinalityIsOrder1e18) {
  const double c = cardinality(build_anynet_space());
  EXPECT_GT(c, 1e18);
  EXPECT_LT(c, 1e19);
}

TEST(AnynetSpace, RegNetX600IsMember) {
  EXPECT_NO_THROW(check_member(build_anynet_space(), regnetx600()));
}

TEST(AnynetSpace, Width25RejectedNamingTheField) {
  DiscreteArch a = regnetx600();
  a.values[at(1, kW)] = 25;
  try {
    check_member(build_anynet_space(), a);
    FAIL();
  } catch (const MembershipError& e) {
    EXPECT_EQ(e.field(), "W1");
  }
}

TEST(AnynetSpace, NonDividingGroupRejected) {
  DiscreteArch a = regnetx600();
  a.values[at(3, kG)] = 7;  // 240 % 7 != 0
  EXPECT_FALSE(is_member(build_anynet_space(), a));
  a.values[at(3, kG)] = 10;
  a.values[at(3, kR)] = 0.3;  // not a listed ratio
  EXPECT_FALSE(is_member(build_anynet_space(), a));
}

TEST(AnynetSpace, WrongLengthRejected) {
  DiscreteArch a = regnetx600();
  a.values.pop_back();
  EXPECT_FALSE(is_member(build_anynet_space(), a));
}

TEST(Nb201Space, ShapeAndCardinality) {
  const SpaceDef s = build_nb201_space();
  EXPECT_EQ(s.topology.node_count, 8);
  EXPECT_EQ(s.topology.options.size(), 7u);
  EXPECT_EQ(s.topology.selectable_options, 5);
  EXPECT_EQ(s.arch_length(), 6u);
  EXPECT_DOUBLE_EQ(cardinality(s), 15625.0);
  int members = 0;
  for_each_member(s, [&](const DiscreteArch&) { ++members; });
  EXPECT_EQ(members, 15625);
}

TEST(Nb201Space, AdjacencyHasTenEdgesAndIsAcyclic) {
  const SpaceDef s = build_nb201_space();
  const auto& adj = s.topology.adjacency;
  int edges = 0;
  for (const auto& row : adj) {
    for (int v : row) edges += v;
  }
  EXPECT_EQ(edges, 10);
  // Kahn's algorithm.
  std::vector<int> indeg(8, 0);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) indeg[j] += adj[i][j];
  }
  std::vector<int> ready;
  for (int i = 0; i < 8; ++i) {
    if (indeg[i] == 0) ready.push_back(i);
  }
  int seen = 0;
  while (!ready.empty()) {
    const int v = ready.back();
    ready.pop_back();
    ++seen;
    for (int j = 0; j < 8; ++j) {
      if (adj[v][j] && --indeg[j] == 0) ready.push_back(j);
    }
  }
  EXPECT_EQ(seen, 8);
  // The listed connections.
  EXPECT_EQ(adj[0][1] + adj[0][2] + adj[0][4], 3);
  EXPECT_EQ(adj[1][3] + adj[1][5], 2);
  EXPECT_EQ(adj[2][6], 1);
  EXPECT_EQ(adj[3][6], 1);
  EXPECT_EQ(adj[4][7] + adj[5][7] + adj[6][7], 3);
}

TEST(Encode, AnynetHandValues) {
  const SpaceDef s = build_anynet_space();
  const Encoding e = encode(s, regnetx600());
  EXPECT_DOUBLE_EQ(e.values(0, at(1, kD)), 0.0);  // D1 = 1 at the span floor
  EXPECT_NEAR(e.values(0, at(3, kW)), 0.216, 1e-15);
  EXPECT_DOUBLE_EQ(e.values(0, at(1, kR)), 1.0);
}

TEST(Encode, Nb201AllConv3) {
  const SpaceDef s = build_nb201_space();
  const Encoding e = encode(s, all_ops(3));
  for (int node = 1; node <= 6; ++node) {
    for (int c = 0; c < 7; ++c) {
      EXPECT_DOUBLE_EQ(e.values(node, c), c == 3 ? 5.0 : 0.0);
    }
  }
  // Frozen rows: input on INPUT, output on OUTPUT.
  EXPECT_DOUBLE_EQ(e.values(0, 5), kLogitBeta);
  EXPECT_DOUBLE_EQ(e.values(7, 6), kLogitBeta);
  EXPECT_DOUBLE_EQ(e.values(0, 0), 0.0);
}

TEST(Encode, NonMemberThrows) {
  DiscreteArch a = all_ops(3);
  a.values[2] = 5;  // INPUT is not selectable
  EXPECT_THROW(encode(build_nb201_space(), a), MembershipError);
}

TEST(Project, MemberEncodingsAreFixedPoints) {
  const SpaceDef s = build_anynet_space();
  EXPECT_EQ(project(s, encode(s, regnetx600())), regnetx600());
  const SpaceDef t = build_nb201_space();
  for (int op = 0; op < 5; ++op) EXPECT_EQ(project(t, encode(t, all_ops(op))), all_ops(op));
}

TEST(Project, WidthSnapsToNearestMultipleOf8) {
  const SpaceDef s = build_anynet_space();
  Encoding e = encode(s, regnetx600());
  e.values(0, at(2, kW)) = (250.3 - 24.0) / 1000.0;
  const DiscreteArch a = project(s, e);
  EXPECT_EQ(a.values[at(2, kW)], 248);
  // Exact tie 252 goes to the smaller multiple.
  e.values(0, at(2, kW)) = (252.0 - 24.0) / 1000.0;
  EXPECT_EQ(project(s, e).values[at(2, kW)], 248);
}

TEST(Project, GroupSnapsToNearestDivisorOfBottleneck) {
  const SpaceDef s = build_anynet_space();
  Encoding e = encode(s, regnetx600());
  e.values(0, at(1, kW)) = (64.0 - 24.0) / 1000.0;
  e.values(0, at(1, kR)) = 1.0;
  e.values(0, at(1, kG)) = (19.4 - 1.0) / 31.0;
  const DiscreteArch a = project(s, e);
  EXPECT_EQ(a.values[at(1, kW)], 64);
  EXPECT_EQ(a.values[at(1, kG)], 16);
  // With r = 0.25 the bottleneck is 16 channels: 19.4 -> 16.
  e.values(0, at(1, kR)) = 0.0;
  EXPECT_EQ(project(s, e).values[at(1, kG)], 16);
}

TEST(Project, DepthRoundsHalfUpAndClamps) {
  const SpaceDef s = build_anynet_space();
  Encoding e = encode(s, regnetx600());
  e.values(0, at(1, kD)) = 1.5 / 15.0;  // denormalised 2.5
  EXPECT_EQ(project(s, e).values[at(1, kD)], 3);
  e.values(0, at(1, kD)) = 2.0;  // far outside the box
  EXPECT_EQ(project(s, e).values[at(1, kD)], 16);
  e.values(0, at(1, kD)) = -3.0;
  EXPECT_EQ(project(s, e).values[at(1, kD)], 1);
}

TEST(Project, RatioTiesGoToSmallerValue) {
  const SpaceDef s = build_anynet_space();
  Encoding e = encode(s, regnetx600());
  // denormalised 0.375: equidistant from 0.25 and 0.5
  e.values(0, at(2, kR)) = (0.375 - 0.25) / 0.75;
  EXPECT_EQ(project(s, e).values[at(2, kR)], 0.25);
}

TEST(Project, TopologyArgmaxIgnoresInputOutputColumnsAndBreaksTiesLow) {
  const SpaceDef s = build_nb201_space();
  Encoding e = encode(s, all_ops(0));
  e.values.row(1).setZero();
  e.values(1, 5) = 100.0;  // INPUT column, not selectable
  e.values(1, 2) = 1.0;
  e.values(1, 4) = 1.0;  // tie with column 2
  EXPECT_EQ(project(s, e).values[0], 2);
}

TEST(Project, ShapeMismatchThrows) {
  EXPECT_THROW(project(build_nb201_space(), Encoding{Matrix::Zero(7, 7)}), ShapeError);
}

TEST(ProjectProperty, IdempotentAndMember1e4PerSpace) {
  for (const SpaceDef& s : {build_anynet_space(), build_nb201_space()}) {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 10000; ++i) {
      const Encoding e = random_encoding(s, rng);
      const DiscreteArch a = project(s, e);
      ASSERT_TRUE(is_member(s, a)) << s.name << " draw " << i;
      ASSERT_EQ(project(s, encode(s, a)), a) << s.name << " draw " << i;
    }
  }
}

TEST(EncodeProperty, InjectiveOnNb201) {
  const SpaceDef s = build_nb201_space();
  std::set<std::vector<double>> seen;
  for_each_member(s, [&](const DiscreteArch& a) {
    const Matrix m = encode(s, a).values;
    seen.insert(std::vector<double>(m.data(), m.data() + m.size()));
  });
  EXPECT_EQ(seen.size(), 15625u);
}

TEST(TrainableMask, FreezesInputAndOutputRows) {
  const Matrix m = trainable_mask(build_nb201_space());
  EXPECT_EQ(m.row(0).sum(), 0.0);
  EXPECT_EQ(m.row(7).sum(), 0.0);
  EXPECT_EQ(m.row(3).sum(), 7.0);
  EXPECT_EQ(trainable_mask(build_anynet_space()).sum(), 16.0);
}

TEST(ClampToBox, OnlyTouchesSizeSpaces) {
  const SpaceDef s = build_anynet_space();
  Encoding e{Matrix::Constant(1, 16, 1.7)};
  e.values(0, 0) = -0.5;
  clamp_to_box(s, e);
  EXPECT_EQ(e.values(0, 0), 0.0);
  EXPECT_EQ(e.values(0, 1), 1.0);
  const SpaceDef t = build_nb201_space();
  Encoding l{Matrix::Constant(8, 7, 9.0)};
  clamp_to_box(t, l);
  EXPECT_EQ(l.values(2, 2), 9.0);
}

TEST(SampleRandom, DeterministicAndInDomain) {
  for (const SpaceDef& s : {build_anynet_space(), build_nb201_space()}) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const DiscreteArch a = sample_random(s, seed);
      EXPECT_TRUE(is_member(s, a));
      EXPECT_EQ(a, sample_random(s, seed));
    }
  }
}

TEST(SampleRandom, Nb201OpFrequenciesAreUniform) {
  const SpaceDef s = build_nb201_space();
  std::mt19937_64 rng(99);
  std::array<std::array<int, 5>, 6> counts{};
  for (int i = 0; i < 10000; ++i) {
    const DiscreteArch a = sample_random(s, rng);
    for (int p = 0; p < 6; ++p) ++counts[p][static_cast<int>(a.values[p])];
  }
  // sd of a 20% frequency over 1e4 draws is 0.4%, so +-2% is 5 sigma.
  for (const auto& pos : counts) {
    for (int c : pos) EXPECT_NEAR(c / 10000.0, 0.2, 0.02);
  }
}

TEST(ArchString, AllSkipCell) {
  const SpaceDef s = build_nb201_space();
  EXPECT_EQ(arch_to_string(s, all_ops(1)),
            "|skip_connect~0|+|skip_connect~0|skip_connect~1|+|skip_connect~0|"
            "skip_connect~1|skip_connect~2|");
}

TEST(ArchString, EdgeOrderInString) {
  const SpaceDef s = build_nb201_space();
  // Node order e01 e02 e12 e03 e13 e23 ; string order groups by target node.
  const DiscreteArch a{{0, 1, 2, 3, 4, 0}};
  EXPECT_EQ(arch_to_string(s, a),
            "|none~0|+|skip_connect~0|nor_conv_1x1~1|+|nor_conv_3x3~0|"
            "avg_pool_3x3~1|none~2|");
}

TEST(ArchString, RoundTrip1e3PerSpace) {
  for (const SpaceDef& s : {build_anynet_space(), build_nb201_space()}) {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const DiscreteArch a = sample_random(s, seed);
      ASSERT_EQ(parse_arch(s, arch_to_string(s, a)), a);
    }
  }
}

TEST(ArchString, MalformedReportsPosition) {
  const SpaceDef s = build_nb201_space();
  try {
    parse_arch(s, "|skip_connect~0|+|bogus~0|skip_connect~1|+|none~0|none~1|none~2|");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_GT(e.position(), 0u);
  }
  EXPECT_THROW(parse_arch(s, ""), ParseError);
  EXPECT_THROW(parse_arch(s, "|none~0|+|none~0|none~1|"), ParseError);
  EXPECT_THROW(parse_arch(build_anynet_space(), "D1=1;W1=48"), SpaceError);
}

TEST(ArchJson, AnynetStagedKeysRoundTrip) {
  const SpaceDef s = build_anynet_space();
  const nlohmann::json j = arch_to_json(s, regnetx600());
  EXPECT_EQ(j.at("d"), nlohmann::json({1, 3, 5, 7}));
  EXPECT_EQ(j.at("w"), nlohmann::json({48, 96, 240, 528}));
  EXPECT_EQ(j.at("g"), nlohmann::json({2, 4, 10, 22}));
  EXPECT_EQ(arch_from_json(s, j), regnetx600());
}

TEST(ArchJson, TopologyRoundTrip) {
  const SpaceDef s = build_nb201_space();
  const DiscreteArch a{{0, 1, 2, 3, 4, 3}};
  EXPECT_EQ(arch_from_json(s, arch_to_json(s, a)), a);
  EXPECT_EQ(arch_from_json(s, nlohmann::json{{"arch", arch_to_string(s, a)}}), a);
}

TEST(SpaceJson, RoundTripPreservesFingerprint) {
  for (const SpaceDef& s : {build_anynet_space(), build_nb201_space()}) {
    const SpaceDef back = space_from_json(space_to_json(s));
    EXPECT_EQ(space_fingerprint(back), space_fingerprint(s));
    EXPECT_EQ(back.params.size(), s.params.size());
  }
  EXPECT_NE(space_fingerprint(build_anynet_space()),
            space_fingerprint(build_nb201_space()));
}

TEST(SpaceJson, LoadFromFileAndBuiltins) {
  const std::string path = ::testing::TempDir() + "/space.json";
  {
    std::ofstream os(path);
    os << space_to_json(build_anynet_space()).dump();
  }
  EXPECT_EQ(space_fingerprint(load_space(path)),
            space_fingerprint(build_anynet_space()));
  EXPECT_EQ(load_space("builtin:nb201").name, "nb201");
  EXPECT_THROW(load_space("/no/such/space.json"), SpaceError);
}

TEST(SpaceValidate, RejectsBrokenDefinitions) {
  SpaceDef s = build_anynet_space();
  s.params[0].lo = 20;  // lo > hi
  EXPECT_THROW(s.validate(), SpaceError);
  s = build_anynet_space();
  s.params[at(1, kG)].width_ref = "W9";
  EXPECT_THROW(s.validate(), SpaceError);
  s = build_anynet_space();
  s.params[at(1, kR)].choices = {1.0, 0.5};  // not sorted
  EXPECT_THROW(s.validate(), SpaceError);
  SpaceDef t = build_nb201_space();
  t.topology.adjacency[7][0] = 1;  // cycle back to the input
  EXPECT_THROW(t.validate(), SpaceError);
  SpaceDef empty;
  EXPECT_THROW(empty.validate(), SpaceError);
}

TEST(ForEachMember, SmallSizeSpaceVisitsEveryMemberOnce) {
  SpaceDef s;
  s.name = "toy";
  ParamSpec w;
  w.name = "W1";
  w.kind = DomainKind::kDivisible;
  w.lo = 8;
  w.hi = 24;
  w.step = 8;
  w.span_lo = 8;
  w.span_hi = 24;
  ParamSpec g;
  g.name = "G1";
  g.kind = DomainKind::kDivisorOf;
  g.lo = 1;
  g.hi = 32;
  g.width_ref = "W1";
  g.span_lo = 1;
  g.span_hi = 32;
  s.params = {w, g};
  s.validate();
  // divisors: 8 -> 4, 16 -> 5, 24 -> 8
  std::set<std::string> keys;
  for_each_member(s, [&](const DiscreteArch& a) { keys.insert(arch_to_string(s, a)); });
  EXPECT_EQ(keys.size(), 17u);
  EXPECT_DOUBLE_EQ(cardinality(s), 17.0);
}

}  // namespace
}  // namespace gradnas
