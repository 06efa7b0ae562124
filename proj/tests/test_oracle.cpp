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

#include "gradnas/oracle.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <thread>
#include <unistd.h>

#include "gradnas/cost_model.hpp"
#include "test_util.hpp"

namespace gradnas {
namespace {

using testing::numeric_grad;
using testing::rel_err;

SpaceDef toy_size_space() {
  SpaceDef s;
  s.name = "toy";
  s.kind = SpaceKind::kSize;
  for (const char* n : {"a", "b", "c"}) {
    ParamSpec p;
    p.name = n;
    p.kind = DomainKind::kIntRange;
    p.lo = 0;
    p.hi = 10;
    p.span_lo = 0;
    p.span_hi = 10;
    s.params.push_back(p);
  }
  s.validate();
  return s;
}

class TabularTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    rows_ = new std::vector<std::pair<std::string, TabularMetrics>>(
        make_synthetic_nb201(build_nb201_space(), 0));
  }
  static void TearDownTestSuite() { delete rows_; }
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("gradnas_oracle_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& f) const { return (dir_ / f).string(); }

  static std::vector<std::pair<std::string, TabularMetrics>>* rows_;
  std::filesystem::path dir_;
};
std::vector<std::pair<std::string, TabularMetrics>>* TabularTest::rows_ = nullptr;

TEST_F(TabularTest, LoadRoundTripsEveryRow) {
  const SpaceDef space = build_nb201_space();
  ASSERT_EQ(rows_->size(), 15625u);
  write_tabular_csv(path("t.csv"), *rows_);
  const TabularOracle t = TabularOracle::load(path("t.csv"), space);
  EXPECT_EQ(t.size(), 15625u);
  for (std::size_t i = 0; i < rows_->size(); i += 997) {
    const TabularMetrics& m = t.at((*rows_)[i].first);
    EXPECT_EQ(m.val, (*rows_)[i].second.val);
    EXPECT_EQ(m.test, (*rows_)[i].second.test);
    EXPECT_EQ(m.flops, (*rows_)[i].second.flops);
  }
  auto shared = std::make_shared<const TabularOracle>(t);
  const TabularView view(shared, Dataset::kCifar100);
  const DiscreteArch a = parse_arch(space, (*rows_)[5].first);
  const OracleResult r = view.query(a);
  EXPECT_EQ(r.selection, (*rows_)[5].second.val[1]);
  EXPECT_EQ(r.report, (*rows_)[5].second.test[1]);
  EXPECT_EQ(r.cost, (*rows_)[5].second.flops);
}

TEST_F(TabularTest, RejectsMissingDuplicateAndBadHeader) {
  const SpaceDef space = build_nb201_space();
  auto rows = *rows_;
  const std::string dropped = rows[123].first;
  rows.erase(rows.begin() + 123);
  try {
    TabularOracle::from_rows(rows, space);
    FAIL() << "expected OracleError";
  } catch (const OracleError& e) {
    EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
  }
  rows.push_back(rows.front());
  EXPECT_THROW(TabularOracle::from_rows(rows, space), OracleError);

  {
    std::ofstream out(path("bad.csv"));
    out << "arch,acc\n";
  }
  EXPECT_THROW(TabularOracle::load(path("bad.csv"), space), OracleError);
  {
    std::ofstream out(path("short.csv"));
    out << kTabularHeader << "\n" << rows_->front().first << ",1,2\n";
  }
  EXPECT_THROW(TabularOracle::load(path("short.csv"), space), OracleError);
  {
    std::ofstream out(path("nan.csv"));
    out << kTabularHeader << "\n" << rows_->front().first << ",1,2,3,x,5,6,7,8\n";
  }
  EXPECT_THROW(TabularOracle::load(path("nan.csv"), space), OracleError);
  EXPECT_THROW(TabularOracle::load(path("nope.csv"), space), OracleError);
}

TEST_F(TabularTest, UnknownKeyIsAMiss) {
  write_tabular_csv(path("t.csv"), *rows_);
  const TabularOracle t = TabularOracle::load(path("t.csv"), build_nb201_space());
  EXPECT_THROW(t.at(std::string("|bogus~0|")), OracleMiss);
}

TEST_F(TabularTest, StandInShape) {
  // Maximum near the real CIFAR-100 ceiling; dead cells at chance; conv
  // cells cost more than skip cells.
  double best = 0, worst = 100;
  for (const auto& [key, m] : *rows_) {
    best = std::max(best, m.test[1]);
    worst = std::min(worst, m.test[1]);
  }
  EXPECT_LE(best, 73.51);
  EXPECT_GT(best, 72.0);
  EXPECT_LT(worst, 2.0);
  const SpaceDef space = build_nb201_space();
  const TabularOracle table = TabularOracle::from_rows(*rows_, space);
  const auto& all_conv = table.at(DiscreteArch{{3, 3, 3, 3, 3, 3}});
  const auto& all_skip = table.at(DiscreteArch{{1, 1, 1, 1, 1, 1}});
  EXPECT_GT(all_conv.flops, all_skip.flops);
  EXPECT_EQ(make_synthetic_nb201(space, 0)[77].second.val, (*rows_)[77].second.val);
}

TEST(Dataset, Names) {
  EXPECT_EQ(dataset_from_name("cifar10"), Dataset::kCifar10);
  EXPECT_EQ(dataset_from_name("cifar100"), Dataset::kCifar100);
  EXPECT_EQ(dataset_from_name("ImageNet16-120"), Dataset::kImageNet16);
  EXPECT_EQ(dataset_name(Dataset::kCifar100), "cifar100");
  EXPECT_ANY_THROW(dataset_from_name("mnist"));
}

TEST(Synthetic, GradientMatchesFiniteDifferences) {
  const SyntheticOracle o(build_anynet_space(), 7);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Matrix x = testing::random_matrix(1, 16, s, 0, 1);
    auto f = [&](const Matrix& v) { return o.value(v); };
    EXPECT_LT(rel_err(o.gradient(x), numeric_grad(f, x)), 1e-7);
  }
}

TEST(Synthetic, PerturbationBoundedByAmplitude) {
  const SpaceDef space = build_anynet_space();
  for (double amp : {0.0, 0.3, 1.0}) {
    const SyntheticOracle o(space, 3, amp);
    EXPECT_NEAR(o.perturbation(), amp, 1e-12);
    for (std::uint64_t s = 0; s < 200; ++s) {
      const Matrix x = testing::random_matrix(1, 16, s, 0, 1);
      const double quad = 100 - 40 * (x - o.optimum()).squaredNorm();
      EXPECT_LE(std::abs(o.value(x) - quad), amp + 1e-12);
    }
  }
  EXPECT_THROW(SyntheticOracle(space, 3, 1.5), std::invalid_argument);
}

TEST(Synthetic, SeededAndOptimumInside) {
  const SpaceDef space = build_anynet_space();
  const SyntheticOracle a(space, 1), b(space, 1), c(space, 2);
  EXPECT_EQ(a.optimum(), b.optimum());
  EXPECT_NE(a.optimum(), c.optimum());
  EXPECT_GE(a.optimum().minCoeff(), 0.2);
  EXPECT_LE(a.optimum().maxCoeff(), 0.8);
  EXPECT_TRUE(is_member(space, a.optimum_arch()));
}

TEST(Synthetic, QueryAndCost) {
  const SpaceDef space = build_anynet_space();
  const SyntheticOracle o(space, 5);
  EXPECT_TRUE(o.analytic_cost());
  const DiscreteArch a = sample_random(space, 9);
  const OracleResult r = o.query(a);
  EXPECT_EQ(r.selection, r.report);
  EXPECT_EQ(r.selection, o.value(encode(space, a).values));
  EXPECT_EQ(r.cost, static_cast<double>(anynet_cost(space, a).flops));

  const SpaceDef toy = toy_size_space();
  const SyntheticOracle t(toy, 5);
  EXPECT_FALSE(t.analytic_cost());
  EXPECT_GT(t.cost(DiscreteArch{{10, 10, 10}}), t.cost(DiscreteArch{{0, 0, 0}}));
  EXPECT_THROW(t.query(DiscreteArch{{11, 0, 0}}), MembershipError);
}

TEST(Synthetic, RefusesTopologySpaces) {
  EXPECT_THROW(SyntheticOracle(build_nb201_space(), 0), OracleError);
}

TEST(Counting, BudgetIsExact) {
  const SpaceDef toy = toy_size_space();
  const SyntheticOracle inner(toy, 0);
  const CountingOracle o(inner, 3);
  const DiscreteArch a{{1, 2, 3}};
  for (int i = 0; i < 3; ++i) EXPECT_NO_THROW(o.query(a));  // repeats count
  EXPECT_EQ(o.queries(), 3u);
  EXPECT_THROW(o.query(a), BudgetExceeded);
  EXPECT_EQ(o.queries(), 3u);
}

TEST(Counting, ThreadSafe) {
  const SpaceDef toy = toy_size_space();
  const SyntheticOracle inner(toy, 0);
  const CountingOracle o(inner, 1000);
  std::atomic<int> over{0};
  std::vector<std::thread> ts;
  for (int t = 0; t < 8; ++t) {
    ts.emplace_back([&] {
      for (int i = 0; i < 200; ++i) {
        try {
          o.query(DiscreteArch{{1, 1, 1}});
        } catch (const BudgetExceeded&) {
          ++over;
        }
      }
    });
  }
  for (auto& t : ts) t.join();
  EXPECT_EQ(o.queries(), 1000u);
  EXPECT_EQ(over.load(), 600);
}

}  // namespace
}  // namespace gradnas
