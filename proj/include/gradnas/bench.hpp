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

#ifndef GRADNAS_BENCH_HPP_
#define GRADNAS_BENCH_HPP_

// Sample collection, top-K evaluation, random baselines and the repeated
// experiment protocols built on them.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradnas/arch_space.hpp"
#include "gradnas/grad_search.hpp"
#include "gradnas/oracle.hpp"
#include "gradnas/predictor.hpp"

namespace gradnas {

// N distinct architectures, each queried once. performance = selection
// metric, cost = oracle cost. Throws std::invalid_argument when n < 2 or n
// exceeds the space cardinality.
std::vector<TrainingSample> collect_training_set(const SpaceDef& space,
                                                 const Oracle& oracle, int n,
                                                 std::uint64_t seed);

struct TopKResult {
  DiscreteArch arch;
  std::string key;
  double selection = 0;
  double report = 0;
  double cost = 0;
  std::size_t queried = 0;
  bool truncated = false;  // pool had fewer than K entries
};

// Queries the first min(K, |pool|) entries and keeps the best by selection
// metric (earliest entry on ties).
TopKResult evaluate_topk(const std::vector<ModelPoolEntry>& pool,
                         const Oracle& oracle, int k);

// Mode (a): sample `budget` distinct archs and query each; never touches a
// predictor.
TopKResult pure_random_search(const SpaceDef& space, const Oracle& oracle,
                              int budget, std::uint64_t seed);

// Mode (b): sample `candidates` distinct archs, rank them by P_m, query the
// top K. With a cost function and target, only archs inside the window are
// ranked.
TopKResult filtered_random_search(const SpaceDef& space, const Oracle& oracle,
                                  const Predictor& main, int candidates, int k,
                                  std::uint64_t seed, const CostFn& cost = {},
                                  std::optional<double> target = {},
                                  std::optional<double> delta = {});

// Ranked candidate list used by filtered_random_search, exposed for tests.
std::vector<ModelPoolEntry> random_pool(const SpaceDef& space,
                                        const Predictor& main, int candidates,
                                        std::uint64_t seed,
                                        const CostFn& cost = {},
                                        std::optional<double> target = {},
                                        std::optional<double> delta = {});

enum class Method { kGradient, kRandom, kFilteredRandom };
std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct ProtocolConfig {
  Method method = Method::kGradient;
  int n = 30;
  int k = 40;
  int repeats = 15;
  std::uint64_t seed = 0;
  int jobs = 1;  // repeats in parallel; results do not depend on it
  // Gradient search; top_k is overridden by k and seed by the repeat seed.
  SearchConfig search = SearchConfig::topology_defaults();
  TrainOptions train;
  // Candidates ranked by the filtered random baseline.
  int random_candidates = 20000;
  bool record_curve = false;  // keep the search curve of repeat 0
};

struct RepeatResult {
  int repeat = 0;
  std::uint64_t seed = 0;
  std::string arch;
  double selection = 0;
  double report = 0;
  std::size_t queries = 0;
  std::size_t pool_size = 0;
  bool truncated = false;
  std::size_t failed_trajectories = 0;
};

struct ExperimentReport {
  Method method = Method::kGradient;
  int n = 0;
  int k = 0;
  std::vector<RepeatResult> repeats;
  double mean = 0;
  double std = 0;              // sample standard deviation
  bool std_degenerate = false; // single repeat: std reported as 0
  std::size_t budget = 0;      // oracle queries allowed per repeat
  double wall_seconds = 0;
  std::vector<CurvePoint> curve;

  void summarise();
};

// Repeat r uses seed derive_seed(cfg.seed, r) for collection, predictor
// init and search alike. Each repeat runs behind a counting oracle with
// budget N + K (gradient, filtered random) or N + K queries of pure random
// sampling.
ExperimentReport run_protocol(const Oracle& oracle, const ProtocolConfig& cfg);

struct AblationCell {
  int n = 0;
  int k = 0;
  ExperimentReport report;
};

// Full Ns x Ks grid, one fresh protocol per cell.
std::vector<AblationCell> run_nk_ablation(const Oracle& oracle,
                                          const std::vector<int>& ns,
                                          const std::vector<int>& ks,
                                          const ProtocolConfig& base);

}  // namespace gradnas

#endif  // GRADNAS_BENCH_HPP_
