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

#include "gradnas/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <iostream>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_set>

#include "gradnas/cost_model.hpp"
#include "gradnas/seed.hpp"

namespace gradnas {

namespace {

// `count` distinct members, or every member when count reaches the
// cardinality and `allow_all` is set.
std::vector<DiscreteArch> sample_distinct(const SpaceDef& space, int count,
                                          std::uint64_t seed, bool allow_all) {
  const double card = cardinality(space);
  if (static_cast<double>(count) > card) {
    if (!allow_all) {
      throw std::invalid_argument(
          "requested " + std::to_string(count) +
          " distinct archs but the space has only " +
          std::to_string(static_cast<long long>(card)) + " members");
    }
  }
  std::vector<DiscreteArch> out;
  if (static_cast<double>(count) >= card) {
    for_each_member(space, [&](const DiscreteArch& a) { out.push_back(a); });
    return out;
  }
  std::mt19937_64 rng(seed);
  std::unordered_set<std::string> seen;
  // Expected draws stay small unless count is close to the cardinality;
  // the cap only guards against a broken sampler.
  const std::size_t max_draws = 1000 * static_cast<std::size_t>(count) + 100000;
  for (std::size_t draw = 0; out.size() < static_cast<std::size_t>(count); ++draw) {
    if (draw == max_draws) {
      throw std::runtime_error("could not draw enough distinct archs");
    }
    DiscreteArch a = sample_random(space, rng);
    if (seen.insert(arch_to_string(space, a)).second) out.push_back(std::move(a));
  }
  return out;
}

template <typename Fn>
void parallel_for(int count, int jobs, Fn fn) {
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min(jobs, count));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<TrainingSample> collect_training_set(const SpaceDef& space,
                                                 const Oracle& oracle, int n,
                                                 std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("need at least 2 training samples");
  std::vector<TrainingSample> out;
  for (auto& a : sample_distinct(space, n, seed, false)) {
    const OracleResult r = oracle.query(a);
    out.push_back({std::move(a), r.selection, r.cost});
  }
  return out;
}

TopKResult evaluate_topk(const std::vector<ModelPoolEntry>& pool,
                         const Oracle& oracle, int k) {
  if (pool.empty()) throw std::invalid_argument("evaluate_topk: empty pool");
  if (k < 1) throw std::invalid_argument("evaluate_topk: K must be >= 1");
  TopKResult best;
  const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(k));
  best.truncated = take < static_cast<std::size_t>(k);
  if (best.truncated) {
    std::cerr << "warning: pool has " << pool.size() << " entries, fewer than K="
              << k << "; evaluating all\n";
  }
  for (std::size_t i = 0; i < take; ++i) {
    const OracleResult r = oracle.query(pool[i].arch);
    if (i == 0 || r.selection > best.selection) {
      best.arch = pool[i].arch;
      best.key = pool[i].key;
      best.selection = r.selection;
      best.report = r.report;
      best.cost = r.cost;
    }
  }
  best.queried = take;
  return best;
}

TopKResult pure_random_search(const SpaceDef& space, const Oracle& oracle,
                              int budget, std::uint64_t seed) {
  if (budget < 1) throw std::invalid_argument("budget must be >= 1");
  TopKResult best;
  const auto archs = sample_distinct(space, budget, seed, false);
  for (std::size_t i = 0; i < archs.size(); ++i) {
    const OracleResult r = oracle.query(archs[i]);
    if (i == 0 || r.selection > best.selection) {
      best.arch = archs[i];
      best.key = arch_to_string(space, archs[i]);
      best.selection = r.selection;
      best.report = r.report;
      best.cost = r.cost;
    }
  }
  best.queried = archs.size();
  return best;
}

std::vector<ModelPoolEntry> random_pool(const SpaceDef& space,
                                        const Predictor& main, int candidates,
                                        std::uint64_t seed, const CostFn& cost,
                                        std::optional<double> target,
                                        std::optional<double> delta) {
  if (candidates < 1) throw std::invalid_argument("candidates must be >= 1");
  if (target && !cost) {
    throw std::invalid_argument("a FLOPs target needs a cost function");
  }
  const double d = delta.value_or(0.05 * target.value_or(0.0));
  std::vector<ModelPoolEntry> pool;
  std::vector<Encoding> encs;
  for (auto& a : sample_distinct(space, candidates, seed, true)) {
    ModelPoolEntry e;
    e.flops = cost ? cost(a) : 0.0;
    if (target && !in_window(e.flops, *target, d)) continue;
    e.key = arch_to_string(space, a);
    encs.push_back(encode(space, a));
    e.arch = std::move(a);
    pool.push_back(std::move(e));
  }
  // Chunked so the batched forward shapes do not depend on the total.
  constexpr std::size_t kChunk = 256;
  for (std::size_t s = 0; s < encs.size(); s += kChunk) {
    const std::size_t e = std::min(encs.size(), s + kChunk);
    const std::vector<Encoding> part(encs.begin() + static_cast<std::ptrdiff_t>(s),
                                     encs.begin() + static_cast<std::ptrdiff_t>(e));
    const auto scores = predict_denorm(main, part);
    for (std::size_t i = s; i < e; ++i) pool[i].score = scores[i - s];
  }
  sort_pool(pool);
  return pool;
}

TopKResult filtered_random_search(const SpaceDef& space, const Oracle& oracle,
                                  const Predictor& main, int candidates, int k,
                                  std::uint64_t seed, const CostFn& cost,
                                  std::optional<double> target,
                                  std::optional<double> delta) {
  if (candidates < k) throw std::invalid_argument("candidate budget must be >= K");
  const auto pool = random_pool(space, main, candidates, seed, cost, target, delta);
  if (pool.empty()) throw EmptyPoolError("no random candidate inside the window");
  return evaluate_topk(pool, oracle, k);
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kGradient: return "gradient";
    case Method::kRandom: return "random";
    case Method::kFilteredRandom: return "filtered-random";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "gradient") return Method::kGradient;
  if (name == "random") return Method::kRandom;
  if (name == "filtered-random") return Method::kFilteredRandom;
  throw std::invalid_argument("unknown method '" + name +
                              "' (gradient, random, filtered-random)");
}

void ExperimentReport::summarise() {
  if (repeats.empty()) throw std::invalid_argument("report has no repeats");
  double sum = 0;
  for (const auto& r : repeats) sum += r.report;
  const double count = static_cast<double>(repeats.size());
  mean = sum / count;
  std_degenerate = repeats.size() == 1;
  std = 0;
  if (!std_degenerate) {
    double ss = 0;
    for (const auto& r : repeats) ss += (r.report - mean) * (r.report - mean);
    std = std::sqrt(ss / (count - 1));
  }
}

ExperimentReport run_protocol(const Oracle& oracle, const ProtocolConfig& cfg) {
  if (cfg.repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  if (cfg.k < 1) throw std::invalid_argument("K must be >= 1");
  if (cfg.method != Method::kRandom && cfg.n < 2) {
    throw std::invalid_argument("N must be >= 2");
  }
  const auto start = std::chrono::steady_clock::now();
  const SpaceDef& space = oracle.space();
  const PredictorSpec spec = PredictorSpec::for_space(space);
  const std::size_t budget = static_cast<std::size_t>(cfg.n + cfg.k);

  ExperimentReport rep;
  rep.method = cfg.method;
  rep.n = cfg.n;
  rep.k = cfg.k;
  rep.budget = budget;
  rep.repeats.resize(static_cast<std::size_t>(cfg.repeats));

  parallel_for(cfg.repeats, cfg.jobs, [&](int r) {
    const std::uint64_t rs = derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    CountingOracle counted(oracle, budget);
    RepeatResult& out = rep.repeats[static_cast<std::size_t>(r)];
    out.repeat = r;
    out.seed = rs;
    TopKResult top;
    if (cfg.method == Method::kRandom) {
      top = pure_random_search(space, counted, static_cast<int>(budget),
                               derive_seed(rs, Stream::kBaseline));
    } else {
      const auto samples = collect_training_set(
          space, counted, cfg.n, derive_seed(rs, Stream::kSampleCollection));
      const TrainResult trained =
          train(spec, space, samples, Role::kMain, rs, cfg.train);
      std::vector<ModelPoolEntry> pool;
      if (cfg.method == Method::kGradient) {
        SearchConfig sc = cfg.search;
        sc.top_k = cfg.k;
        sc.seed = rs;
        sc.jobs = 1;
        sc.record_curve = cfg.record_curve && r == 0;
        SearchProblem problem{&space, &trained.predictor, nullptr, {}, {}, {}};
        ModelPool mp = search_pool(problem, sc);
        out.failed_trajectories = mp.failed_trajectories;
        if (sc.record_curve) rep.curve = std::move(mp.curve);
        pool = std::move(mp.entries);
      } else {
        pool = random_pool(space, trained.predictor, cfg.random_candidates,
                           derive_seed(rs, Stream::kBaseline));
      }
      out.pool_size = pool.size();
      top = evaluate_topk(pool, counted, cfg.k);
    }
    out.arch = top.key;
    out.selection = top.selection;
    out.report = top.report;
    out.truncated = top.truncated;
    out.queries = counted.queries();
  });
  rep.summarise();
  rep.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start).count();
  return rep;
}

std::vector<AblationCell> run_nk_ablation(const Oracle& oracle,
                                          const std::vector<int>& ns,
                                          const std::vector<int>& ks,
                                          const ProtocolConfig& base) {
  if (ns.empty() || ks.empty()) {
    throw std::invalid_argument("ablation needs nonempty N and K lists");
  }
  std::vector<AblationCell> cells;
  for (int n : ns) {
    for (int k : ks) {
      ProtocolConfig cfg = base;
      cfg.n = n;
      cfg.k = k;
      cells.push_back({n, k, run_protocol(oracle, cfg)});
    }
  }
  return cells;
}

}  // namespace gradnas
