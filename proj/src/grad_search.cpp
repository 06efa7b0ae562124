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

#include "gradnas/grad_search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "gradnas/cost_model.hpp"
#include "gradnas/seed.hpp"

namespace gradnas {

namespace {

// Trajectories per batched chunk. Fixed so that floating-point results do
// not depend on the worker count.
constexpr std::size_t kChunk = 32;

void check_problem(const SearchProblem& p, double alpha) {
  if (p.space == nullptr) {
    throw std::invalid_argument("search problem needs a space");
  }
  if (static_cast<bool>(p.objective) != static_cast<bool>(p.score)) {
    throw std::invalid_argument("objective and score must be set together");
  }
  if (p.objective) return;
  if (p.main == nullptr) {
    throw std::invalid_argument("search problem needs a main predictor");
  }
  if (alpha != 0.0 && p.aux == nullptr) {
    throw std::invalid_argument("alpha != 0 requires an auxiliary predictor");
  }
}

// Gradient of -P_m + alpha P_aux for a stacked batch; losses per sample.
Matrix batch_objective(const SearchProblem& p, const Matrix& x, double alpha,
                       const Matrix& mask, std::vector<double>* losses) {
  const Eigen::Index r = mask.rows();
  if (p.objective) {
    const Eigen::Index batch = x.rows() / r;
    Matrix grad(x.rows(), x.cols());
    std::vector<double> loss(static_cast<std::size_t>(batch));
    Matrix g;
    for (Eigen::Index b = 0; b < batch; ++b) {
      loss[static_cast<std::size_t>(b)] = p.objective(x.middleRows(b * r, r), &g);
      grad.middleRows(b * r, r) = g.array() * mask.array();
    }
    if (losses != nullptr) *losses = std::move(loss);
    return grad;
  }
  ForwardPass pm = p.main->forward(x, Mode::kEval);
  const Eigen::Index batch = pm.batch;
  Matrix grad = p.main->backward(pm, Matrix::Constant(batch, 1, -1.0));
  std::vector<double> loss(static_cast<std::size_t>(batch));
  for (Eigen::Index b = 0; b < batch; ++b) {
    loss[static_cast<std::size_t>(b)] = -pm.scores(b, 0);
  }
  if (alpha != 0.0) {
    ForwardPass pa = p.aux->forward(x, Mode::kEval);
    grad += p.aux->backward(pa, Matrix::Constant(batch, 1, alpha));
    for (Eigen::Index b = 0; b < batch; ++b) {
      loss[static_cast<std::size_t>(b)] += alpha * pa.scores(b, 0);
    }
  }
  for (Eigen::Index b = 0; b < batch; ++b) {
    grad.middleRows(b * r, r).array() *= mask.array();
  }
  if (losses != nullptr) *losses = std::move(loss);
  return grad;
}

struct ChunkInput {
  std::vector<Encoding> inits;
  std::vector<int> trajectory;
  std::vector<std::uint64_t> seeds;
};

std::vector<TrajectoryResult> run_chunk_batched(const SearchProblem& p,
                                                const SearchConfig& cfg,
                                                const ChunkInput& in) {
  const SpaceDef& space = *p.space;
  const std::size_t batch = in.inits.size();
  const Eigen::Index r = space.encoding_rows();
  const Matrix mask = trainable_mask(space);
  const LrSchedule sched = cfg.schedule();
  const bool windowed = cfg.target_flops.has_value();
  const double target = cfg.target_flops.value_or(0.0);
  const double delta = windowed ? cfg.window_delta() : 0.0;

  std::vector<Encoding> one(1);
  Matrix x = stack_encodings(in.inits);
  Matrix velocity = Matrix::Zero(x.rows(), x.cols());

  std::vector<TrajectoryResult> out(batch);
  std::vector<std::string> last_key(batch);
  std::vector<double> last_score(batch, 0.0);
  std::vector<double> last_flops(batch, 0.0);
  std::vector<std::unordered_map<std::string, std::size_t>> seen(batch);

  for (int t = 1; t <= cfg.iterations; ++t) {
    Matrix grad = batch_objective(p, x, cfg.alpha, mask, nullptr);
    const double lr = sched.at(t - 1);
    for (std::size_t b = 0; b < batch; ++b) {
      if (out[b].failed) continue;
      const auto rows = static_cast<Eigen::Index>(b) * r;
      if (!grad.middleRows(rows, r).allFinite()) {
        out[b].failed = true;
        out[b].failure = "non-finite gradient at iteration " + std::to_string(t);
        continue;
      }
      velocity.middleRows(rows, r) =
          cfg.momentum * velocity.middleRows(rows, r) + grad.middleRows(rows, r);
      x.middleRows(rows, r) -= lr * velocity.middleRows(rows, r);
    }
    if (space.kind == SpaceKind::kSize) x = x.cwiseMax(0.0).cwiseMin(1.0);

    // Read out the discrete architectures; score only those that changed.
    std::vector<DiscreteArch> archs(batch);
    std::vector<std::string> keys(batch);
    std::vector<std::size_t> changed;
    std::vector<Encoding> changed_enc;
    for (std::size_t b = 0; b < batch; ++b) {
      if (out[b].failed) continue;
      one[0].values = x.middleRows(static_cast<Eigen::Index>(b) * r, r);
      archs[b] = project(space, one[0]);
      keys[b] = arch_to_string(space, archs[b]);
      if (keys[b] != last_key[b]) {
        changed.push_back(b);
        changed_enc.push_back(encode(space, archs[b]));
      }
    }
    if (!changed.empty()) {
      std::vector<double> scores;
      if (p.score) {
        for (std::size_t b : changed) scores.push_back(p.score(archs[b]));
      } else {
        scores = predict_denorm(*p.main, changed_enc);
      }
      std::vector<double> aux_flops;
      if (!p.cost && p.aux != nullptr && !p.objective) {
        aux_flops = predict_denorm(*p.aux, changed_enc);
      }
      for (std::size_t k = 0; k < changed.size(); ++k) {
        const std::size_t b = changed[k];
        last_key[b] = keys[b];
        last_score[b] = scores[k];
        if (p.cost) {
          last_flops[b] = p.cost(archs[b]);
        } else {
          last_flops[b] = aux_flops.empty() ? 0.0 : aux_flops[k];
        }
      }
    }
    for (std::size_t b = 0; b < batch; ++b) {
      if (out[b].failed) continue;
      const bool accept = !windowed || in_window(last_flops[b], target, delta);
      if (accept && !seen[b].contains(keys[b])) {
        seen[b].emplace(keys[b], out[b].entries.size());
        out[b].entries.push_back(
            {archs[b], keys[b], last_score[b], last_flops[b],
             {in.trajectory[b], in.seeds[b], t, cfg.alpha}});
      }
      if (cfg.record_curve) {
        out[b].curve.push_back({in.trajectory[b], t, last_score[b],
                                last_flops[b], accept, keys[b]});
      }
      if (t == cfg.iterations) out[b].final_arch = archs[b];
    }
  }
  for (std::size_t b = 0; b < batch; ++b) {
    out[b].final_encoding.values =
        x.middleRows(static_cast<Eigen::Index>(b) * r, r);
  }
  return out;
}

// Batched run; on a numeric exception the chunk is replayed one trajectory
// at a time so a single bad trajectory cannot take the others down.
std::vector<TrajectoryResult> run_chunk(const SearchProblem& p,
                                        const SearchConfig& cfg,
                                        const ChunkInput& in) {
  try {
    return run_chunk_batched(p, cfg, in);
  } catch (const NumericError& e) {
    if (in.inits.size() == 1) {
      TrajectoryResult failed;
      failed.failed = true;
      failed.failure = e.what();
      failed.final_encoding = in.inits[0];
      return {failed};
    }
  }
  std::vector<TrajectoryResult> out;
  for (std::size_t b = 0; b < in.inits.size(); ++b) {
    ChunkInput single{{in.inits[b]}, {in.trajectory[b]}, {in.seeds[b]}};
    auto res = run_chunk(p, cfg, single);
    out.push_back(std::move(res[0]));
  }
  return out;
}

bool entry_before(const ModelPoolEntry& a, const ModelPoolEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.key < b.key;
}

// Dedup preference: higher score, then earlier provenance.
bool entry_preferred(const ModelPoolEntry& a, const ModelPoolEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.provenance.alpha != b.provenance.alpha) {
    return a.provenance.alpha < b.provenance.alpha;
  }
  if (a.provenance.trajectory != b.provenance.trajectory) {
    return a.provenance.trajectory < b.provenance.trajectory;
  }
  return a.provenance.iteration < b.provenance.iteration;
}

std::string format_window(double target, double delta) {
  std::ostringstream os;
  os << "[" << target - delta << ", " << target + delta << "]";
  return os.str();
}

}  // namespace

SearchConfig SearchConfig::size_defaults() {
  SearchConfig c;
  c.trajectories = 1000;
  c.iterations = 100;
  c.lr = 0.02;
  c.lr_factor = 0.1;
  c.top_k = 30;
  return c;
}

SearchConfig SearchConfig::topology_defaults() {
  SearchConfig c;
  c.trajectories = 100;
  c.iterations = 200;
  // Logit steps of 0.02 never flip a beta = 5 argmax; see README.
  c.lr = 1.0;
  c.lr_factor = 0.5;
  c.top_k = 40;
  return c;
}

void SearchConfig::validate() const {
  if (trajectories < 1) throw std::invalid_argument("trajectories must be >= 1");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (delta && *delta < 0.0) throw std::invalid_argument("delta must be >= 0");
  if (target_flops && !(*target_flops > 0.0)) {
    throw std::invalid_argument("target FLOPs must be > 0");
  }
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
}

double SearchConfig::window_delta() const {
  if (delta) return *delta;
  return 0.05 * target_flops.value_or(0.0);
}

LrSchedule SearchConfig::schedule() const {
  return LrSchedule::thirds(lr, iterations, lr_factor);
}

ObjectiveResult objective_grad(const SearchProblem& problem,
                               const Encoding& enc, double alpha) {
  check_problem(problem, alpha);
  if (enc.values.rows() != problem.space->encoding_rows() ||
      enc.values.cols() != problem.space->encoding_cols()) {
    throw ShapeError("objective_grad: encoding shape mismatch");
  }
  std::vector<double> losses;
  ObjectiveResult r;
  r.grad = batch_objective(problem, enc.values, alpha,
                           trainable_mask(*problem.space), &losses);
  r.loss = losses[0];
  if (!r.grad.allFinite() || !std::isfinite(r.loss)) {
    throw NumericError("objective_grad: non-finite gradient");
  }
  return r;
}

TrajectoryResult run_trajectory_from(const SearchProblem& problem,
                                     const Encoding& init,
                                     const SearchConfig& cfg, int trajectory) {
  check_problem(problem, cfg.alpha);
  cfg.validate();
  ChunkInput in{{init}, {trajectory}, {cfg.seed}};
  return std::move(run_chunk(problem, cfg, in)[0]);
}

TrajectoryResult run_trajectory(const SearchProblem& problem,
                                const DiscreteArch& init,
                                const SearchConfig& cfg, int trajectory) {
  return run_trajectory_from(problem, encode(*problem.space, init), cfg,
                             trajectory);
}

void sort_pool(std::vector<ModelPoolEntry>& entries) {
  std::sort(entries.begin(), entries.end(), entry_before);
}

std::vector<ModelPoolEntry> merge_pools(
    const std::vector<std::vector<ModelPoolEntry>>& pools) {
  std::unordered_map<std::string, ModelPoolEntry> best;
  for (const auto& pool : pools) {
    for (const auto& e : pool) {
      auto it = best.find(e.key);
      if (it == best.end()) {
        best.emplace(e.key, e);
      } else if (entry_preferred(e, it->second)) {
        it->second = e;
      }
    }
  }
  std::vector<ModelPoolEntry> out;
  out.reserve(best.size());
  for (auto& [key, e] : best) out.push_back(std::move(e));
  sort_pool(out);
  return out;
}

ModelPool search_pool(const SearchProblem& problem, const SearchConfig& cfg) {
  check_problem(problem, cfg.alpha);
  cfg.validate();
  const SpaceDef& space = *problem.space;
  const std::uint64_t search_seed = derive_seed(cfg.seed, Stream::kSearch);

  const auto total = static_cast<std::size_t>(cfg.trajectories);
  const std::size_t chunks = (total + kChunk - 1) / kChunk;
  std::vector<ChunkInput> inputs(chunks);
  for (std::size_t i = 0; i < total; ++i) {
    ChunkInput& c = inputs[i / kChunk];
    const std::uint64_t s = derive_seed(search_seed, i);
    c.inits.push_back(encode(space, sample_random(space, s)));
    c.trajectory.push_back(static_cast<int>(i));
    c.seeds.push_back(s);
  }

  std::vector<std::vector<TrajectoryResult>> results(chunks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      try {
        results[c] = run_chunk(problem, cfg, inputs[c]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), chunks);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }
  if (error) std::rethrow_exception(error);

  ModelPool pool;
  pool.candidates_explored = total * static_cast<std::size_t>(cfg.iterations);
  std::vector<std::vector<ModelPoolEntry>> per_trajectory;
  for (auto& chunk : results) {
    for (auto& tr : chunk) {
      if (tr.failed) ++pool.failed_trajectories;
      per_trajectory.push_back(std::move(tr.entries));
      if (cfg.record_curve) {
        pool.curve.insert(pool.curve.end(), tr.curve.begin(), tr.curve.end());
      }
    }
  }
  pool.entries = merge_pools(per_trajectory);
  return pool;
}

ModelPool run_search(const SearchProblem& problem, const SearchConfig& cfg) {
  ModelPool pool = search_pool(problem, cfg);
  if (pool.entries.empty()) {
    std::string msg = "no candidates in window";
    if (cfg.target_flops) {
      msg += " " + format_window(*cfg.target_flops, cfg.window_delta());
    }
    msg += " (alpha " + std::to_string(cfg.alpha) +
           "); try a larger delta or a different alpha";
    throw EmptyPoolError(msg);
  }
  const auto k = static_cast<std::size_t>(cfg.top_k);
  if (pool.entries.size() < k) {
    pool.truncated = true;
  } else {
    pool.entries.resize(k);
  }
  return pool;
}

std::vector<TargetPool> alpha_grid(const SearchProblem& problem,
                                   const std::vector<double>& targets,
                                   const std::vector<double>& grid,
                                   const SearchConfig& cfg) {
  if (targets.empty() || grid.empty()) {
    throw std::invalid_argument("alpha_grid: targets and grid must be nonempty");
  }
  std::vector<TargetPool> out;
  for (double target : targets) {
    TargetPool tp;
    tp.target = target;
    std::vector<std::vector<ModelPoolEntry>> cells;
    for (double alpha : grid) {
      SearchConfig c = cfg;
      c.alpha = alpha;
      c.target_flops = target;
      if (!cfg.delta && cfg.target_flops) {
        c.delta = std::nullopt;  // 5% of each target
      }
      try {
        ModelPool pool = run_search(problem, c);
        tp.pool.failed_trajectories += pool.failed_trajectories;
        tp.pool.candidates_explored += pool.candidates_explored;
        if (cfg.record_curve) {
          tp.pool.curve.insert(tp.pool.curve.end(), pool.curve.begin(),
                               pool.curve.end());
        }
        cells.push_back(std::move(pool.entries));
      } catch (const EmptyPoolError& e) {
        tp.empty_cells.push_back(e.what());
      }
    }
    if (cells.empty()) {
      throw EmptyPoolError("every alpha came back empty for target " +
                           std::to_string(target) + ": " + tp.empty_cells.front());
    }
    tp.pool.entries = merge_pools(cells);
    const auto k = static_cast<std::size_t>(cfg.top_k);
    if (tp.pool.entries.size() < k) {
      tp.pool.truncated = true;
    } else {
      tp.pool.entries.resize(k);
    }
    out.push_back(std::move(tp));
  }
  return out;
}

}  // namespace gradnas
