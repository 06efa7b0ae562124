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

#ifndef GRADNAS_GRAD_SEARCH_HPP_
#define GRADNAS_GRAD_SEARCH_HPP_

// Predictor-guided projected gradient search.
//
// Each trajectory starts from a random architecture, encodes it, and
// repeatedly steps the encoding along -d/da [-P_m(a) + alpha P_aux(a)] with
// SGD momentum. The continuous state is kept between steps (clamped to the
// unit box for size spaces); every step it is projected to a discrete
// architecture, whose cost is checked against the target window and whose
// re-encoded P_m score is recorded. Accepted architectures go to a pool
// that is deduplicated, sorted by score and truncated to the top K.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradnas/arch_space.hpp"
#include "gradnas/predictor.hpp"

namespace gradnas {

using CostFn = std::function<double(const DiscreteArch&)>;

struct SearchConfig {
  int trajectories = 1000;  // T_max
  int iterations = 100;     // t_max
  double lr = 0.02;         // eta
  double lr_factor = 0.1;   // applied at ceil(t_max/3) and ceil(2 t_max/3)
  double momentum = 0.9;
  double alpha = 0.0;
  std::optional<double> target_flops;
  std::optional<double> delta;  // defaults to 5% of the target
  int top_k = 30;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool record_curve = false;

  // Size-space defaults: eta 0.02 divided by 10 at 1/3 and 2/3.
  static SearchConfig size_defaults();
  // Topology defaults: 200 iterations, lr 1.0 halved at 1/3 and 2/3, K = 40.
  static SearchConfig topology_defaults();

  void validate() const;
  double window_delta() const;
  LrSchedule schedule() const;
};

struct Provenance {
  int trajectory = 0;
  std::uint64_t trajectory_seed = 0;
  int iteration = 0;
  double alpha = 0.0;
};

struct ModelPoolEntry {
  DiscreteArch arch;
  std::string key;   // canonical string
  double score = 0;  // denormalised P_m of the projected architecture
  double flops = 0;  // analytic cost when available, else P_aux estimate
  Provenance provenance;
};

struct CurvePoint {
  int trajectory = 0;
  int iteration = 0;
  double score = 0;
  double flops = 0;
  bool accepted = false;
  std::string key;
};

struct ModelPool {
  std::vector<ModelPoolEntry> entries;  // sorted, unique keys
  bool truncated = false;  // fewer entries than the requested K
  std::size_t failed_trajectories = 0;
  std::size_t candidates_explored = 0;  // trajectories x iterations
  std::vector<CurvePoint> curve;
};

class EmptyPoolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SearchProblem {
  const SpaceDef* space = nullptr;
  const Predictor* main = nullptr;
  const Predictor* aux = nullptr;  // optional
  CostFn cost;                     // optional analytic cost
  // Optional closed-form replacement for the predictors: loss to minimise
  // and its gradient for one 1-sample encoding, plus the score used to rank
  // projected archs. Both must be set together; main/aux are then unused.
  std::function<double(const Matrix& x, Matrix* grad)> objective;
  std::function<double(const DiscreteArch&)> score;
};

struct ObjectiveResult {
  double loss = 0.0;  // -P_m + alpha P_aux, standardised units
  Matrix grad;        // d loss / d encoding; zero on frozen rows
};

ObjectiveResult objective_grad(const SearchProblem& problem,
                               const Encoding& enc, double alpha);

struct TrajectoryResult {
  std::vector<ModelPoolEntry> entries;  // unique within the trajectory
  std::vector<CurvePoint> curve;
  Encoding final_encoding;
  DiscreteArch final_arch;
  bool failed = false;
  std::string failure;
};

TrajectoryResult run_trajectory(const SearchProblem& problem,
                                const DiscreteArch& init,
                                const SearchConfig& cfg, int trajectory = 0);

// Same as run_trajectory, but starting from an arbitrary continuous point.
TrajectoryResult run_trajectory_from(const SearchProblem& problem,
                                     const Encoding& init,
                                     const SearchConfig& cfg,
                                     int trajectory = 0);

// All accepted architectures of T_max trajectories, deduplicated (max
// score kept) and sorted by score descending, canonical string ascending.
// Trajectories run in fixed chunks so the result does not depend on
// cfg.jobs.
ModelPool search_pool(const SearchProblem& problem, const SearchConfig& cfg);

// search_pool truncated to cfg.top_k. Throws EmptyPoolError when nothing
// landed in the window.
ModelPool run_search(const SearchProblem& problem, const SearchConfig& cfg);

// Deduplicating merge (max score wins) followed by the canonical sort.
std::vector<ModelPoolEntry> merge_pools(
    const std::vector<std::vector<ModelPoolEntry>>& pools);
void sort_pool(std::vector<ModelPoolEntry>& entries);

struct TargetPool {
  double target = 0;
  ModelPool pool;
  std::vector<std::string> empty_cells;  // messages for empty (target, alpha)
};

inline const std::vector<double> kDefaultAlphaGrid = {0.05, 0.1, 0.2, 0.5,
                                                      1.0};

// run_search over every (target, alpha) pair; pools merged per target.
// Fails only when every alpha of some target came back empty.
std::vector<TargetPool> alpha_grid(const SearchProblem& problem,
                                   const std::vector<double>& targets,
                                   const std::vector<double>& grid,
                                   const SearchConfig& cfg);

}  // namespace gradnas

#endif  // GRADNAS_GRAD_SEARCH_HPP_
