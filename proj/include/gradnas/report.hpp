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

#ifndef GRADNAS_REPORT_HPP_
#define GRADNAS_REPORT_HPP_

// Output files: report CSV, JSON summary, curve CSV, pool JSON, run
// manifest. Everything except the manifest is a pure function of the inputs
// so reruns compare byte for byte.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gradnas/arch_space.hpp"
#include "gradnas/bench.hpp"
#include "gradnas/grad_search.hpp"
#include "json.hpp"

namespace gradnas {

inline constexpr const char* kVersion = "0.1.0";

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Columns: kind,repeat,seed,arch,selection,report,std,queries,budget,note.
// One "repeat" row per repeat and a final "summary" row (repeat = count,
// seed = master seed, report = mean).
std::string report_csv(const ExperimentReport& rep, std::uint64_t master_seed);

nlohmann::json report_summary_json(const ExperimentReport& rep,
                                   const std::string& dataset,
                                   std::uint64_t master_seed);

// Columns: trajectory,iteration,score,flops,accepted,arch.
std::string curve_csv(const std::vector<CurvePoint>& curve);

// Columns: n,k,repeats,mean,std,budget,method.
std::string ablation_csv(const std::vector<AblationCell>& cells);

nlohmann::json pool_to_json(const SpaceDef& space,
                            const std::vector<ModelPoolEntry>& pool);
std::vector<ModelPoolEntry> pool_from_json(const SpaceDef& space,
                                           const nlohmann::json& j);

// Samples file: arch,performance,cost with canonical arch strings.
std::string samples_csv(const SpaceDef& space,
                        const std::vector<TrainingSample>& samples);
std::vector<TrainingSample> load_samples_csv(const SpaceDef& space,
                                             const std::string& path);

struct RunManifest {
  std::string subcommand;
  std::map<std::string, std::string> flags;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> inputs;   // path -> digest
  std::vector<std::string> outputs;
  double wall_seconds = 0;

  nlohmann::json to_json() const;
};

// Hex FNV-1a of the file contents; throws ReportError when unreadable.
std::string file_digest(const std::string& path);

void write_text(const std::string& path, const std::string& text);

// Writes <dir>/manifest.json.
void write_manifest(const std::string& dir, const RunManifest& m);

}  // namespace gradnas

#endif  // GRADNAS_REPORT_HPP_
