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

#include "gradnas/report.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "gradnas/seed.hpp"

namespace gradnas {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string report_csv(const ExperimentReport& rep, std::uint64_t master_seed) {
  std::ostringstream os;
  os << "kind,repeat,seed,arch,selection,report,std,queries,budget,note\n";
  std::size_t total = 0;
  for (const auto& r : rep.repeats) {
    os << "repeat," << r.repeat << ',' << r.seed << ',' << r.arch << ','
       << fmt(r.selection) << ',' << fmt(r.report) << ",," << r.queries << ','
       << rep.budget << ',' << (r.truncated ? "pool_truncated" : "") << '\n';
    total += r.queries;
  }
  os << "summary," << rep.repeats.size() << ',' << master_seed << ",,,"
     << fmt(rep.mean) << ',' << fmt(rep.std) << ',' << total << ','
     << rep.budget << ',' << (rep.std_degenerate ? "single_repeat_std_zero" : "")
     << '\n';
  return os.str();
}

nlohmann::json report_summary_json(const ExperimentReport& rep,
                                   const std::string& dataset,
                                   std::uint64_t master_seed) {
  nlohmann::json j;
  j["method"] = method_name(rep.method);
  j["dataset"] = dataset;
  j["n"] = rep.n;
  j["k"] = rep.k;
  j["seed"] = master_seed;
  j["repeats"] = rep.repeats.size();
  j["mean"] = rep.mean;
  j["std"] = rep.std;
  j["std_degenerate"] = rep.std_degenerate;
  j["budget"] = rep.budget;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& r : rep.repeats) {
    per.push_back({{"repeat", r.repeat},
                   {"seed", r.seed},
                   {"arch", r.arch},
                   {"selection", r.selection},
                   {"report", r.report},
                   {"queries", r.queries},
                   {"pool_size", r.pool_size},
                   {"truncated", r.truncated},
                   {"failed_trajectories", r.failed_trajectories}});
  }
  j["per_repeat"] = per;
  return j;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  os << "trajectory,iteration,score,flops,accepted,arch\n";
  for (const auto& c : curve) {
    os << c.trajectory << ',' << c.iteration << ',' << fmt(c.score) << ','
       << fmt(c.flops) << ',' << (c.accepted ? 1 : 0) << ',' << c.key << '\n';
  }
  return os.str();
}

std::string ablation_csv(const std::vector<AblationCell>& cells) {
  std::ostringstream os;
  os << "n,k,repeats,mean,std,budget,method\n";
  for (const auto& c : cells) {
    os << c.n << ',' << c.k << ',' << c.report.repeats.size() << ','
       << fmt(c.report.mean) << ',' << fmt(c.report.std) << ','
       << c.report.budget << ',' << method_name(c.report.method) << '\n';
  }
  return os.str();
}

nlohmann::json pool_to_json(const SpaceDef& space,
                            const std::vector<ModelPoolEntry>& pool) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : pool) {
    arr.push_back({{"arch", arch_to_json(space, e.arch)},
                   {"key", e.key},
                   {"score", e.score},
                   {"flops", e.flops},
                   {"provenance",
                    {{"trajectory", e.provenance.trajectory},
                     {"trajectory_seed", e.provenance.trajectory_seed},
                     {"iteration", e.provenance.iteration},
                     {"alpha", e.provenance.alpha}}}});
  }
  return arr;
}

std::vector<ModelPoolEntry> pool_from_json(const SpaceDef& space,
                                           const nlohmann::json& j) {
  if (!j.is_array()) throw ReportError("pool file must hold a JSON array");
  std::vector<ModelPoolEntry> out;
  for (const auto& e : j) {
    ModelPoolEntry m;
    m.arch = arch_from_json(space, e.at("arch"));
    m.key = arch_to_string(space, m.arch);
    m.score = e.at("score").get<double>();
    m.flops = e.value("flops", 0.0);
    if (e.contains("provenance")) {
      const auto& p = e["provenance"];
      m.provenance.trajectory = p.value("trajectory", 0);
      m.provenance.trajectory_seed = p.value("trajectory_seed", std::uint64_t{0});
      m.provenance.iteration = p.value("iteration", 0);
      m.provenance.alpha = p.value("alpha", 0.0);
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::string samples_csv(const SpaceDef& space,
                        const std::vector<TrainingSample>& samples) {
  std::ostringstream os;
  os.precision(17);
  os << "arch,performance,cost\n";
  for (const auto& s : samples) {
    os << arch_to_string(space, s.arch) << ',' << s.performance << ',' << s.cost
       << '\n';
  }
  return os.str();
}

std::vector<TrainingSample> load_samples_csv(const SpaceDef& space,
                                             const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ReportError("cannot open samples file " + path);
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "arch,performance,cost") {
    throw ReportError(path + ": header must be 'arch,performance,cost'");
  }
  std::vector<TrainingSample> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c2 = line.rfind(',');
    const auto c1 = c2 == std::string::npos ? c2 : line.rfind(',', c2 - 1);
    if (c1 == std::string::npos) {
      throw ReportError(path + ": line " + std::to_string(lineno) +
                        ": expected arch,performance,cost");
    }
    TrainingSample s;
    try {
      s.arch = parse_arch(space, line.substr(0, c1));
      std::size_t used = 0;
      const std::string perf = line.substr(c1 + 1, c2 - c1 - 1);
      s.performance = std::stod(perf, &used);
      if (used != perf.size()) throw std::invalid_argument(perf);
      const std::string cost = line.substr(c2 + 1);
      s.cost = std::stod(cost, &used);
      if (used != cost.size()) throw std::invalid_argument(cost);
    } catch (const std::exception& e) {
      throw ReportError(path + ": line " + std::to_string(lineno) + ": " +
                        e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["tool"] = "gradnas";
  j["version"] = kVersion;
  j["subcommand"] = subcommand;
  j["flags"] = flags;
  j["seeds"] = seeds;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["wall_seconds"] = wall_seconds;
  return j;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ReportError("cannot read " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return "fnv1a64:" + hex64(fnv1a64(bytes));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ReportError("cannot write " + path);
  os << text;
  if (!os) throw ReportError("write failed: " + path);
}

void write_manifest(const std::string& dir, const RunManifest& m) {
  const std::string path = (dir.empty() ? std::string(".") : dir) + "/manifest.json";
  write_text(path, m.to_json().dump(2) + "\n");
}

}  // namespace gradnas
