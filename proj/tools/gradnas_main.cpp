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

// gradnas command-line entry point. Exit codes: 0 success, 1 domain error,
// 2 usage error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "gradnas/arch_space.hpp"
#include "gradnas/bench.hpp"
#include "gradnas/cost_model.hpp"
#include "gradnas/grad_search.hpp"
#include "gradnas/oracle.hpp"
#include "gradnas/predictor.hpp"
#include "gradnas/report.hpp"
#include "gradnas/seed.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gradnas;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

int default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw UsageError("bad number '" + item + "' in list '" + text + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_list(text)) {
    if (v != static_cast<int>(v)) throw UsageError("expected integers: " + text);
    out.push_back(static_cast<int>(v));
  }
  return out;
}

// --data, falling back to $PREDNAS_DATA/nb201.csv.
std::string resolve_data(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* dir = std::getenv("PREDNAS_DATA"); dir != nullptr && *dir) {
    return (fs::path(dir) / "nb201.csv").string();
  }
  throw std::runtime_error("no --data given and PREDNAS_DATA is not set");
}

std::string out_dir(const std::string& out) {
  const fs::path parent = fs::path(out).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  return parent.empty() ? "." : parent.string();
}

std::string sibling(const std::string& out, const std::string& suffix) {
  fs::path p(out);
  p.replace_extension();
  return p.string() + suffix;
}

// Everything the user passed to `sub`, for the manifest.
RunManifest manifest_for(const CLI::App* sub, const std::string& name) {
  RunManifest m;
  m.subcommand = name;
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->count() == 0) continue;
    std::string joined;
    for (const auto& r : opt->results()) {
      if (!joined.empty()) joined += ",";
      joined += r;
    }
    m.flags[opt->get_name()] = joined;
  }
  return m;
}

void add_input(RunManifest& m, const std::string& path) {
  if (path.rfind("builtin:", 0) == 0 || !fs::exists(path)) {
    m.inputs[path] = "builtin";
  } else {
    m.inputs[path] = file_digest(path);
  }
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradnas: predictor-guided architecture search"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  std::function<int()> action;
  Stopwatch clock;

  // ---- space ----------------------------------------------------------------
  auto* space_cmd = app.add_subcommand("space", "Search space tools");
  space_cmd->require_subcommand(1);

  std::string space_file;
  auto* sv = space_cmd->add_subcommand("validate", "Validate a space definition");
  sv->add_option("file", space_file, "Space JSON (or builtin:anynet, builtin:nb201)")
      ->required();
  sv->callback([&] {
    action = [&] {
      const SpaceDef s = load_space(space_file);
      const double card = cardinality(s);
      json card_json = std::isfinite(card) ? json(card) : json("inf");
      print_json({{"name", s.name},
                  {"kind", s.kind == SpaceKind::kSize ? "size" : "topology"},
                  {"encoding", {s.encoding_rows(), s.encoding_cols()}},
                  {"cardinality", card_json},
                  {"fingerprint", space_fingerprint(s)}});
      return 0;
    };
  });

  std::uint64_t sample_seed = 0;
  int sample_n = 1;
  bool sample_json = false;
  auto* ss = space_cmd->add_subcommand("sample", "Draw random members");
  ss->add_option("file", space_file, "Space JSON")->required();
  ss->add_option("--seed", sample_seed, "Seed")->required();
  ss->add_option("-n", sample_n, "Number of samples")->check(CLI::PositiveNumber);
  ss->add_flag("--json", sample_json, "Emit a JSON array instead of strings");
  ss->callback([&] {
    action = [&] {
      const SpaceDef s = load_space(space_file);
      json arr = json::array();
      for (int i = 0; i < sample_n; ++i) {
        const DiscreteArch a = sample_random(s, derive_seed(sample_seed, i));
        if (sample_json) {
          arr.push_back(arch_to_json(s, a));
        } else {
          std::cout << arch_to_string(s, a) << "\n";
        }
      }
      if (sample_json) print_json(arr);
      return 0;
    };
  });

  auto* sd = space_cmd->add_subcommand("dump", "Print the canonical JSON form");
  sd->add_option("file", space_file, "Space JSON or builtin name")->required();
  sd->callback([&] {
    action = [&] {
      print_json(space_to_json(load_space(space_file)));
      return 0;
    };
  });

  // ---- cost -----------------------------------------------------------------
  auto* cost_cmd = app.add_subcommand("cost", "Analytic cost model");
  cost_cmd->require_subcommand(1);
  std::string arch_file;
  std::int64_t resolution = 224;
  auto* ca = cost_cmd->add_subcommand("anynet", "FLOPs/params of an AnyNet model");
  ca->add_option("--arch", arch_file, "Arch JSON {d,w,r,g}")->required();
  ca->add_option("--resolution", resolution, "Input resolution")
      ->check(CLI::PositiveNumber);
  ca->callback([&] {
    action = [&] {
      std::ifstream in(arch_file);
      if (!in) throw std::runtime_error("cannot open arch file " + arch_file);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw std::runtime_error(arch_file + ": " + e.what());
      }
      NetConvention net;
      net.resolution = resolution;
      const CostResult c = anynet_cost(stages_from_json(j), net);
      print_json({{"flops", c.flops}, {"params", c.params}});
      return 0;
    };
  });

  // ---- collect --------------------------------------------------------------
  std::string space_arg = "builtin:nb201";
  std::string data_file;
  std::string dataset = "cifar100";
  std::optional<std::uint64_t> synthetic_seed;
  std::uint64_t seed = 0;
  int n = 30;
  int k = 40;
  std::string out;
  auto* col = app.add_subcommand("collect", "Query N random archs for training");
  col->add_option("--space", space_arg, "Space JSON or builtin name");
  col->add_option("--data", data_file, "Tabular CSV (default $PREDNAS_DATA/nb201.csv)");
  col->add_option("--dataset", dataset, "cifar10 | cifar100 | imagenet16");
  col->add_option("--synthetic", synthetic_seed,
                  "Use the seeded synthetic oracle (size spaces)");
  col->add_option("-n,--n", n, "Number of samples")->check(CLI::Range(2, 1 << 30));
  col->add_option("--seed", seed, "Master seed");
  col->add_option("--out", out, "Samples CSV")->required();
  col->callback([&] {
    action = [&] {
      out_dir(out);
      const SpaceDef s = load_space(space_arg);
      RunManifest m = manifest_for(col, "collect");
      add_input(m, space_arg);
      std::unique_ptr<Oracle> oracle;
      if (synthetic_seed) {
        oracle = std::make_unique<SyntheticOracle>(s, *synthetic_seed);
        m.seeds["synthetic"] = *synthetic_seed;
      } else {
        const std::string path = resolve_data(data_file);
        add_input(m, path);
        auto table = std::make_shared<const TabularOracle>(TabularOracle::load(path, s));
        oracle = std::make_unique<TabularView>(table, dataset_from_name(dataset));
      }
      const std::uint64_t cs = derive_seed(seed, Stream::kSampleCollection);
      const auto samples = collect_training_set(s, *oracle, n, cs);
      write_text(out, samples_csv(s, samples));
      m.seeds["master"] = seed;
      m.seeds["sample_collection"] = cs;
      m.outputs.push_back(out);
      m.wall_seconds = clock.seconds();
      write_manifest(out_dir(out), m);
      return 0;
    };
  });

  // ---- predictor ------------------------------------------------------------
  auto* pred_cmd = app.add_subcommand("predictor", "Predictor training");
  pred_cmd->require_subcommand(1);
  std::string samples_file;
  std::string role = "main";
  TrainOptions topts;
  auto* pt = pred_cmd->add_subcommand("train", "Train a predictor on a samples CSV");
  pt->add_option("--space", space_arg, "Space JSON or builtin name")->required();
  pt->add_option("--samples", samples_file, "Samples CSV")->required();
  pt->add_option("--role", role, "main | aux")
      ->check(CLI::IsMember({"main", "aux"}));
  pt->add_option("--seed", seed, "Seed");
  pt->add_option("--epochs", topts.epochs, "Epochs")->check(CLI::PositiveNumber);
  pt->add_option("--lr", topts.lr, "Initial learning rate")
      ->check(CLI::PositiveNumber);
  pt->add_option("--out", out, "Checkpoint path")->required();
  pt->callback([&] {
    action = [&] {
      out_dir(out);
      const SpaceDef s = load_space(space_arg);
      const auto samples = load_samples_csv(s, samples_file);
      const TrainResult r = train(PredictorSpec::for_space(s), s, samples,
                                  role_from_name(role), seed, topts);
      save_checkpoint(out, r.predictor, s);
      RunManifest m = manifest_for(pt, "predictor train");
      add_input(m, space_arg);
      add_input(m, samples_file);
      m.seeds["master"] = seed;
      m.seeds["predictor_init"] = derive_seed(seed, Stream::kPredictorInit);
      m.outputs.push_back(out);
      m.wall_seconds = clock.seconds();
      write_manifest(out_dir(out), m);
      print_json({{"role", role},
                  {"samples", samples.size()},
                  {"final_loss", r.loss_history.back()}});
      return 0;
    };
  });

  // ---- search ---------------------------------------------------------------
  auto* search_cmd = app.add_subcommand("search", "Gradient search");
  search_cmd->require_subcommand(1);
  std::string main_ckpt, aux_ckpt, alpha_grid_text, curve_file;
  std::optional<double> target_flops, delta, lr, alpha;
  std::optional<int> tmax, trajectories, topk;
  int jobs = default_jobs();
  auto* sr = search_cmd->add_subcommand("run", "Run projected gradient search");
  sr->add_option("--space", space_arg, "Space JSON or builtin name")->required();
  sr->add_option("--main", main_ckpt, "Main predictor checkpoint")->required();
  sr->add_option("--aux", aux_ckpt, "Auxiliary (cost) predictor checkpoint");
  sr->add_option("--target-flops", target_flops, "FLOPs target f");
  sr->add_option("--delta", delta, "Window half-width (default 5% of target)");
  sr->add_option("--alpha", alpha, "Single cost weight");
  sr->add_option("--alpha-grid", alpha_grid_text, "Comma-separated cost weights");
  sr->add_option("--tmax", tmax, "Iterations per trajectory");
  sr->add_option("--trajectories", trajectories, "Number of trajectories");
  sr->add_option("--topk", topk, "Pool size K");
  sr->add_option("--lr", lr, "Initial search learning rate");
  sr->add_option("--seed", seed, "Master seed");
  sr->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  sr->add_option("--curve", curve_file, "Per-iteration curve CSV");
  sr->add_option("--out", out, "Pool JSON")->required();
  sr->callback([&] {
    action = [&] {
      out_dir(out);
      if (alpha && !alpha_grid_text.empty()) {
        throw UsageError("--alpha and --alpha-grid are mutually exclusive");
      }
      if (!alpha_grid_text.empty() && !target_flops) {
        throw UsageError("--alpha-grid needs --target-flops");
      }
      const SpaceDef s = load_space(space_arg);
      if (!fs::exists(main_ckpt)) {
        throw std::runtime_error("main checkpoint not found: " + main_ckpt);
      }
      const Predictor main_p = load_checkpoint(main_ckpt, s);
      std::optional<Predictor> aux_p;
      if (!aux_ckpt.empty()) {
        if (!fs::exists(aux_ckpt)) {
          throw std::runtime_error("aux checkpoint not found: " + aux_ckpt);
        }
        aux_p = load_checkpoint(aux_ckpt, s);
      }
      SearchConfig cfg = s.kind == SpaceKind::kSize
                             ? SearchConfig::size_defaults()
                             : SearchConfig::topology_defaults();
      if (tmax) cfg.iterations = *tmax;
      if (trajectories) cfg.trajectories = *trajectories;
      if (topk) cfg.top_k = *topk;
      if (lr) cfg.lr = *lr;
      if (alpha) cfg.alpha = *alpha;
      cfg.target_flops = target_flops;
      cfg.delta = delta;
      cfg.seed = seed;
      cfg.jobs = jobs;
      cfg.record_curve = !curve_file.empty();

      SearchProblem problem{&s, &main_p, aux_p ? &*aux_p : nullptr, {}, {}, {}};
      if (is_anynet_shaped(s)) {
        problem.cost = [&s](const DiscreteArch& a) {
          return static_cast<double>(anynet_cost(s, a).flops);
        };
      } else if (target_flops && !aux_p) {
        throw UsageError("--target-flops on this space needs --aux");
      }
      if ((cfg.alpha != 0.0 || !alpha_grid_text.empty()) && !aux_p) {
        throw UsageError("a nonzero alpha needs --aux");
      }

      ModelPool pool;
      if (!alpha_grid_text.empty()) {
        auto cells = alpha_grid(problem, {*target_flops},
                                parse_list(alpha_grid_text), cfg);
        for (const auto& msg : cells[0].empty_cells) {
          std::cerr << "warning: " << msg << "\n";
        }
        pool = std::move(cells[0].pool);
      } else {
        pool = run_search(problem, cfg);
      }
      if (pool.truncated) {
        std::cerr << "warning: pool has " << pool.entries.size()
                  << " entries, fewer than K=" << cfg.top_k << "\n";
      }
      if (pool.failed_trajectories > 0) {
        std::cerr << "warning: " << pool.failed_trajectories
                  << " trajectories failed and were skipped\n";
      }
      write_text(out, pool_to_json(s, pool.entries).dump(2) + "\n");
      RunManifest m = manifest_for(sr, "search run");
      add_input(m, space_arg);
      add_input(m, main_ckpt);
      if (!aux_ckpt.empty()) add_input(m, aux_ckpt);
      m.outputs.push_back(out);
      if (!curve_file.empty()) {
        write_text(curve_file, curve_csv(pool.curve));
        m.outputs.push_back(curve_file);
      }
      m.seeds["master"] = seed;
      m.seeds["search"] = derive_seed(seed, Stream::kSearch);
      m.wall_seconds = clock.seconds();
      write_manifest(out_dir(out), m);
      return 0;
    };
  });

  // ---- bench ----------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "Benchmark protocols");
  bench_cmd->require_subcommand(1);
  int repeats = 15;
  std::string method = "gradient";
  std::string summary_file;
  int candidates = 20000;

  auto add_protocol_flags = [&](CLI::App* c) {
    c->add_option("--data", data_file, "Tabular CSV (default $PREDNAS_DATA/nb201.csv)");
    c->add_option("--dataset", dataset, "cifar10 | cifar100 | imagenet16");
    c->add_option("--k", k, "Top-K evaluated")->check(CLI::PositiveNumber);
    c->add_option("--repeats", repeats, "Repeats")->check(CLI::PositiveNumber);
    c->add_option("--seed", seed, "Master seed");
    c->add_option("--jobs", jobs, "Parallel repeats")->check(CLI::PositiveNumber);
    c->add_option("--tmax", tmax, "Search iterations per trajectory");
    c->add_option("--trajectories", trajectories, "Search trajectories");
    c->add_option("--lr", lr, "Initial search learning rate");
  };

  auto protocol_config = [&] {
    ProtocolConfig cfg;
    cfg.n = n;
    cfg.k = k;
    cfg.repeats = repeats;
    cfg.seed = seed;
    cfg.jobs = jobs;
    cfg.random_candidates = candidates;
    if (tmax) cfg.search.iterations = *tmax;
    if (trajectories) cfg.search.trajectories = *trajectories;
    if (lr) cfg.search.lr = *lr;
    cfg.record_curve = !curve_file.empty();
    return cfg;
  };

  // Shared by nb201 and random-baseline.
  auto run_bench = [&](CLI::App* c, const std::string& name,
                       const ProtocolConfig& cfg) {
    out_dir(out);
    const SpaceDef s = build_nb201_space();
    const std::string path = resolve_data(data_file);
    auto table = std::make_shared<const TabularOracle>(TabularOracle::load(path, s));
    const TabularView oracle(table, dataset_from_name(dataset));
    const ExperimentReport rep = run_protocol(oracle, cfg);
    const std::string dir = out_dir(out);
    write_text(out, report_csv(rep, seed));
    const std::string summary = summary_file.empty()
                                    ? sibling(out, ".summary.json")
                                    : summary_file;
    write_text(summary,
               report_summary_json(rep, dataset, seed).dump(2) + "\n");
    RunManifest m = manifest_for(c, name);
    add_input(m, path);
    m.outputs = {out, summary};
    if (!curve_file.empty()) {
      write_text(curve_file, curve_csv(rep.curve));
      m.outputs.push_back(curve_file);
    }
    m.seeds["master"] = seed;
    for (const auto& r : rep.repeats) {
      m.seeds["repeat" + std::to_string(r.repeat)] = r.seed;
    }
    m.wall_seconds = clock.seconds();
    write_manifest(dir, m);
    std::cout << method_name(rep.method) << " " << dataset << " N=" << rep.n
              << " K=" << rep.k << ": mean " << rep.mean << " std " << rep.std
              << " over " << rep.repeats.size() << " repeats, budget "
              << rep.budget << "\n";
    return 0;
  };

  auto* bn = bench_cmd->add_subcommand("nb201", "Tabular topology benchmark protocol");
  add_protocol_flags(bn);
  bn->add_option("--n", n, "Training samples N")->check(CLI::Range(2, 1 << 30));
  bn->add_option("--method", method, "gradient | filtered-random | random")
      ->check(CLI::IsMember({"gradient", "filtered-random", "random"}));
  bn->add_option("--candidates", candidates, "Filtered-random candidate count")
      ->check(CLI::PositiveNumber);
  bn->add_option("--curve", curve_file, "Search curve CSV of repeat 0");
  bn->add_option("--summary", summary_file, "JSON summary path");
  bn->add_option("--out", out, "Report CSV")->required();
  bn->callback([&] {
    action = [&] {
      ProtocolConfig cfg = protocol_config();
      cfg.method = method_from_name(method);
      return run_bench(bn, "bench nb201", cfg);
    };
  });

  std::string mode = "pure";
  int budget = 70;
  auto* rb = bench_cmd->add_subcommand("random-baseline", "Random search baselines");
  add_protocol_flags(rb);
  rb->add_option("--mode", mode, "pure | filtered")
      ->check(CLI::IsMember({"pure", "filtered"}));
  rb->add_option("--budget", budget, "Pure mode: total queries")
      ->check(CLI::PositiveNumber);
  rb->add_option("--n", n, "Filtered mode: predictor samples");
  rb->add_option("--candidates", candidates, "Filtered mode: ranked candidates")
      ->check(CLI::PositiveNumber);
  rb->add_option("--summary", summary_file, "JSON summary path");
  rb->add_option("--out", out, "Report CSV")->required();
  rb->callback([&] {
    action = [&] {
      ProtocolConfig cfg = protocol_config();
      if (mode == "pure") {
        if (budget < k) throw UsageError("--budget must be >= --k");
        cfg.method = Method::kRandom;
        cfg.n = budget - k;
      } else {
        cfg.method = Method::kFilteredRandom;
      }
      return run_bench(rb, "bench random-baseline", cfg);
    };
  });

  std::string ns_text = "10,20,30,40,50";
  std::string ks_text = "40";
  auto* ab = bench_cmd->add_subcommand("ablate-nk", "N x K grid");
  add_protocol_flags(ab);
  ab->add_option("--ns", ns_text, "Comma-separated N values");
  ab->add_option("--ks", ks_text, "Comma-separated K values");
  ab->add_option("--out", out, "Ablation CSV")->required();
  ab->callback([&] {
    action = [&] {
      out_dir(out);
      const SpaceDef s = build_nb201_space();
      const std::string path = resolve_data(data_file);
      auto table = std::make_shared<const TabularOracle>(TabularOracle::load(path, s));
      const TabularView oracle(table, dataset_from_name(dataset));
      const auto cells = run_nk_ablation(oracle, parse_int_list(ns_text),
                                         parse_int_list(ks_text),
                                         protocol_config());
      write_text(out, ablation_csv(cells));
      RunManifest m = manifest_for(ab, "bench ablate-nk");
      add_input(m, path);
      m.outputs = {out};
      m.seeds["master"] = seed;
      m.wall_seconds = clock.seconds();
      write_manifest(out_dir(out), m);
      std::cout << ablation_csv(cells);
      return 0;
    };
  });

  auto* mk = bench_cmd->add_subcommand(
      "make-synthetic-nb201", "Write the generated stand-in table");
  mk->add_option("--seed", seed, "Generator seed");
  mk->add_option("--out", out, "CSV path")->required();
  mk->callback([&] {
    action = [&] {
      out_dir(out);
      write_tabular_csv(out, make_synthetic_nb201(build_nb201_space(), seed));
      RunManifest m = manifest_for(mk, "bench make-synthetic-nb201");
      m.outputs = {out};
      m.seeds["generator"] = seed;
      m.wall_seconds = clock.seconds();
      write_manifest(out_dir(out), m);
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (argc == 1) std::cerr << app.help();
    return 2;
  }
  if (!action) {
    std::cerr << app.help();
    return 2;
  }
  try {
    return action();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
