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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <regex>
#include <set>
#include <sstream>

#include "gradnas/seed.hpp"

namespace gradnas {

using nlohmann::json;

namespace {

bool is_integral(double v) {
  return std::isfinite(v) && v == std::floor(v);
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string range_text(std::int64_t lo, std::int64_t hi) {
  return "[" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
}

std::vector<std::int64_t> divisors_in(std::int64_t c, std::int64_t lo,
                                      std::int64_t hi) {
  std::vector<std::int64_t> out;
  for (std::int64_t d = std::max<std::int64_t>(lo, 1); d <= hi && d <= c; ++d) {
    if (c % d == 0) out.push_back(d);
  }
  return out;
}

bool is_channel_valued(const ParamSpec& p) {
  return p.kind == DomainKind::kIntRange || p.kind == DomainKind::kDivisible;
}

std::int64_t first_multiple(const ParamSpec& p) {
  std::int64_t m = (p.lo + p.step - 1) / p.step * p.step;
  if (p.lo <= 0) m = p.lo / p.step * p.step;  // toward zero already >= lo
  return m;
}

std::int64_t last_multiple(const ParamSpec& p) {
  return p.hi >= 0 ? p.hi / p.step * p.step : -((-p.hi + p.step - 1) / p.step) * p.step;
}

std::vector<double> static_values(const ParamSpec& p) {
  std::vector<double> out;
  switch (p.kind) {
    case DomainKind::kIntRange:
      for (std::int64_t v = p.lo; v <= p.hi; v += p.step) {
        out.push_back(static_cast<double>(v));
      }
      break;
    case DomainKind::kDivisible:
      for (std::int64_t v = first_multiple(p); v <= last_multiple(p);
           v += p.step) {
        out.push_back(static_cast<double>(v));
      }
      break;
    case DomainKind::kCategorical:
      out = p.choices;
      break;
    case DomainKind::kDivisorOf:
      break;
  }
  return out;
}

std::int64_t channels_for(const SpaceDef& space, const ParamSpec& p,
                          const DiscreteArch& arch) {
  const double w = arch.values.at(space.param_index(p.width_ref));
  const double r =
      p.ratio_ref.empty() ? 1.0 : arch.values.at(space.param_index(p.ratio_ref));
  return std::llround(w * r);
}

const char* domain_name(DomainKind k) {
  switch (k) {
    case DomainKind::kIntRange:
      return "int_range";
    case DomainKind::kDivisible:
      return "divisible";
    case DomainKind::kCategorical:
      return "categorical";
    case DomainKind::kDivisorOf:
      return "divisor_of";
  }
  return "";
}

DomainKind domain_from_name(const std::string& s) {
  if (s == "int_range") return DomainKind::kIntRange;
  if (s == "divisible") return DomainKind::kDivisible;
  if (s == "categorical") return DomainKind::kCategorical;
  if (s == "divisor_of") return DomainKind::kDivisorOf;
  throw SpaceError("unknown parameter domain '" + s + "'");
}

// "W12" -> ("W", 12)
std::optional<std::pair<std::string, int>> split_stage_name(
    const std::string& name) {
  static const std::regex re("^([A-Za-z]+)([0-9]+)$");
  std::smatch m;
  if (!std::regex_match(name, m, re)) return std::nullopt;
  return std::make_pair(m[1].str(), std::stoi(m[2].str()));
}

}  // namespace

std::vector<int> TopologySpec::interior_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < node_count; ++i) {
    if (i != input_node && i != output_node) out.push_back(i);
  }
  return out;
}

void SpaceDef::validate() const {
  if (kind == SpaceKind::kSize) {
    if (params.empty()) throw SpaceError(name + ": size space has no params");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const ParamSpec& p = params[i];
      if (p.name.empty() || !seen.insert(p.name).second) {
        throw SpaceError("param names must be unique and nonempty: '" +
                         p.name + "'");
      }
      if (!(p.span_hi > p.span_lo)) {
        throw SpaceError(p.name + ": normalisation span must satisfy lo < hi");
      }
      switch (p.kind) {
        case DomainKind::kIntRange:
        case DomainKind::kDivisible:
          if (p.lo > p.hi) throw SpaceError(p.name + ": lo > hi");
          if (p.step <= 0) throw SpaceError(p.name + ": step must be > 0");
          if (static_values(p).empty()) {
            throw SpaceError(p.name + ": empty valid set");
          }
          break;
        case DomainKind::kCategorical:
          if (p.choices.empty()) throw SpaceError(p.name + ": empty choices");
          for (std::size_t k = 1; k < p.choices.size(); ++k) {
            if (!(p.choices[k - 1] < p.choices[k])) {
              throw SpaceError(p.name + ": choices must be strictly ascending");
            }
          }
          break;
        case DomainKind::kDivisorOf: {
          if (p.lo < 1 || p.lo > p.hi) {
            throw SpaceError(p.name + ": divisor range must satisfy 1 <= lo <= hi");
          }
          auto ref_ok = [&](const std::string& ref, bool channel) {
            for (std::size_t j = 0; j < i; ++j) {
              if (params[j].name == ref) {
                return !channel || is_channel_valued(params[j]);
              }
            }
            return false;
          };
          if (!ref_ok(p.width_ref, true)) {
            throw SpaceError(p.name +
                             ": width_ref must name an earlier channel param");
          }
          if (!p.ratio_ref.empty() && !ref_ok(p.ratio_ref, false)) {
            throw SpaceError(p.name + ": ratio_ref must name an earlier param");
          }
          break;
        }
      }
    }
    return;
  }

  const TopologySpec& t = topology;
  if (t.node_count < 2) throw SpaceError(name + ": node_count < 2");
  const int n = t.node_count;
  if (static_cast<int>(t.adjacency.size()) != n) {
    throw SpaceError(name + ": adjacency must be node_count x node_count");
  }
  for (const auto& row : t.adjacency) {
    if (static_cast<int>(row.size()) != n) {
      throw SpaceError(name + ": adjacency must be node_count x node_count");
    }
    for (int v : row) {
      if (v != 0 && v != 1) throw SpaceError(name + ": adjacency not binary");
    }
  }
  if (t.input_node < 0 || t.input_node >= n || t.output_node < 0 ||
      t.output_node >= n || t.input_node == t.output_node) {
    throw SpaceError(name + ": need exactly one input and one output node");
  }
  const int opts = static_cast<int>(t.options.size());
  if (t.selectable_options < 1 || t.selectable_options > opts ||
      t.input_option < 0 || t.input_option >= opts || t.output_option < 0 ||
      t.output_option >= opts) {
    throw SpaceError(name + ": inconsistent option layout");
  }
  // Kahn's algorithm.
  std::vector<int> indeg(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) indeg[j] += t.adjacency[i][j];
  }
  std::queue<int> q;
  for (int i = 0; i < n; ++i) {
    if (indeg[i] == 0) q.push(i);
  }
  int visited = 0;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    ++visited;
    for (int v = 0; v < n; ++v) {
      if (t.adjacency[u][v] != 0 && --indeg[v] == 0) q.push(v);
    }
  }
  if (visited != n) throw SpaceError(name + ": adjacency has a cycle");
  const auto interior = t.interior_nodes();
  if (!t.cell_edges.empty() && t.cell_edges.size() != interior.size()) {
    throw SpaceError(name + ": one cell edge per interior node required");
  }
  if (!t.string_names.empty() &&
      static_cast<int>(t.string_names.size()) != t.selectable_options) {
    throw SpaceError(name + ": one string name per selectable option required");
  }
}

std::size_t SpaceDef::arch_length() const {
  return kind == SpaceKind::kSize ? params.size()
                                  : topology.interior_nodes().size();
}

Eigen::Index SpaceDef::encoding_rows() const {
  return kind == SpaceKind::kSize ? 1 : topology.node_count;
}

Eigen::Index SpaceDef::encoding_cols() const {
  return kind == SpaceKind::kSize
             ? static_cast<Eigen::Index>(params.size())
             : static_cast<Eigen::Index>(topology.options.size());
}

std::size_t SpaceDef::param_index(const std::string& n) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name == n) return i;
  }
  throw SpaceError(name + ": unknown parameter '" + n + "'");
}

SpaceDef build_anynet_space() {
  SpaceDef s;
  s.name = "anynet";
  s.kind = SpaceKind::kSize;
  for (int stage = 1; stage <= 4; ++stage) {
    const std::string i = std::to_string(stage);
    ParamSpec d;
    d.name = "D" + i;
    d.kind = DomainKind::kIntRange;
    d.lo = 1;
    d.hi = 16;
    d.span_lo = 1;
    d.span_hi = 16;
    ParamSpec w;
    w.name = "W" + i;
    w.kind = DomainKind::kDivisible;
    w.lo = 24;
    w.hi = 1024;
    w.step = 8;
    w.span_lo = 24;
    w.span_hi = 1024;
    ParamSpec r;
    r.name = "R" + i;
    r.kind = DomainKind::kCategorical;
    r.choices = {0.25, 0.5, 1.0};
    r.span_lo = 0.25;
    r.span_hi = 1.0;
    ParamSpec g;
    g.name = "G" + i;
    g.kind = DomainKind::kDivisorOf;
    g.lo = 1;
    g.hi = 32;
    g.width_ref = "W" + i;
    g.ratio_ref = "R" + i;
    g.span_lo = 1;
    g.span_hi = 32;
    s.params.insert(s.params.end(), {d, w, r, g});
  }
  s.validate();
  return s;
}

SpaceDef build_nb201_space() {
  SpaceDef s;
  s.name = "nb201";
  s.kind = SpaceKind::kTopology;
  TopologySpec& t = s.topology;
  t.node_count = 8;
  t.options = {"zeroize", "skip_connection", "conv1x1", "conv3x3",
               "avgpool3x3", "INPUT", "OUTPUT"};
  t.selectable_options = 5;
  t.input_node = 0;
  t.output_node = 7;
  t.input_option = 5;
  t.output_option = 6;
  // nodes: 0 in, 1 e01, 2 e02, 3 e12, 4 e03, 5 e13, 6 e23, 7 out
  t.cell_edges = {{0, 1}, {0, 2}, {1, 2}, {0, 3}, {1, 3}, {2, 3}};
  t.string_names = {"none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3",
                    "avg_pool_3x3"};
  t.adjacency.assign(8, std::vector<int>(8, 0));
  const std::pair<int, int> edges[] = {{0, 1}, {0, 2}, {0, 4}, {1, 3}, {1, 5},
                                       {2, 6}, {3, 6}, {4, 7}, {5, 7}, {6, 7}};
  for (auto [a, b] : edges) t.adjacency[a][b] = 1;
  s.validate();
  return s;
}

std::int64_t referenced_channels(const SpaceDef& space,
                                 const DiscreteArch& arch, std::size_t index) {
  return channels_for(space, space.params.at(index), arch);
}

void check_member(const SpaceDef& space, const DiscreteArch& arch) {
  const std::size_t n = space.arch_length();
  if (arch.values.size() != n) {
    throw MembershipError("<length>", space.name + ": expected " +
                                          std::to_string(n) + " values, got " +
                                          std::to_string(arch.values.size()));
  }
  if (space.kind == SpaceKind::kTopology) {
    const auto interior = space.topology.interior_nodes();
    for (std::size_t i = 0; i < n; ++i) {
      const double v = arch.values[i];
      if (!is_integral(v) || v < 0 ||
          v >= space.topology.selectable_options) {
        const std::string field = "node" + std::to_string(interior[i]);
        throw MembershipError(field, field + ": option " + format_number(v) +
                                         " is not selectable");
      }
    }
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const ParamSpec& p = space.params[i];
    const double v = arch.values[i];
    const std::string vs = format_number(v);
    if (p.kind == DomainKind::kCategorical) {
      if (std::find(p.choices.begin(), p.choices.end(), v) == p.choices.end()) {
        throw MembershipError(p.name, p.name + ": " + vs +
                                          " is not one of the allowed choices");
      }
      continue;
    }
    if (!is_integral(v)) {
      throw MembershipError(p.name, p.name + ": " + vs + " is not an integer");
    }
    const auto iv = static_cast<std::int64_t>(v);
    if (iv < p.lo || iv > p.hi) {
      throw MembershipError(p.name, p.name + ": " + vs + " outside " +
                                        range_text(p.lo, p.hi));
    }
    switch (p.kind) {
      case DomainKind::kIntRange:
        if ((iv - p.lo) % p.step != 0) {
          throw MembershipError(p.name, p.name + ": " + vs +
                                            " is off the step grid");
        }
        break;
      case DomainKind::kDivisible:
        if (iv % p.step != 0) {
          throw MembershipError(p.name, p.name + ": " + vs +
                                            " is not divisible by " +
                                            std::to_string(p.step));
        }
        break;
      case DomainKind::kDivisorOf: {
        const std::int64_t c = channels_for(space, p, arch);
        if (c <= 0 || c % iv != 0) {
          throw MembershipError(p.name, p.name + ": " + vs +
                                            " does not divide channel count " +
                                            std::to_string(c));
        }
        break;
      }
      case DomainKind::kCategorical:
        break;
    }
  }
}

bool is_member(const SpaceDef& space, const DiscreteArch& arch) {
  try {
    check_member(space, arch);
    return true;
  } catch (const MembershipError&) {
    return false;
  }
}

Encoding encode(const SpaceDef& space, const DiscreteArch& arch) {
  check_member(space, arch);
  Encoding enc;
  if (space.kind == SpaceKind::kSize) {
    enc.values.resize(1, static_cast<Eigen::Index>(space.params.size()));
    for (std::size_t i = 0; i < space.params.size(); ++i) {
      const ParamSpec& p = space.params[i];
      enc.values(0, static_cast<Eigen::Index>(i)) =
          (arch.values[i] - p.span_lo) / (p.span_hi - p.span_lo);
    }
    return enc;
  }
  const TopologySpec& t = space.topology;
  enc.values = Matrix::Zero(space.encoding_rows(), space.encoding_cols());
  enc.values(t.input_node, t.input_option) = kLogitBeta;
  enc.values(t.output_node, t.output_option) = kLogitBeta;
  const auto interior = t.interior_nodes();
  for (std::size_t i = 0; i < interior.size(); ++i) {
    enc.values(interior[i], static_cast<Eigen::Index>(arch.values[i])) =
        kLogitBeta;
  }
  return enc;
}

DiscreteArch project(const SpaceDef& space, const Encoding& enc) {
  if (enc.values.rows() != space.encoding_rows() ||
      enc.values.cols() != space.encoding_cols()) {
    throw ShapeError(space.name + ": encoding shape mismatch");
  }
  DiscreteArch out;
  if (space.kind == SpaceKind::kTopology) {
    const TopologySpec& t = space.topology;
    for (int node : t.interior_nodes()) {
      int best = 0;
      for (int k = 1; k < t.selectable_options; ++k) {
        if (enc.values(node, k) > enc.values(node, best)) best = k;
      }
      out.values.push_back(best);
    }
    return out;
  }
  out.values.resize(space.params.size());
  for (std::size_t i = 0; i < space.params.size(); ++i) {
    const ParamSpec& p = space.params[i];
    double x = enc.values(0, static_cast<Eigen::Index>(i));
    if (!std::isfinite(x)) x = 0.0;
    const double v = p.span_lo + x * (p.span_hi - p.span_lo);
    double chosen = 0.0;
    switch (p.kind) {
      case DomainKind::kIntRange: {
        const std::int64_t kmax = (p.hi - p.lo) / p.step;
        const double k = std::floor((v - static_cast<double>(p.lo)) /
                                        static_cast<double>(p.step) +
                                    0.5);
        const auto kc = static_cast<std::int64_t>(
            std::clamp(k, 0.0, static_cast<double>(kmax)));
        chosen = static_cast<double>(p.lo + kc * p.step);
        break;
      }
      case DomainKind::kDivisible: {
        const auto first = static_cast<double>(first_multiple(p));
        const auto last = static_cast<double>(last_multiple(p));
        const auto step = static_cast<double>(p.step);
        const double below = std::clamp(std::floor(v / step) * step, first, last);
        const double above = std::clamp(below + step, first, last);
        chosen = (std::abs(above - v) < std::abs(v - below)) ? above : below;
        break;
      }
      case DomainKind::kCategorical: {
        chosen = p.choices.front();
        for (double c : p.choices) {
          if (std::abs(c - v) < std::abs(chosen - v)) chosen = c;
        }
        break;
      }
      case DomainKind::kDivisorOf: {
        const auto divs = divisors_in(channels_for(space, p, out), p.lo, p.hi);
        if (divs.empty()) {
          throw SpaceError(p.name + ": referenced channel count has no divisor in " +
                           range_text(p.lo, p.hi));
        }
        auto best = static_cast<double>(divs.front());
        for (std::int64_t d : divs) {
          if (std::abs(static_cast<double>(d) - v) < std::abs(best - v)) {
            best = static_cast<double>(d);
          }
        }
        chosen = best;
        break;
      }
    }
    out.values[i] = chosen;
  }
  return out;
}

Matrix trainable_mask(const SpaceDef& space) {
  Matrix m = Matrix::Ones(space.encoding_rows(), space.encoding_cols());
  if (space.kind == SpaceKind::kTopology) {
    m.row(space.topology.input_node).setZero();
    m.row(space.topology.output_node).setZero();
  }
  return m;
}

void clamp_to_box(const SpaceDef& space, Encoding& enc) {
  if (space.kind != SpaceKind::kSize) return;
  enc.values = enc.values.cwiseMax(0.0).cwiseMin(1.0);
}

std::vector<double> legal_values(const SpaceDef& space,
                                 const DiscreteArch& arch, std::size_t index) {
  const ParamSpec& p = space.params.at(index);
  if (p.kind != DomainKind::kDivisorOf) return static_values(p);
  std::vector<double> out;
  for (std::int64_t d : divisors_in(channels_for(space, p, arch), p.lo, p.hi)) {
    out.push_back(static_cast<double>(d));
  }
  return out;
}

DiscreteArch sample_random(const SpaceDef& space, std::mt19937_64& rng) {
  DiscreteArch a;
  if (space.kind == SpaceKind::kTopology) {
    std::uniform_int_distribution<int> pick(
        0, space.topology.selectable_options - 1);
    for (std::size_t i = 0; i < space.arch_length(); ++i) {
      a.values.push_back(pick(rng));
    }
    return a;
  }
  a.values.assign(space.params.size(), 0.0);
  for (std::size_t i = 0; i < space.params.size(); ++i) {
    const auto vals = legal_values(space, a, i);
    if (vals.empty()) {
      throw SpaceError(space.params[i].name + ": no legal value to sample");
    }
    std::uniform_int_distribution<std::size_t> pick(0, vals.size() - 1);
    a.values[i] = vals[pick(rng)];
  }
  return a;
}

DiscreteArch sample_random(const SpaceDef& space, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_random(space, rng);
}

namespace {

void enumerate_from(const SpaceDef& space, DiscreteArch& a, std::size_t i,
                    const std::function<void(const DiscreteArch&)>& fn) {
  if (i == a.values.size()) {
    fn(a);
    return;
  }
  if (space.kind == SpaceKind::kTopology) {
    for (int o = 0; o < space.topology.selectable_options; ++o) {
      a.values[i] = o;
      enumerate_from(space, a, i + 1, fn);
    }
    return;
  }
  for (double v : legal_values(space, a, i)) {
    a.values[i] = v;
    enumerate_from(space, a, i + 1, fn);
  }
}

}  // namespace

void for_each_member(const SpaceDef& space,
                     const std::function<void(const DiscreteArch&)>& fn) {
  DiscreteArch a;
  a.values.assign(space.arch_length(), 0.0);
  enumerate_from(space, a, 0, fn);
}

double cardinality(const SpaceDef& space) {
  if (space.kind == SpaceKind::kTopology) {
    return std::pow(static_cast<double>(space.topology.selectable_options),
                    static_cast<double>(space.arch_length()));
  }
  // Divisor-constrained params couple with their referenced params; each
  // such group is enumerated jointly, the rest multiply independently.
  const std::size_t n = space.params.size();
  std::vector<int> group(n, -1);
  int groups = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const ParamSpec& p = space.params[i];
    if (p.kind != DomainKind::kDivisorOf) continue;
    std::vector<std::size_t> members = {i, space.param_index(p.width_ref)};
    if (!p.ratio_ref.empty()) members.push_back(space.param_index(p.ratio_ref));
    int target = -1;
    for (std::size_t m : members) {
      if (group[m] >= 0) target = group[m];
    }
    if (target < 0) target = groups++;
    for (std::size_t m : members) {
      if (group[m] >= 0 && group[m] != target) {
        const int old = group[m];
        for (auto& g : group) {
          if (g == old) g = target;
        }
      }
      group[m] = target;
    }
  }
  double total = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (group[i] < 0) total *= static_cast<double>(static_values(space.params[i]).size());
  }
  for (int g = 0; g < groups; ++g) {
    std::vector<std::size_t> free_params;
    std::vector<std::size_t> divisor_params;
    for (std::size_t i = 0; i < n; ++i) {
      if (group[i] != g) continue;
      (space.params[i].kind == DomainKind::kDivisorOf ? divisor_params
                                                      : free_params)
          .push_back(i);
    }
    DiscreteArch probe;
    probe.values.assign(n, 0.0);
    double count = 0.0;
    // Odometer over the free params of this group.
    std::vector<std::vector<double>> vals;
    for (std::size_t i : free_params) vals.push_back(static_values(space.params[i]));
    std::vector<std::size_t> idx(free_params.size(), 0);
    while (true) {
      for (std::size_t k = 0; k < free_params.size(); ++k) {
        probe.values[free_params[k]] = vals[k][idx[k]];
      }
      double combos = 1.0;
      for (std::size_t d : divisor_params) {
        combos *= static_cast<double>(legal_values(space, probe, d).size());
      }
      count += combos;
      std::size_t k = 0;
      while (k < idx.size() && ++idx[k] == vals[k].size()) idx[k++] = 0;
      if (k == idx.size()) break;
    }
    total *= count;
  }
  return total;
}

std::string arch_to_string(const SpaceDef& space, const DiscreteArch& arch) {
  check_member(space, arch);
  std::string out;
  if (space.kind == SpaceKind::kTopology) {
    const TopologySpec& t = space.topology;
    if (t.cell_edges.empty() || t.string_names.empty()) {
      for (std::size_t i = 0; i < arch.values.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(static_cast<int>(arch.values[i]));
      }
      return out;
    }
    std::map<int, std::vector<std::pair<int, std::size_t>>> by_dst;
    for (std::size_t i = 0; i < t.cell_edges.size(); ++i) {
      by_dst[t.cell_edges[i].second].emplace_back(t.cell_edges[i].first, i);
    }
    bool first_group = true;
    for (auto& [dst, items] : by_dst) {
      std::sort(items.begin(), items.end());
      if (!first_group) out += '+';
      first_group = false;
      out += '|';
      for (auto [src, i] : items) {
        out += t.string_names[static_cast<std::size_t>(arch.values[i])];
        out += '~';
        out += std::to_string(src);
        out += '|';
      }
    }
    return out;
  }
  for (std::size_t i = 0; i < space.params.size(); ++i) {
    if (i) out += ';';
    out += space.params[i].name;
    out += '=';
    out += format_number(arch.values[i]);
  }
  return out;
}

DiscreteArch parse_arch(const SpaceDef& space, const std::string& text) {
  DiscreteArch arch;
  if (space.kind == SpaceKind::kTopology) {
    const TopologySpec& t = space.topology;
    if (t.cell_edges.empty() || t.string_names.empty()) {
      std::size_t pos = 0;
      while (pos <= text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string::npos) end = text.size();
        int v = 0;
        auto res = std::from_chars(text.data() + pos, text.data() + end, v);
        if (res.ec != std::errc() || res.ptr != text.data() + end) {
          throw ParseError(pos, "expected option index");
        }
        arch.values.push_back(v);
        pos = end + 1;
      }
    } else {
      std::map<int, std::vector<std::pair<int, std::size_t>>> by_dst;
      for (std::size_t i = 0; i < t.cell_edges.size(); ++i) {
        by_dst[t.cell_edges[i].second].emplace_back(t.cell_edges[i].first, i);
      }
      arch.values.assign(t.cell_edges.size(), -1.0);
      std::size_t pos = 0;
      auto expect = [&](char c) {
        if (pos >= text.size() || text[pos] != c) {
          throw ParseError(pos, std::string("expected '") + c + "'");
        }
        ++pos;
      };
      bool first_group = true;
      for (auto& [dst, items] : by_dst) {
        std::sort(items.begin(), items.end());
        if (!first_group) expect('+');
        first_group = false;
        expect('|');
        for (auto [src, i] : items) {
          const std::size_t name_start = pos;
          const std::size_t tilde = text.find('~', pos);
          if (tilde == std::string::npos) throw ParseError(pos, "expected '~'");
          const std::string op = text.substr(pos, tilde - pos);
          auto it = std::find(t.string_names.begin(), t.string_names.end(), op);
          if (it == t.string_names.end()) {
            throw ParseError(name_start, "unknown operation '" + op + "'");
          }
          pos = tilde + 1;
          int parsed_src = -1;
          auto res = std::from_chars(text.data() + pos,
                                     text.data() + text.size(), parsed_src);
          if (res.ec != std::errc()) throw ParseError(pos, "expected node index");
          if (parsed_src != src) {
            throw ParseError(pos, "expected source node " + std::to_string(src));
          }
          pos = static_cast<std::size_t>(res.ptr - text.data());
          expect('|');
          arch.values[i] =
              static_cast<double>(std::distance(t.string_names.begin(), it));
        }
      }
      if (pos != text.size()) throw ParseError(pos, "trailing characters");
    }
  } else {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < space.params.size(); ++i) {
      const ParamSpec& p = space.params[i];
      if (i > 0) {
        if (pos >= text.size() || text[pos] != ';') {
          throw ParseError(pos, "expected ';'");
        }
        ++pos;
      }
      const std::string key = p.name + "=";
      if (text.compare(pos, key.size(), key) != 0) {
        throw ParseError(pos, "expected '" + key + "'");
      }
      pos += key.size();
      double v = 0.0;
      auto res = std::from_chars(text.data() + pos, text.data() + text.size(), v);
      if (res.ec != std::errc()) throw ParseError(pos, "expected number");
      pos = static_cast<std::size_t>(res.ptr - text.data());
      arch.values.push_back(v);
    }
    if (pos != text.size()) throw ParseError(pos, "trailing characters");
  }
  check_member(space, arch);
  return arch;
}

json arch_to_json(const SpaceDef& space, const DiscreteArch& arch) {
  check_member(space, arch);
  if (space.kind == SpaceKind::kTopology) {
    json ops = json::array();
    for (double v : arch.values) ops.push_back(static_cast<int>(v));
    return json{{"ops", ops}, {"arch", arch_to_string(space, arch)}};
  }
  // Stage-indexed names (D1, W1, ...) become lower-case arrays: {"d": [...]}.
  std::map<std::string, std::map<int, double>> grouped;
  bool staged = true;
  for (std::size_t i = 0; i < space.params.size() && staged; ++i) {
    auto split = split_stage_name(space.params[i].name);
    if (!split) {
      staged = false;
      break;
    }
    grouped[split->first][split->second] = arch.values[i];
  }
  json out = json::object();
  if (staged) {
    for (auto& [prefix, stages] : grouped) {
      std::string key = prefix;
      std::transform(key.begin(), key.end(), key.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      json arr = json::array();
      for (auto& [stage, v] : stages) {
        if (is_integral(v)) {
          arr.push_back(static_cast<std::int64_t>(v));
        } else {
          arr.push_back(v);
        }
      }
      out[key] = arr;
    }
    return out;
  }
  for (std::size_t i = 0; i < space.params.size(); ++i) {
    out[space.params[i].name] = arch.values[i];
  }
  return out;
}

DiscreteArch arch_from_json(const SpaceDef& space, const json& j) {
  DiscreteArch arch;
  if (space.kind == SpaceKind::kTopology) {
    if (j.contains("ops")) {
      for (const auto& v : j.at("ops")) arch.values.push_back(v.get<double>());
    } else if (j.contains("arch")) {
      return parse_arch(space, j.at("arch").get<std::string>());
    } else {
      throw SpaceError("topology arch JSON needs 'ops' or 'arch'");
    }
    check_member(space, arch);
    return arch;
  }
  arch.values.resize(space.params.size());
  for (std::size_t i = 0; i < space.params.size(); ++i) {
    const std::string& name = space.params[i].name;
    if (j.contains(name)) {
      arch.values[i] = j.at(name).get<double>();
      continue;
    }
    auto split = split_stage_name(name);
    if (split) {
      std::string key = split->first;
      std::transform(key.begin(), key.end(), key.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (j.contains(key) && j.at(key).is_array() &&
          split->second >= 1 &&
          static_cast<std::size_t>(split->second) <= j.at(key).size()) {
        arch.values[i] = j.at(key).at(split->second - 1).get<double>();
        continue;
      }
    }
    throw MembershipError(name, "arch JSON is missing '" + name + "'");
  }
  check_member(space, arch);
  return arch;
}

json space_to_json(const SpaceDef& space) {
  json j;
  j["name"] = space.name;
  if (space.kind == SpaceKind::kSize) {
    j["kind"] = "size";
    json params = json::array();
    for (const ParamSpec& p : space.params) {
      json q;
      q["name"] = p.name;
      q["domain"] = domain_name(p.kind);
      q["span"] = {p.span_lo, p.span_hi};
      switch (p.kind) {
        case DomainKind::kIntRange:
          q["lo"] = p.lo;
          q["hi"] = p.hi;
          q["step"] = p.step;
          break;
        case DomainKind::kDivisible:
          q["lo"] = p.lo;
          q["hi"] = p.hi;
          q["divisor"] = p.step;
          break;
        case DomainKind::kCategorical:
          q["choices"] = p.choices;
          break;
        case DomainKind::kDivisorOf:
          q["lo"] = p.lo;
          q["hi"] = p.hi;
          q["width_ref"] = p.width_ref;
          if (!p.ratio_ref.empty()) q["ratio_ref"] = p.ratio_ref;
          break;
      }
      params.push_back(q);
    }
    j["params"] = params;
    return j;
  }
  const TopologySpec& t = space.topology;
  j["kind"] = "topology";
  j["node_count"] = t.node_count;
  j["options"] = t.options;
  j["selectable_options"] = t.selectable_options;
  j["adjacency"] = t.adjacency;
  j["input_node"] = t.input_node;
  j["output_node"] = t.output_node;
  j["input_option"] = t.input_option;
  j["output_option"] = t.output_option;
  json edges = json::array();
  for (auto [a, b] : t.cell_edges) edges.push_back({a, b});
  j["cell_edges"] = edges;
  j["string_names"] = t.string_names;
  return j;
}

SpaceDef space_from_json(const json& j) {
  SpaceDef s;
  try {
    s.name = j.at("name").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "size") {
      s.kind = SpaceKind::kSize;
      for (const auto& q : j.at("params")) {
        ParamSpec p;
        p.name = q.at("name").get<std::string>();
        p.kind = domain_from_name(q.at("domain").get<std::string>());
        switch (p.kind) {
          case DomainKind::kIntRange:
            p.lo = q.at("lo").get<std::int64_t>();
            p.hi = q.at("hi").get<std::int64_t>();
            p.step = q.value("step", std::int64_t{1});
            break;
          case DomainKind::kDivisible:
            p.lo = q.at("lo").get<std::int64_t>();
            p.hi = q.at("hi").get<std::int64_t>();
            p.step = q.at("divisor").get<std::int64_t>();
            break;
          case DomainKind::kCategorical:
            p.choices = q.at("choices").get<std::vector<double>>();
            break;
          case DomainKind::kDivisorOf:
            p.lo = q.at("lo").get<std::int64_t>();
            p.hi = q.at("hi").get<std::int64_t>();
            p.width_ref = q.at("width_ref").get<std::string>();
            p.ratio_ref = q.value("ratio_ref", std::string{});
            break;
        }
        if (q.contains("span")) {
          p.span_lo = q.at("span").at(0).get<double>();
          p.span_hi = q.at("span").at(1).get<double>();
        } else if (p.kind == DomainKind::kCategorical && !p.choices.empty()) {
          p.span_lo = p.choices.front();
          p.span_hi = p.choices.back();
        } else {
          p.span_lo = static_cast<double>(p.lo);
          p.span_hi = static_cast<double>(p.hi);
        }
        s.params.push_back(std::move(p));
      }
    } else if (kind == "topology") {
      s.kind = SpaceKind::kTopology;
      TopologySpec& t = s.topology;
      t.node_count = j.at("node_count").get<int>();
      t.options = j.at("options").get<std::vector<std::string>>();
      t.selectable_options = j.at("selectable_options").get<int>();
      t.adjacency = j.at("adjacency").get<std::vector<std::vector<int>>>();
      t.input_node = j.at("input_node").get<int>();
      t.output_node = j.at("output_node").get<int>();
      t.input_option = j.at("input_option").get<int>();
      t.output_option = j.at("output_option").get<int>();
      if (j.contains("cell_edges")) {
        for (const auto& e : j.at("cell_edges")) {
          t.cell_edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
        }
      }
      t.string_names =
          j.value("string_names", std::vector<std::string>{});
    } else {
      throw SpaceError("unknown space kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw SpaceError(std::string("malformed space JSON: ") + e.what());
  }
  s.validate();
  return s;
}

SpaceDef load_space(const std::string& path) {
  if (path == "anynet" || path == "builtin:anynet") return build_anynet_space();
  if (path == "nb201" || path == "builtin:nb201") return build_nb201_space();
  std::ifstream in(path);
  if (!in) throw SpaceError("cannot open space file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SpaceError(path + ": " + e.what());
  }
  return space_from_json(j);
}

std::string space_fingerprint(const SpaceDef& space) {
  std::ostringstream os;
  os << std::hex << fnv1a64(space_to_json(space).dump());
  return os.str();
}

}  // namespace gradnas
