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

#ifndef GRADNAS_ARCH_SPACE_HPP_
#define GRADNAS_ARCH_SPACE_HPP_

// Search spaces, continuous encodings and the projection back onto legal
// architectures.
//
// Two families are supported:
//  * size spaces (SSS): an ordered list of ParamSpec; an architecture is one
//    value per spec and its encoding is a 1 x d row, each entry mapped
//    affinely onto [0, 1] by the space's normalisation span.
//  * topology spaces (TSS): a fixed DAG whose interior nodes each carry one
//    operation; the encoding is a node_count x option_count logit matrix.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gradnas/tensor.hpp"
#include "json.hpp"

namespace gradnas {

class SpaceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Architecture outside its space. field() names the offending parameter or
// node.
class MembershipError : public SpaceError {
 public:
  MembershipError(std::string field, const std::string& what)
      : SpaceError(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ParseError : public SpaceError {
 public:
  ParseError(std::size_t position, const std::string& what)
      : SpaceError(what + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

enum class SpaceKind { kSize, kTopology };

enum class DomainKind {
  kIntRange,     // lo, lo + step, ... <= hi
  kDivisible,    // multiples of `step` inside [lo, hi]
  kCategorical,  // finite sorted set `choices`
  kDivisorOf,    // integer in [lo, hi] dividing the referenced channel count
};

struct ParamSpec {
  std::string name;
  DomainKind kind = DomainKind::kIntRange;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::int64_t step = 1;
  std::vector<double> choices;
  // kDivisorOf: channels = round(value(width_ref) * value(ratio_ref)), the
  // ratio factor being 1 when ratio_ref is empty.
  std::string width_ref;
  std::string ratio_ref;
  double span_lo = 0.0;
  double span_hi = 1.0;
};

struct TopologySpec {
  int node_count = 0;
  std::vector<std::string> options;  // column order of the operation matrix
  int selectable_options = 0;        // columns [0, selectable) are choosable
  std::vector<std::vector<int>> adjacency;  // node_count x node_count, 0/1
  int input_node = 0;
  int output_node = 0;
  int input_option = 0;   // column of the frozen input row
  int output_option = 0;  // column of the frozen output row
  // Per interior node (in node order, input/output excluded): the cell edge
  // (from, to) it decorates. Used by the benchmark string format.
  std::vector<std::pair<int, int>> cell_edges;
  // Names used in canonical strings, one per selectable option.
  std::vector<std::string> string_names;

  std::vector<int> interior_nodes() const;
};

struct SpaceDef {
  std::string name;
  SpaceKind kind = SpaceKind::kSize;
  std::vector<ParamSpec> params;
  TopologySpec topology;

  // Throws SpaceError describing the first violated invariant.
  void validate() const;

  std::size_t arch_length() const;
  Eigen::Index encoding_rows() const;
  Eigen::Index encoding_cols() const;
  // Index of the named parameter; throws SpaceError when unknown.
  std::size_t param_index(const std::string& name) const;
};

// Continuous optimisation variable; shape (encoding_rows, encoding_cols).
struct Encoding {
  Matrix values;
};

// SSS: one value per ParamSpec (categorical values stored as the value
// itself). TSS: one option index per interior node.
struct DiscreteArch {
  std::vector<double> values;

  friend bool operator==(const DiscreteArch&, const DiscreteArch&) = default;
};

// Logit placed on the chosen option when encoding topology archs.
inline constexpr double kLogitBeta = 5.0;

SpaceDef build_anynet_space();
SpaceDef build_nb201_space();

// Throws MembershipError naming the violating field.
void check_member(const SpaceDef& space, const DiscreteArch& arch);
bool is_member(const SpaceDef& space, const DiscreteArch& arch);

// Channel count a kDivisorOf parameter must divide.
std::int64_t referenced_channels(const SpaceDef& space,
                                 const DiscreteArch& arch, std::size_t index);

Encoding encode(const SpaceDef& space, const DiscreteArch& arch);
DiscreteArch project(const SpaceDef& space, const Encoding& enc);

// Entries that the optimiser may move (false for frozen TSS rows).
Matrix trainable_mask(const SpaceDef& space);
// Clamps SSS encodings to the unit box; no-op for TSS.
void clamp_to_box(const SpaceDef& space, Encoding& enc);

DiscreteArch sample_random(const SpaceDef& space, std::mt19937_64& rng);
DiscreteArch sample_random(const SpaceDef& space, std::uint64_t seed);

// Legal values of param `index` given the already-fixed earlier values of
// `arch` (only kDivisorOf depends on them).
std::vector<double> legal_values(const SpaceDef& space,
                                 const DiscreteArch& arch, std::size_t index);

// Calls fn on every member in lexicographic order of values. Only sensible
// for small spaces.
void for_each_member(const SpaceDef& space,
                     const std::function<void(const DiscreteArch&)>& fn);

// Number of members; +inf when it does not fit a double.
double cardinality(const SpaceDef& space);

// Canonical string. Topology spaces with cell_edges use the tabular
// benchmark format |op~0|+|op~0|op~1|+...; size spaces use
// name=value;name=value.
std::string arch_to_string(const SpaceDef& space, const DiscreteArch& arch);
DiscreteArch parse_arch(const SpaceDef& space, const std::string& text);

nlohmann::json arch_to_json(const SpaceDef& space, const DiscreteArch& arch);
DiscreteArch arch_from_json(const SpaceDef& space, const nlohmann::json& j);

nlohmann::json space_to_json(const SpaceDef& space);
SpaceDef space_from_json(const nlohmann::json& j);
SpaceDef load_space(const std::string& path);
// Hex FNV-1a of the canonical JSON form.
std::string space_fingerprint(const SpaceDef& space);

}  // namespace gradnas

#endif  // GRADNAS_ARCH_SPACE_HPP_
