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

#ifndef GRADNAS_COST_MODEL_HPP_
#define GRADNAS_COST_MODEL_HPP_

// Analytic multiply-add and parameter counts for AnyNet-style X-block
// networks.
//
// Convention (224x224 input):
//   stem   3x3 conv, 3 -> 32, stride 2
//   stage  d blocks; the first block of every stage has stride 2
//   block  1x1 conv w_in -> w_b, 3x3 group conv w_b -> w_b (groups g,
//          stride s), 1x1 conv w_b -> w, plus a 1x1 stride-s projection
//          shortcut w_in -> w when the width or resolution changes
//   head   global average pool, linear w -> 1000
// with w_b = round(w * r). BN, activations, pooling and the residual add
// are not counted; conv and linear biases are not counted in FLOPs.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gradnas/arch_space.hpp"
#include "json.hpp"

namespace gradnas {

class CostError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ceil(h/stride) * ceil(w/stride) * k^2 * (c_in/groups) * c_out
std::int64_t conv_flops(std::int64_t h, std::int64_t w, std::int64_t c_in,
                        std::int64_t c_out, std::int64_t k, std::int64_t stride,
                        std::int64_t groups);

struct AnynetStage {
  int depth = 1;
  std::int64_t width = 0;
  double ratio = 1.0;
  std::int64_t groups = 1;
};

struct NetConvention {
  std::int64_t resolution = 224;
  std::int64_t stem_width = 32;
  std::int64_t num_classes = 1000;
};

struct CostResult {
  std::int64_t flops = 0;
  std::int64_t params = 0;
};

// Structural check only (positive sizes, groups | w_b); does not enforce
// search-space bounds, so published models wider than 1024 are accepted.
CostResult anynet_cost(const std::vector<AnynetStage>& stages,
                       const NetConvention& net = {});

// Stages read from an arch of build_anynet_space(); throws MembershipError
// for non-members.
std::vector<AnynetStage> anynet_stages(const SpaceDef& space,
                                       const DiscreteArch& arch);
CostResult anynet_cost(const SpaceDef& space, const DiscreteArch& arch);

// Stage lists from {"d": [...], "w": [...], "r": [...], "g": [...]}, where
// "r" is optional (all 1). Groups are group counts, not group widths.
std::vector<AnynetStage> stages_from_json(const nlohmann::json& j);

inline bool in_window(double flops, double target, double delta) {
  return std::abs(flops - target) <= delta;
}

}  // namespace gradnas

#endif  // GRADNAS_COST_MODEL_HPP_
