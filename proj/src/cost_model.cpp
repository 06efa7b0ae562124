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

#include "gradnas/cost_model.hpp"

#include <cmath>
#include <string>

namespace gradnas {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace

std::int64_t conv_flops(std::int64_t h, std::int64_t w, std::int64_t c_in,
                        std::int64_t c_out, std::int64_t k, std::int64_t stride,
                        std::int64_t groups) {
  if (h <= 0 || w <= 0 || c_in <= 0 || c_out <= 0 || k <= 0 || stride <= 0 ||
      groups <= 0) {
    throw CostError("conv_flops: all arguments must be positive");
  }
  if (c_in % groups != 0 || c_out % groups != 0) {
    throw CostError("conv_flops: channels " + std::to_string(c_in) + "->" +
                    std::to_string(c_out) + " not divisible by groups " +
                    std::to_string(groups));
  }
  return ceil_div(h, stride) * ceil_div(w, stride) * k * k * (c_in / groups) *
         c_out;
}

CostResult anynet_cost(const std::vector<AnynetStage>& stages,
                       const NetConvention& net) {
  CostResult r;
  std::int64_t res = net.resolution;
  std::int64_t w_in = net.stem_width;
  r.flops += conv_flops(res, res, 3, w_in, 3, 2, 1);
  r.params += 3 * 3 * 3 * w_in;
  res = ceil_div(res, 2);
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const AnynetStage& st = stages[s];
    const std::int64_t w = st.width;
    const std::int64_t wb = std::llround(static_cast<double>(w) * st.ratio);
    if (st.depth < 1 || w <= 0 || wb <= 0 || st.groups <= 0) {
      throw CostError("stage " + std::to_string(s + 1) +
                      ": depth, width and groups must be positive");
    }
    if (wb % st.groups != 0) {
      throw CostError("stage " + std::to_string(s + 1) + ": groups " +
                      std::to_string(st.groups) +
                      " do not divide bottleneck width " + std::to_string(wb));
    }
    for (int b = 0; b < st.depth; ++b) {
      const std::int64_t stride = b == 0 ? 2 : 1;
      const std::int64_t res_out = ceil_div(res, stride);
      r.flops += conv_flops(res, res, w_in, wb, 1, 1, 1);
      r.flops += conv_flops(res, res, wb, wb, 3, stride, st.groups);
      r.flops += conv_flops(res_out, res_out, wb, w, 1, 1, 1);
      r.params += w_in * wb + 9 * (wb / st.groups) * wb + wb * w;
      if (stride != 1 || w_in != w) {
        r.flops += conv_flops(res, res, w_in, w, 1, stride, 1);
        r.params += w_in * w;
      }
      res = res_out;
      w_in = w;
    }
  }
  r.flops += w_in * net.num_classes;
  r.params += w_in * net.num_classes + net.num_classes;
  return r;
}

std::vector<AnynetStage> anynet_stages(const SpaceDef& space,
                                       const DiscreteArch& arch) {
  check_member(space, arch);
  std::vector<AnynetStage> stages;
  for (int i = 1;; ++i) {
    const std::string n = std::to_string(i);
    bool present = false;
    for (const auto& p : space.params) present |= p.name == "D" + n;
    if (!present) break;
    AnynetStage st;
    st.depth = static_cast<int>(arch.values[space.param_index("D" + n)]);
    st.width = static_cast<std::int64_t>(arch.values[space.param_index("W" + n)]);
    st.ratio = arch.values[space.param_index("R" + n)];
    st.groups = static_cast<std::int64_t>(arch.values[space.param_index("G" + n)]);
    stages.push_back(st);
  }
  if (stages.empty()) {
    throw CostError(space.name + ": not an AnyNet-style space (no D1 param)");
  }
  return stages;
}

CostResult anynet_cost(const SpaceDef& space, const DiscreteArch& arch) {
  return anynet_cost(anynet_stages(space, arch));
}

std::vector<AnynetStage> stages_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw CostError("arch JSON must be an object");
  for (const char* key : {"d", "w", "g"}) {
    if (!j.contains(key) || !j.at(key).is_array()) {
      throw CostError(std::string("arch JSON needs an array '") + key + "'");
    }
  }
  const std::size_t n = j.at("d").size();
  if (n == 0 || j.at("w").size() != n || j.at("g").size() != n ||
      (j.contains("r") && j.at("r").size() != n)) {
    throw CostError("arch JSON arrays d/w/r/g must have equal nonzero length");
  }
  std::vector<AnynetStage> stages(n);
  try {
    for (std::size_t i = 0; i < n; ++i) {
      stages[i].depth = j.at("d").at(i).get<int>();
      stages[i].width = j.at("w").at(i).get<std::int64_t>();
      stages[i].groups = j.at("g").at(i).get<std::int64_t>();
      if (j.contains("r")) stages[i].ratio = j.at("r").at(i).get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw CostError(std::string("arch JSON: ") + e.what());
  }
  return stages;
}

}  // namespace gradnas
