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

#ifndef GRADNAS_ORACLE_HPP_
#define GRADNAS_ORACLE_HPP_

// Ground-truth oracles: tabular benchmark lookups and seeded synthetic
// functions with closed forms.

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "gradnas/arch_space.hpp"
#include "gradnas/tensor.hpp"

namespace gradnas {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Query for an architecture the oracle does not know.
class OracleMiss : public OracleError {
 public:
  using OracleError::OracleError;
};

class BudgetExceeded : public OracleError {
 public:
  using OracleError::OracleError;
};

enum class Dataset { kCifar10 = 0, kCifar100 = 1, kImageNet16 = 2 };

// Accepts cifar10, cifar100, imagenet16 (also in16, ImageNet16-120).
Dataset dataset_from_name(const std::string& name);
std::string dataset_name(Dataset d);

// selection: metric used to train predictors and pick among queried archs.
// report: metric reported for the pick. cost: FLOPs.
struct OracleResult {
  double selection = 0;
  double report = 0;
  double cost = 0;
};

class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual OracleResult query(const DiscreteArch& arch) const = 0;
  virtual const SpaceDef& space() const = 0;
};

struct TabularMetrics {
  std::array<double, 3> val{};   // indexed by Dataset
  std::array<double, 3> test{};
  double flops = 0;
  double params = 0;
};

inline constexpr const char* kTabularHeader =
    "arch,cifar10_val,cifar10_test,cifar100_val,cifar100_test,in16_val,"
    "in16_test,flops,params";

// Immutable arch-string -> metrics table covering a whole space.
class TabularOracle {
 public:
  // Throws OracleError on bad header, unparsable rows, duplicates, or
  // incomplete coverage (naming the first missing arch in enumeration
  // order).
  static TabularOracle load(const std::string& csv_path, const SpaceDef& space);
  static TabularOracle from_rows(
      const std::vector<std::pair<std::string, TabularMetrics>>& rows,
      const SpaceDef& space);

  const TabularMetrics& at(const DiscreteArch& arch) const;
  const TabularMetrics& at(const std::string& key) const;
  std::size_t size() const { return table_.size(); }
  const SpaceDef& space() const { return space_; }

 private:
  SpaceDef space_;
  std::unordered_map<std::string, TabularMetrics> table_;
};

// Dataset-specific view: selection = validation, report = test accuracy.
class TabularView : public Oracle {
 public:
  TabularView(std::shared_ptr<const TabularOracle> table, Dataset dataset)
      : table_(std::move(table)), dataset_(dataset) {}
  OracleResult query(const DiscreteArch& arch) const override;
  const SpaceDef& space() const override { return table_->space(); }
  Dataset dataset() const { return dataset_; }

 private:
  std::shared_ptr<const TabularOracle> table_;
  Dataset dataset_;
};

// F*(x) = 100 - 40 |x - x*|^2 + sum_k a_k cos(w_k . x + phi_k), x the 1 x d
// size encoding, sum_k a_k = perturbation amplitude (<= 1). C* is the
// analytic AnyNet FLOPs when the space is AnyNet-shaped, else c0 + c . x
// with positive coefficients.
class SyntheticOracle : public Oracle {
 public:
  static constexpr int kModes = 5;

  SyntheticOracle(const SpaceDef& space, std::uint64_t seed,
                  double perturbation = 1.0);

  OracleResult query(const DiscreteArch& arch) const override;
  const SpaceDef& space() const override { return space_; }

  double value(const Matrix& x) const;
  Matrix gradient(const Matrix& x) const;
  double cost(const DiscreteArch& arch) const;

  const Matrix& optimum() const { return optimum_; }
  DiscreteArch optimum_arch() const;
  double perturbation() const { return amp_.sum(); }
  bool analytic_cost() const { return anynet_; }

 private:
  SpaceDef space_;
  Matrix optimum_;   // 1 x d
  Eigen::VectorXd amp_;
  Matrix freq_;      // kModes x d
  Eigen::VectorXd phase_;
  Eigen::VectorXd lin_;  // linear cost form, non-AnyNet spaces
  double lin0_ = 0;
  bool anynet_ = false;
};

// Budgeted wrapper. Every query counts, including repeats; a query beyond
// the budget throws BudgetExceeded without reaching the inner oracle.
class CountingOracle : public Oracle {
 public:
  CountingOracle(const Oracle& inner, std::size_t budget)
      : inner_(inner), budget_(budget) {}
  OracleResult query(const DiscreteArch& arch) const override;
  const SpaceDef& space() const override { return inner_.space(); }
  std::size_t queries() const { return count_.load(); }
  std::size_t budget() const { return budget_; }

 private:
  const Oracle& inner_;
  std::size_t budget_;
  mutable std::atomic<std::size_t> count_{0};
};

// True when the space carries D1/W1/R1/G1... stage parameters.
bool is_anynet_shaped(const SpaceDef& space);

// ---- synthetic stand-in for the tabular topology benchmark ------------------
//
// A generated table over the whole NB201-style space. Accuracy is a seeded
// function of the live cell graph: convolution capacity on live edges,
// convolution depth along the deepest path, a residual bonus for a skip on
// the input->output edge and a pooling penalty, plus hashed noise. Cells
// with no live path sit at chance level. The CIFAR-100 test maximum is
// capped at 73.51. FLOPs/params follow a 3-stage, 5-cells-per-stage CIFAR
// macro skeleton. It exists so the harness runs end to end without the
// real export; its numbers say nothing about real benchmark results.
std::vector<std::pair<std::string, TabularMetrics>> make_synthetic_nb201(
    const SpaceDef& space, std::uint64_t seed);

void write_tabular_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, TabularMetrics>>& rows);

}  // namespace gradnas

#endif  // GRADNAS_ORACLE_HPP_
