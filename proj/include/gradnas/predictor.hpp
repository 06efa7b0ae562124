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

#ifndef GRADNAS_PREDICTOR_HPP_
#define GRADNAS_PREDICTOR_HPP_

// Accuracy / cost regressors over architecture encodings.
//
//   MLP (size spaces):      x -> 3 x [affine(1000), GeLU] -> dropout -> affine(1)
//   GCN (topology spaces):  V0 = softmax_rows(logits)
//                           3 x V' = 0.5 ReLU(J V W1) + 0.5 ReLU(J^T V W2), dropout
//                           mean over nodes -> affine(128), GeLU, dropout
//                           -> affine(1)
// with J = A + I. Scores are in standardised target units; NormStats maps
// them back.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradnas/arch_space.hpp"
#include "gradnas/tensor.hpp"

namespace gradnas {

enum class PredictorKind { kMlp, kGcn };
enum class Role { kMain, kAux };

const char* role_name(Role r);
Role role_from_name(const std::string& s);

struct PredictorSpec {
  PredictorKind kind = PredictorKind::kMlp;
  int input_rows = 1;  // rows per sample: 1 (MLP) or node count (GCN)
  int input_cols = 0;  // encoding width (MLP) or option count (GCN)
  int hidden_layers = 3;
  int hidden_width = 1000;  // MLP hidden / GCN embedding width
  int fc_width = 128;       // GCN only
  double dropout = 0.05;
  Matrix propagation;  // GCN: J = A + I, input_rows x input_rows

  // MLP for size spaces, GCN for topology spaces; widths per the
  // predictor structure table (1000 / 144 + 128).
  static PredictorSpec for_space(const SpaceDef& space);
};

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
  bool constant_target = false;

  static NormStats fit(const std::vector<double>& targets);
  double normalize(double v) const { return (v - mean) / std; }
  double denormalize(double s) const { return mean + std * s; }
};

struct TrainingSample {
  DiscreteArch arch;
  double performance = 0.0;
  double cost = 0.0;
};

// Intermediates of one forward pass, consumed by backward().
struct ForwardPass {
  Eigen::Index batch = 0;
  Matrix scores;  // batch x 1
  std::vector<Matrix> cache;
  std::vector<DropoutResult> drops;
};

class Predictor {
 public:
  Predictor() = default;
  Predictor(PredictorSpec spec, std::uint64_t init_seed);

  const PredictorSpec& spec() const { return spec_; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::size_t parameter_count() const;

  // `inputs` stacks `batch` encodings vertically:
  // (batch * input_rows) x input_cols. Train mode needs an rng for dropout.
  ForwardPass forward(const Matrix& inputs, Mode mode,
                      std::mt19937_64* rng = nullptr) const;

  // Returns d(sum_i dscores_i * score_i)/d(inputs). When param_grads is
  // given it is resized to params() and receives the weight gradients.
  Matrix backward(const ForwardPass& pass, const Matrix& dscores,
                  std::vector<Matrix>* param_grads = nullptr,
                  bool want_input_grad = true) const;

  // Eval-mode raw score of one encoding.
  double score(const Encoding& enc) const;

  NormStats stats;
  Role role = Role::kMain;

 private:
  PredictorSpec spec_;
  std::vector<Tensor> params_;
};

// Stack encodings into the forward() batch layout.
Matrix stack_encodings(const std::vector<Encoding>& encs);

struct TrainOptions {
  int epochs = 300;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double huber_delta = 1.0;
};

struct TrainResult {
  Predictor predictor;
  std::vector<double> loss_history;  // one per epoch, train mode
};

class TrainingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Full-batch SGD on Huber loss over standardised targets. Deterministic in
// `seed`.
TrainResult train(const PredictorSpec& spec, const SpaceDef& space,
                  const std::vector<TrainingSample>& samples, Role role,
                  std::uint64_t seed, const TrainOptions& opts = {});

// Eval-mode forward, mapped back to target units.
double predict_denorm(const Predictor& p, const Encoding& enc);

// Batched predict_denorm.
std::vector<double> predict_denorm(const Predictor& p,
                                   const std::vector<Encoding>& encs);

// ---- checkpoints -----------------------------------------------------------
//
// Layout (little-endian):
//   8 bytes   magic "GNASCKPT"
//   u32       format version (1)
//   u64       header length H
//   H bytes   JSON header: role, kind, spec, norm stats, space name and
//             fingerprint, and the ordered tensor list [{name, shape}]
//   float64s  tensor data in header order, row-major

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::string& path, const Predictor& p,
                     const SpaceDef& space);
// Refuses checkpoints written against a different space.
Predictor load_checkpoint(const std::string& path, const SpaceDef& space);

// Single graph layer: 0.5 ReLU(J V W1) + 0.5 ReLU(J^T V W2).
Matrix gcn_layer(const Matrix& j, const Matrix& v, const Matrix& w1,
                 const Matrix& w2);

}  // namespace gradnas

#endif  // GRADNAS_PREDICTOR_HPP_
