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

#ifndef GRADNAS_TENSOR_HPP_
#define GRADNAS_TENSOR_HPP_

// Dense 2-D numerics for the predictors: layer forward/backward pairs,
// losses, dropout, SGD with momentum and the learning-rate schedules.
// Everything is float64 and row-major. There is no general graph; each
// predictor wires its own backward pass from these pieces.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace gradnas {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws NumericError if any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);

// A learnable tensor: value plus a gradient buffer of the same shape.
struct Tensor {
  std::string name;
  Matrix value;
  Matrix grad;

  Tensor() = default;
  Tensor(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())) {}

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// ---- affine ---------------------------------------------------------------

// y = x W + b, b broadcast over rows. b may be empty (no bias).
Matrix affine_forward(const Matrix& x, const Matrix& w, const RowVector& b);

struct AffineGrads {
  Matrix dx;
  Matrix dw;
  RowVector db;
};
AffineGrads affine_backward(const Matrix& x, const Matrix& w,
                            const Matrix& dy, bool want_dx = true);

// ---- activations ------------------------------------------------------------

// GeLU with the exact Gaussian CDF: x * Phi(x).
Matrix gelu(const Matrix& x);
Matrix gelu_backward(const Matrix& x, const Matrix& dy);

Matrix relu(const Matrix& x);
// Subgradient at 0 is 0.
Matrix relu_backward(const Matrix& x, const Matrix& dy);

// Row-wise softmax, stabilised by subtracting the row max.
Matrix softmax_rows(const Matrix& x);
// Backward from the forward output y: dx = y * (dy - rowsum(dy * y)).
Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy);

// ---- dropout ---------------------------------------------------------------

enum class Mode { kTrain, kEval };

struct DropoutResult {
  Matrix y;
  Matrix mask;  // scaled keep-mask (0 or 1/(1-p)); empty in eval mode
};
DropoutResult dropout(const Matrix& x, double p, Mode mode,
                      std::mt19937_64* rng);
Matrix dropout_backward(const DropoutResult& fwd, const Matrix& dy);

// ---- loss ------------------------------------------------------------------

// Mean Huber loss over all elements. If grad != nullptr it receives
// d(loss)/d(pred).
double huber_loss(const Matrix& pred, const Matrix& target, double delta,
                  Matrix* grad);

// ---- optimisation ----------------------------------------------------------

struct LrSchedule {
  enum class Kind { kConstant, kCosine, kStep };
  Kind kind = Kind::kConstant;
  double base = 0.01;
  int total = 1;                // cosine period T
  std::vector<int> milestones;  // step: lr *= factor once t >= milestone
  double factor = 0.1;

  static LrSchedule constant(double base);
  static LrSchedule cosine(double base, int total);
  static LrSchedule step(double base, std::vector<int> milestones,
                         double factor);
  // Milestones at ceil(total/3) and ceil(2*total/3).
  static LrSchedule thirds(double base, int total, double factor);

  double at(int t) const;
};

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 1e-4;
  LrSchedule schedule = LrSchedule::cosine(0.01, 300);
};

// v <- m v + g + wd theta ; theta <- theta - lr(t) v
class SgdMomentum {
 public:
  explicit SgdMomentum(SgdConfig cfg) : cfg_(std::move(cfg)) {}

  void step(std::span<Tensor> params);
  int step_count() const { return t_; }
  double current_lr() const { return cfg_.schedule.at(t_); }
  const SgdConfig& config() const { return cfg_; }

 private:
  SgdConfig cfg_;
  std::vector<Matrix> velocity_;
  int t_ = 0;
};

// ---- finite differences ----------------------------------------------------

// Central differences with step h on (a random subset of at most
// max_coords) coordinates of x. Returns
//   max |analytic - numeric| / max(1, |numeric|).
// Throws NumericError if f is not finite at a probe.
double grad_check(const std::function<double(const Matrix&)>& f,
                  const Matrix& x, const Matrix& analytic, double h = 1e-6,
                  std::size_t max_coords = 0, std::uint64_t seed = 0);

}  // namespace gradnas

#endif  // GRADNAS_TENSOR_HPP_
