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

#include "gradnas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gradnas {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b,
                        std::string_view what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch (" +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite value");
  }
}

Matrix affine_forward(const Matrix& x, const Matrix& w, const RowVector& b) {
  if (x.cols() != w.rows()) {
    throw ShapeError("affine_forward: inner dimensions " +
                     std::to_string(x.cols()) + " and " +
                     std::to_string(w.rows()) + " disagree");
  }
  if (b.size() != 0 && b.size() != w.cols()) {
    throw ShapeError("affine_forward: bias length mismatch");
  }
  Matrix y = x * w;
  if (b.size() != 0) y.rowwise() += b;
  require_finite(y, "affine_forward");
  return y;
}

AffineGrads affine_backward(const Matrix& x, const Matrix& w,
                            const Matrix& dy, bool want_dx) {
  if (dy.rows() != x.rows() || dy.cols() != w.cols() || x.cols() != w.rows()) {
    throw ShapeError("affine_backward: shape mismatch");
  }
  AffineGrads g;
  if (want_dx) g.dx = dy * w.transpose();
  g.dw = x.transpose() * dy;
  g.db = dy.colwise().sum();
  return g;
}

Matrix gelu(const Matrix& x) {
  return x.unaryExpr(
      [](double v) { return 0.5 * v * std::erfc(-v * kInvSqrt2); });
}

Matrix gelu_backward(const Matrix& x, const Matrix& dy) {
  require_same_shape(x, dy, "gelu_backward");
  // d/dx x Phi(x) = Phi(x) + x phi(x)
  Matrix d = x.unaryExpr([](double v) {
    return 0.5 * std::erfc(-v * kInvSqrt2) +
           v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
  });
  return d.cwiseProduct(dy);
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& x, const Matrix& dy) {
  require_same_shape(x, dy, "relu_backward");
  return x.binaryExpr(dy, [](double v, double g) { return v > 0.0 ? g : 0.0; });
}

Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - m).exp().matrix();
    y.row(i) /= y.row(i).sum();
  }
  require_finite(y, "softmax_rows");
  return y;
}

Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy) {
  require_same_shape(y, dy, "softmax_rows_backward");
  Matrix dx(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double dot = y.row(i).dot(dy.row(i));
    dx.row(i) = y.row(i).cwiseProduct((dy.row(i).array() - dot).matrix());
  }
  return dx;
}

DropoutResult dropout(const Matrix& x, double p, Mode mode,
                      std::mt19937_64* rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("dropout: p must lie in [0, 1)");
  }
  DropoutResult r;
  if (mode == Mode::kEval || p == 0.0) {
    r.y = x;
    return r;
  }
  if (rng == nullptr) {
    throw std::invalid_argument("dropout: train mode needs an rng");
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  r.mask.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < r.mask.size(); ++i) {
    r.mask.data()[i] = u(*rng) < p ? 0.0 : keep_scale;
  }
  r.y = x.cwiseProduct(r.mask);
  return r;
}

Matrix dropout_backward(const DropoutResult& fwd, const Matrix& dy) {
  if (fwd.mask.size() == 0) return dy;
  return dy.cwiseProduct(fwd.mask);
}

double huber_loss(const Matrix& pred, const Matrix& target, double delta,
                  Matrix* grad) {
  require_same_shape(pred, target, "huber_loss");
  if (!(delta > 0.0)) throw std::invalid_argument("huber_loss: delta <= 0");
  const auto n = static_cast<double>(pred.size());
  if (grad != nullptr) grad->resize(pred.rows(), pred.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double r = pred.data()[i] - target.data()[i];
    const double a = std::abs(r);
    double g;
    if (a <= delta) {
      total += 0.5 * r * r;
      g = r;
    } else {
      total += delta * (a - 0.5 * delta);
      g = r > 0 ? delta : -delta;
    }
    if (grad != nullptr) grad->data()[i] = g / n;
  }
  const double loss = total / n;
  if (!std::isfinite(loss)) throw NumericError("huber_loss: non-finite loss");
  return loss;
}

LrSchedule LrSchedule::constant(double base) {
  LrSchedule s;
  s.kind = Kind::kConstant;
  s.base = base;
  return s;
}

LrSchedule LrSchedule::cosine(double base, int total) {
  if (total < 1) throw std::invalid_argument("cosine schedule: total < 1");
  LrSchedule s;
  s.kind = Kind::kCosine;
  s.base = base;
  s.total = total;
  return s;
}

LrSchedule LrSchedule::step(double base, std::vector<int> milestones,
                            double factor) {
  LrSchedule s;
  s.kind = Kind::kStep;
  s.base = base;
  std::sort(milestones.begin(), milestones.end());
  s.milestones = std::move(milestones);
  s.factor = factor;
  return s;
}

LrSchedule LrSchedule::thirds(double base, int total, double factor) {
  return step(base, {(total + 2) / 3, (2 * total + 2) / 3}, factor);
}

double LrSchedule::at(int t) const {
  switch (kind) {
    case Kind::kConstant:
      return base;
    case Kind::kCosine:
      return base * 0.5 * (1.0 + std::cos(std::numbers::pi * t / total));
    case Kind::kStep: {
      double lr = base;
      for (int m : milestones) {
        if (t >= m) lr *= factor;
      }
      return lr;
    }
  }
  return base;
}

void SgdMomentum::step(std::span<Tensor> params) {
  if (velocity_.empty()) {
    velocity_.reserve(params.size());
    for (const auto& p : params) {
      velocity_.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (velocity_.size() != params.size()) {
    throw ShapeError("SgdMomentum: parameter list changed between steps");
  }
  const double lr = cfg_.schedule.at(t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    Matrix& v = velocity_[i];
    if (v.rows() != p.rows() || v.cols() != p.cols() ||
        p.grad.rows() != p.rows() || p.grad.cols() != p.cols()) {
      throw ShapeError("SgdMomentum: shape mismatch for " + p.name);
    }
    v = cfg_.momentum * v + p.grad + cfg_.weight_decay * p.value;
    p.value -= lr * v;
  }
  ++t_;
}

double grad_check(const std::function<double(const Matrix&)>& f,
                  const Matrix& x, const Matrix& analytic, double h,
                  std::size_t max_coords, std::uint64_t seed) {
  require_same_shape(x, analytic, "grad_check");
  std::vector<Eigen::Index> coords(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    coords[static_cast<std::size_t>(i)] = i;
  }
  if (max_coords != 0 && coords.size() > max_coords) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }
  Matrix probe = x;
  double worst = 0.0;
  for (Eigen::Index i : coords) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const double fp = f(probe);
    probe.data()[i] = orig - h;
    const double fm = f(probe);
    probe.data()[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("grad_check: f is not finite");
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double err = std::abs(analytic.data()[i] - numeric) /
                       std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace gradnas
