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

#include "gradnas/predictor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "gradnas/seed.hpp"
#include "json.hpp"

namespace gradnas {

using nlohmann::json;

namespace {

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, double fan_in,
                    std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

RowVector as_row(const Matrix& m) { return m.row(0); }

// out.block(b) = J * in.block(b) for each sample block of `n` rows.
Matrix propagate(const Matrix& j, const Matrix& in, Eigen::Index n) {
  Matrix out(in.rows(), in.cols());
  for (Eigen::Index r = 0; r < in.rows(); r += n) {
    out.middleRows(r, n).noalias() = j * in.middleRows(r, n);
  }
  return out;
}

// GCN cache layout per graph layer l (base = 1 + 4 l):
//   [base+0] V_l (layer input), [base+1] P1 = J V W1, [base+2] P2 = J^T V W2,
//   [base+3] pre-dropout output
// cache[0] = V0; after the graph layers: readout R, z1, a1 (= gelu(z1)),
// a1 after dropout.
constexpr int kGcnLayerStride = 4;

}  // namespace

const char* role_name(Role r) { return r == Role::kMain ? "main" : "aux"; }

Role role_from_name(const std::string& s) {
  if (s == "main") return Role::kMain;
  if (s == "aux") return Role::kAux;
  throw std::invalid_argument("role must be 'main' or 'aux', got '" + s + "'");
}

PredictorSpec PredictorSpec::for_space(const SpaceDef& space) {
  PredictorSpec s;
  if (space.kind == SpaceKind::kSize) {
    s.kind = PredictorKind::kMlp;
    s.input_rows = 1;
    s.input_cols = static_cast<int>(space.params.size());
    s.hidden_width = 1000;
    return s;
  }
  s.kind = PredictorKind::kGcn;
  s.input_rows = space.topology.node_count;
  s.input_cols = static_cast<int>(space.topology.options.size());
  s.hidden_width = 144;
  s.fc_width = 128;
  const int n = space.topology.node_count;
  s.propagation = Matrix::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) s.propagation(i, k) += space.topology.adjacency[i][k];
  }
  return s;
}

NormStats NormStats::fit(const std::vector<double>& targets) {
  NormStats st;
  if (targets.empty()) return st;
  const double n = static_cast<double>(targets.size());
  st.mean = std::accumulate(targets.begin(), targets.end(), 0.0) / n;
  double var = 0.0;
  for (double t : targets) var += (t - st.mean) * (t - st.mean);
  var /= n;
  const double sd = std::sqrt(var);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(st.mean)))) {
    st.std = 1.0;
    st.constant_target = true;
  } else {
    st.std = sd;
  }
  return st;
}

Predictor::Predictor(PredictorSpec spec, std::uint64_t init_seed)
    : spec_(std::move(spec)) {
  std::mt19937_64 rng(init_seed);
  const int h = spec_.hidden_width;
  auto add = [&](const std::string& name, Eigen::Index r, Eigen::Index c,
                 double fan_in) {
    params_.emplace_back(name, uniform_init(r, c, fan_in, rng));
  };
  if (spec_.kind == PredictorKind::kMlp) {
    int in = spec_.input_cols;
    for (int l = 0; l < spec_.hidden_layers; ++l) {
      add("fc" + std::to_string(l) + ".weight", in, h, in);
      add("fc" + std::to_string(l) + ".bias", 1, h, in);
      in = h;
    }
    add("out.weight", in, 1, in);
    add("out.bias", 1, 1, in);
    return;
  }
  int in = spec_.input_cols;
  for (int l = 0; l < spec_.hidden_layers; ++l) {
    add("gcn" + std::to_string(l) + ".w1", in, h, in);
    add("gcn" + std::to_string(l) + ".w2", in, h, in);
    in = h;
  }
  add("fc1.weight", h, spec_.fc_width, h);
  add("fc1.bias", 1, spec_.fc_width, h);
  add("fc2.weight", spec_.fc_width, 1, spec_.fc_width);
  add("fc2.bias", 1, 1, spec_.fc_width);
}

std::size_t Predictor::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

ForwardPass Predictor::forward(const Matrix& inputs, Mode mode,
                               std::mt19937_64* rng) const {
  if (inputs.cols() != spec_.input_cols ||
      inputs.rows() % spec_.input_rows != 0 || inputs.rows() == 0) {
    throw ShapeError("predictor input has shape " +
                     std::to_string(inputs.rows()) + "x" +
                     std::to_string(inputs.cols()) + ", expected (k*" +
                     std::to_string(spec_.input_rows) + ")x" +
                     std::to_string(spec_.input_cols));
  }
  ForwardPass pass;
  pass.batch = inputs.rows() / spec_.input_rows;
  const double p = spec_.dropout;

  if (spec_.kind == PredictorKind::kMlp) {
    // cache: h0, z0, h1, z1, ..., z_{L-1}, h_L, h_L after dropout
    Matrix h = inputs;
    for (int l = 0; l < spec_.hidden_layers; ++l) {
      Matrix z = affine_forward(h, params_[2 * l].value,
                                as_row(params_[2 * l + 1].value));
      pass.cache.push_back(std::move(h));
      h = gelu(z);
      pass.cache.push_back(std::move(z));
    }
    pass.drops.push_back(dropout(h, p, mode, rng));
    pass.cache.push_back(std::move(h));
    const auto L = static_cast<std::size_t>(2 * spec_.hidden_layers);
    pass.scores = affine_forward(pass.drops.back().y, params_[L].value,
                                 as_row(params_[L + 1].value));
    return pass;
  }

  const Eigen::Index n = spec_.input_rows;
  const Matrix& j = spec_.propagation;
  const Matrix jt = j.transpose();
  Matrix v = softmax_rows(inputs);
  pass.cache.push_back(v);
  for (int l = 0; l < spec_.hidden_layers; ++l) {
    Matrix p1 = propagate(j, v * params_[2 * l].value, n);
    Matrix p2 = propagate(jt, v * params_[2 * l + 1].value, n);
    Matrix out = 0.5 * relu(p1) + 0.5 * relu(p2);
    require_finite(out, "gcn layer");
    pass.drops.push_back(dropout(out, p, mode, rng));
    pass.cache.push_back(std::move(v));
    pass.cache.push_back(std::move(p1));
    pass.cache.push_back(std::move(p2));
    pass.cache.push_back(std::move(out));
    v = pass.drops.back().y;
  }
  Matrix readout(pass.batch, v.cols());
  for (Eigen::Index b = 0; b < pass.batch; ++b) {
    readout.row(b) = v.middleRows(b * n, n).colwise().mean();
  }
  const auto G = static_cast<std::size_t>(2 * spec_.hidden_layers);
  Matrix z1 = affine_forward(readout, params_[G].value, as_row(params_[G + 1].value));
  Matrix a1 = gelu(z1);
  pass.drops.push_back(dropout(a1, p, mode, rng));
  pass.scores = affine_forward(pass.drops.back().y, params_[G + 2].value,
                               as_row(params_[G + 3].value));
  pass.cache.push_back(std::move(readout));
  pass.cache.push_back(std::move(z1));
  pass.cache.push_back(std::move(a1));
  return pass;
}

Matrix Predictor::backward(const ForwardPass& pass, const Matrix& dscores,
                           std::vector<Matrix>* param_grads,
                           bool want_input_grad) const {
  if (dscores.rows() != pass.batch || dscores.cols() != 1) {
    throw ShapeError("predictor backward: dscores must be batch x 1");
  }
  if (param_grads != nullptr) param_grads->assign(params_.size(), Matrix());
  auto store = [&](std::size_t idx, Matrix g) {
    if (param_grads != nullptr) (*param_grads)[idx] = std::move(g);
  };
  const bool need_weights = param_grads != nullptr;

  if (spec_.kind == PredictorKind::kMlp) {
    const int L = spec_.hidden_layers;
    const auto out_idx = static_cast<std::size_t>(2 * L);
    const Matrix& h_last_dropped = pass.drops[0].y;
    Matrix dh;
    if (need_weights) {
      AffineGrads g = affine_backward(h_last_dropped, params_[out_idx].value, dscores);
      store(out_idx, std::move(g.dw));
      store(out_idx + 1, Matrix(g.db));
      dh = std::move(g.dx);
    } else {
      dh = dscores * params_[out_idx].value.transpose();
    }
    dh = dropout_backward(pass.drops[0], dh);
    for (int l = L - 1; l >= 0; --l) {
      const Matrix& h_in = pass.cache[static_cast<std::size_t>(2 * l)];
      const Matrix& z = pass.cache[static_cast<std::size_t>(2 * l + 1)];
      Matrix dz = gelu_backward(z, dh);
      const Matrix& w = params_[static_cast<std::size_t>(2 * l)].value;
      const bool need_dx = l > 0 || want_input_grad;
      if (need_weights) {
        AffineGrads g = affine_backward(h_in, w, dz, need_dx);
        store(static_cast<std::size_t>(2 * l), std::move(g.dw));
        store(static_cast<std::size_t>(2 * l + 1), Matrix(g.db));
        dh = std::move(g.dx);
      } else if (need_dx) {
        dh = dz * w.transpose();
      }
    }
    return want_input_grad ? dh : Matrix();
  }

  const Eigen::Index n = spec_.input_rows;
  const Matrix& j = spec_.propagation;
  const Matrix jt = j.transpose();
  const int L = spec_.hidden_layers;
  const auto G = static_cast<std::size_t>(2 * L);
  const std::size_t tail = 1 + kGcnLayerStride * static_cast<std::size_t>(L);
  const Matrix& readout = pass.cache[tail];
  const Matrix& z1 = pass.cache[tail + 1];
  const DropoutResult& fc_drop = pass.drops.back();

  Matrix da;
  if (need_weights) {
    AffineGrads g = affine_backward(fc_drop.y, params_[G + 2].value, dscores);
    store(G + 2, std::move(g.dw));
    store(G + 3, Matrix(g.db));
    da = std::move(g.dx);
  } else {
    da = dscores * params_[G + 2].value.transpose();
  }
  Matrix dz1 = gelu_backward(z1, dropout_backward(fc_drop, da));
  Matrix dread;
  if (need_weights) {
    AffineGrads g = affine_backward(readout, params_[G].value, dz1);
    store(G, std::move(g.dw));
    store(G + 1, Matrix(g.db));
    dread = std::move(g.dx);
  } else {
    dread = dz1 * params_[G].value.transpose();
  }
  Matrix dv(pass.batch * n, dread.cols());
  for (Eigen::Index b = 0; b < pass.batch; ++b) {
    dv.middleRows(b * n, n).rowwise() = dread.row(b) / static_cast<double>(n);
  }
  for (int l = L - 1; l >= 0; --l) {
    const std::size_t base = 1 + kGcnLayerStride * static_cast<std::size_t>(l);
    const Matrix& v_in = pass.cache[base];
    const Matrix& p1 = pass.cache[base + 1];
    const Matrix& p2 = pass.cache[base + 2];
    Matrix dout = dropout_backward(pass.drops[static_cast<std::size_t>(l)], dv);
    Matrix dp1 = relu_backward(p1, 0.5 * dout);
    Matrix dp2 = relu_backward(p2, 0.5 * dout);
    // P1 = J (V W1)  =>  d(V W1) = J^T dP1 ; P2 = J^T (V W2) => d(V W2) = J dP2
    Matrix da1 = propagate(jt, dp1, n);
    Matrix da2 = propagate(j, dp2, n);
    const auto w1 = static_cast<std::size_t>(2 * l);
    if (need_weights) {
      store(w1, v_in.transpose() * da1);
      store(w1 + 1, v_in.transpose() * da2);
    }
    if (l > 0 || want_input_grad) {
      dv = da1 * params_[w1].value.transpose() +
           da2 * params_[w1 + 1].value.transpose();
    }
  }
  if (!want_input_grad) return Matrix();
  return softmax_rows_backward(pass.cache[0], dv);
}

double Predictor::score(const Encoding& enc) const {
  return forward(enc.values, Mode::kEval).scores(0, 0);
}

Matrix stack_encodings(const std::vector<Encoding>& encs) {
  if (encs.empty()) return Matrix();
  const Eigen::Index r = encs.front().values.rows();
  Matrix out(r * static_cast<Eigen::Index>(encs.size()),
             encs.front().values.cols());
  for (std::size_t i = 0; i < encs.size(); ++i) {
    out.middleRows(static_cast<Eigen::Index>(i) * r, r) = encs[i].values;
  }
  return out;
}

TrainResult train(const PredictorSpec& spec, const SpaceDef& space,
                  const std::vector<TrainingSample>& samples, Role role,
                  std::uint64_t seed, const TrainOptions& opts) {
  if (samples.size() < 2) {
    throw TrainingError("train: need at least 2 samples, got " +
                        std::to_string(samples.size()));
  }
  std::vector<Encoding> encs;
  std::vector<double> targets;
  for (const auto& s : samples) {
    encs.push_back(encode(space, s.arch));  // throws for non-members
    const double t = role == Role::kMain ? s.performance : s.cost;
    if (!std::isfinite(t)) throw TrainingError("train: non-finite target");
    targets.push_back(t);
  }
  TrainResult result;
  result.predictor = Predictor(spec, derive_seed(seed, Stream::kPredictorInit));
  Predictor& net = result.predictor;
  net.role = role;
  net.stats = NormStats::fit(targets);
  Matrix y(static_cast<Eigen::Index>(targets.size()), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    y(static_cast<Eigen::Index>(i), 0) = net.stats.normalize(targets[i]);
  }
  const Matrix x = stack_encodings(encs);

  SgdMomentum opt({.momentum = opts.momentum,
                   .weight_decay = opts.weight_decay,
                   .schedule = LrSchedule::cosine(opts.lr, opts.epochs)});
  std::mt19937_64 drop_rng(derive_seed(seed, 17));
  std::vector<Matrix> grads;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    ForwardPass pass = net.forward(x, Mode::kTrain, &drop_rng);
    Matrix dloss;
    const double loss = huber_loss(pass.scores, y, opts.huber_delta, &dloss);
    result.loss_history.push_back(loss);
    net.backward(pass, dloss, &grads, false);
    for (std::size_t i = 0; i < grads.size(); ++i) {
      net.params()[i].grad = std::move(grads[i]);
    }
    opt.step(net.params());
  }
  return result;
}

double predict_denorm(const Predictor& p, const Encoding& enc) {
  return p.stats.denormalize(p.score(enc));
}

std::vector<double> predict_denorm(const Predictor& p,
                                   const std::vector<Encoding>& encs) {
  std::vector<double> out;
  if (encs.empty()) return out;
  const Matrix s = p.forward(stack_encodings(encs), Mode::kEval).scores;
  out.reserve(encs.size());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    out.push_back(p.stats.denormalize(s(i, 0)));
  }
  return out;
}

Matrix gcn_layer(const Matrix& j, const Matrix& v, const Matrix& w1,
                 const Matrix& w2) {
  if (j.rows() != j.cols() || j.cols() != v.rows() || v.cols() != w1.rows() ||
      w1.rows() != w2.rows() || w1.cols() != w2.cols()) {
    throw ShapeError("gcn_layer: shape mismatch");
  }
  return 0.5 * relu(j * v * w1) + 0.5 * relu(j.transpose() * v * w2);
}

namespace {

constexpr char kMagic[8] = {'G', 'N', 'A', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

const char* kind_name(PredictorKind k) {
  return k == PredictorKind::kMlp ? "mlp" : "gcn";
}

}  // namespace

void save_checkpoint(const std::string& path, const Predictor& p,
                     const SpaceDef& space) {
  const PredictorSpec& s = p.spec();
  json header;
  header["role"] = role_name(p.role);
  header["kind"] = kind_name(s.kind);
  header["space_name"] = space.name;
  header["space_fingerprint"] = space_fingerprint(space);
  header["spec"] = {{"input_rows", s.input_rows},   {"input_cols", s.input_cols},
                    {"hidden_layers", s.hidden_layers},
                    {"hidden_width", s.hidden_width}, {"fc_width", s.fc_width},
                    {"dropout", s.dropout}};
  header["norm"] = {{"mean", p.stats.mean},
                    {"std", p.stats.std},
                    {"constant_target", p.stats.constant_target}};
  json tensors = json::array();
  for (const auto& t : p.params()) {
    tensors.push_back({{"name", t.name}, {"shape", {t.rows(), t.cols()}}});
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : p.params()) {
    out.write(reinterpret_cast<const char*>(t.value.data()),
              static_cast<std::streamsize>(t.value.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("failed writing checkpoint '" + path + "'");
}

Predictor load_checkpoint(const std::string& path, const SpaceDef& space) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path + ": not a predictor checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw CheckpointError(path + ": unsupported checkpoint version " +
                          std::to_string(version));
  }
  if (len > (1u << 26)) throw CheckpointError(path + ": corrupt header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(path + ": corrupt header: " + e.what());
  }
  if (header.at("space_fingerprint").get<std::string>() !=
      space_fingerprint(space)) {
    throw CheckpointError(path + ": checkpoint was trained on space '" +
                          header.at("space_name").get<std::string>() +
                          "' with a different definition than '" + space.name +
                          "'");
  }
  PredictorSpec spec = PredictorSpec::for_space(space);
  const json& js = header.at("spec");
  spec.hidden_layers = js.at("hidden_layers").get<int>();
  spec.hidden_width = js.at("hidden_width").get<int>();
  spec.fc_width = js.at("fc_width").get<int>();
  spec.dropout = js.at("dropout").get<double>();
  if (kind_name(spec.kind) != header.at("kind").get<std::string>() ||
      spec.input_rows != js.at("input_rows").get<int>() ||
      spec.input_cols != js.at("input_cols").get<int>()) {
    throw CheckpointError(path + ": predictor layout does not match space");
  }
  Predictor p(spec, 0);
  p.role = role_from_name(header.at("role").get<std::string>());
  p.stats.mean = header.at("norm").at("mean").get<double>();
  p.stats.std = header.at("norm").at("std").get<double>();
  p.stats.constant_target = header.at("norm").at("constant_target").get<bool>();
  const json& tensors = header.at("tensors");
  if (tensors.size() != p.params().size()) {
    throw CheckpointError(path + ": tensor count mismatch");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Tensor& t = p.params()[i];
    if (tensors[i].at("name").get<std::string>() != t.name ||
        tensors[i].at("shape").at(0).get<Eigen::Index>() != t.rows() ||
        tensors[i].at("shape").at(1).get<Eigen::Index>() != t.cols()) {
      throw CheckpointError(path + ": tensor " + t.name + " layout mismatch");
    }
    in.read(reinterpret_cast<char*>(t.value.data()),
            static_cast<std::streamsize>(t.value.size() * sizeof(double)));
  }
  if (!in) throw CheckpointError(path + ": truncated tensor data");
  return p;
}

}  // namespace gradnas
