// Copyright 2026 The FedSampling Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Softmax classifiers over a flat parameter vector: a linear model and a
// one-hidden-layer ReLU MLP, with per-sample cross-entropy gradients.
//
// Flat layout (row-major matrices):
//   linear: W[L x d], b[L]
//   mlp:    W1[h x d], b1[h], W2[L x h], b2[L]

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fedsampling/data.hpp"
#include "fedsampling/error.hpp"
#include "fedsampling/rng.hpp"

namespace fedsampling {

enum class ModelKind : std::uint32_t { kLinear = 0, kMlp = 1 };

inline const char* to_string(ModelKind k) { return k == ModelKind::kLinear ? "linear" : "mlp"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "linear") return ModelKind::kLinear;
  if (s == "mlp") return ModelKind::kMlp;
  throw InvalidArgument("unknown model kind: " + s);
}

struct ModelSpec {
  ModelKind kind = ModelKind::kLinear;
  std::size_t input_dim = 1;
  std::size_t num_classes = 2;
  std::size_t hidden = 0;
  double init_scale = 1.0;

  void validate() const {
    detail::require(input_dim >= 1, "model: input_dim must be >= 1");
    detail::require(num_classes >= 2, "model: num_classes must be >= 2");
    detail::require(kind != ModelKind::kMlp || hidden >= 1, "model: mlp needs hidden >= 1");
    detail::require(init_scale >= 0.0, "model: init_scale must be >= 0");
  }

  bool operator==(const ModelSpec&) const = default;
};

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;  // 1 for bias vectors

  std::size_t size() const { return rows * cols; }
};

inline std::vector<Segment> layout(const ModelSpec& spec) {
  std::vector<Segment> segs;
  std::size_t off = 0;
  auto add = [&](const char* name, std::size_t r, std::size_t c) {
    segs.push_back({name, off, r, c});
    off += r * c;
  };
  if (spec.kind == ModelKind::kLinear) {
    add("W", spec.num_classes, spec.input_dim);
    add("b", spec.num_classes, 1);
  } else {
    add("W1", spec.hidden, spec.input_dim);
    add("b1", spec.hidden, 1);
    add("W2", spec.num_classes, spec.hidden);
    add("b2", spec.num_classes, 1);
  }
  return segs;
}

inline std::size_t param_count(const ModelSpec& spec) {
  const auto segs = layout(spec);
  return segs.back().offset + segs.back().size();
}

struct ParamVector {
  ModelSpec shape;
  std::vector<double> values;

  static ParamVector zeros(const ModelSpec& spec) { return {spec, std::vector<double>(param_count(spec), 0.0)}; }

  std::size_t size() const { return values.size(); }

  bool all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }

  // this += scale * other
  void axpy(double scale, const ParamVector& other) {
    detail::require(other.values.size() == values.size(), "ParamVector::axpy: size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += scale * other.values[i];
  }

  bool operator==(const ParamVector&) const = default;
};

inline ParamVector init_params(const ModelSpec& spec, RandomStream& stream) {
  spec.validate();
  ParamVector p = ParamVector::zeros(spec);
  for (const auto& seg : layout(spec)) {
    if (seg.cols == 1) continue;  // bias
    const double sd = spec.init_scale / std::sqrt(static_cast<double>(seg.cols));
    for (std::size_t i = 0; i < seg.size(); ++i) p.values[seg.offset + i] = sd * stream.standard_normal();
  }
  return p;
}

namespace detail {

// Stable log-softmax cross-entropy. Fills probs with softmax(logits).
inline double softmax_xent(std::span<const double> logits, std::size_t label, std::span<double> probs) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - mx);
    z += probs[k];
  }
  for (auto& p : probs) p /= z;
  return std::log(z) + mx - logits[label];
}

struct Workspace {
  std::vector<double> hidden_pre, hidden_act, logits, probs, dhidden;
};

inline void check_sample(const ModelSpec& spec, const Sample& s) {
  require(s.features.size() == spec.input_dim, "model: feature dimension mismatch");
  require(s.label < spec.num_classes, "model: label out of range");
}

// Writes logits into ws.logits (and hidden activations for the MLP).
inline void forward(const ModelSpec& spec, std::span<const double> theta, const Sample& s, Workspace& ws) {
  const std::size_t d = spec.input_dim, L = spec.num_classes;
  const double* x = s.features.data();
  ws.logits.assign(L, 0.0);
  if (spec.kind == ModelKind::kLinear) {
    const double* W = theta.data();
    const double* b = W + L * d;
    for (std::size_t k = 0; k < L; ++k) {
      double acc = b[k];
      for (std::size_t j = 0; j < d; ++j) acc += W[k * d + j] * x[j];
      ws.logits[k] = acc;
    }
    return;
  }
  const std::size_t h = spec.hidden;
  const double* W1 = theta.data();
  const double* b1 = W1 + h * d;
  const double* W2 = b1 + h;
  const double* b2 = W2 + L * h;
  ws.hidden_pre.resize(h);
  ws.hidden_act.resize(h);
  for (std::size_t u = 0; u < h; ++u) {
    double acc = b1[u];
    for (std::size_t j = 0; j < d; ++j) acc += W1[u * d + j] * x[j];
    ws.hidden_pre[u] = acc;
    ws.hidden_act[u] = acc > 0.0 ? acc : 0.0;
  }
  for (std::size_t k = 0; k < L; ++k) {
    double acc = b2[k];
    for (std::size_t u = 0; u < h; ++u) acc += W2[k * h + u] * ws.hidden_act[u];
    ws.logits[k] = acc;
  }
}

// Returns the loss and adds scale * dloss/dtheta into grad.
inline double accumulate_loss_grad(const ModelSpec& spec, std::span<const double> theta, const Sample& s,
                                   std::span<double> grad, double scale, Workspace& ws) {
  const std::size_t d = spec.input_dim, L = spec.num_classes;
  forward(spec, theta, s, ws);
  ws.probs.resize(L);
  const double loss = softmax_xent(ws.logits, s.label, ws.probs);
  if (!std::isfinite(loss)) throw NumericalError("loss_and_grad: non-finite loss");
  const double* x = s.features.data();
  // dloss/dlogit_k = p_k - [k == y]
  auto dlogit = [&](std::size_t k) { return ws.probs[k] - (k == s.label ? 1.0 : 0.0); };

  if (spec.kind == ModelKind::kLinear) {
    double* gW = grad.data();
    double* gb = gW + L * d;
    for (std::size_t k = 0; k < L; ++k) {
      const double g = scale * dlogit(k);
      for (std::size_t j = 0; j < d; ++j) gW[k * d + j] += g * x[j];
      gb[k] += g;
    }
    return loss;
  }
  const std::size_t h = spec.hidden;
  const double* W2 = theta.data() + h * d + h;
  double* gW1 = grad.data();
  double* gb1 = gW1 + h * d;
  double* gW2 = gb1 + h;
  double* gb2 = gW2 + L * h;
  ws.dhidden.assign(h, 0.0);
  for (std::size_t k = 0; k < L; ++k) {
    const double g = dlogit(k);
    for (std::size_t u = 0; u < h; ++u) {
      gW2[k * h + u] += scale * g * ws.hidden_act[u];
      ws.dhidden[u] += g * W2[k * h + u];
    }
    gb2[k] += scale * g;
  }
  for (std::size_t u = 0; u < h; ++u) {
    if (ws.hidden_pre[u] <= 0.0) continue;  // ReLU subgradient 0 at the kink
    const double g = scale * ws.dhidden[u];
    for (std::size_t j = 0; j < d; ++j) gW1[u * d + j] += g * x[j];
    gb1[u] += g;
  }
  return loss;
}

}  // namespace detail

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

// Cross-entropy loss of one sample and its gradient. A descent step is
// params - eta * grad.
inline LossGrad loss_and_grad(const ParamVector& params, const Sample& sample) {
  detail::check_sample(params.shape, sample);
  detail::require(params.values.size() == param_count(params.shape), "loss_and_grad: parameter length mismatch");
  LossGrad out{0.0, ParamVector::zeros(params.shape)};
  detail::Workspace ws;
  out.loss = detail::accumulate_loss_grad(params.shape, params.values, sample, out.grad.values, 1.0, ws);
  return out;
}

// Sum of scale * grad over an index subset of samples, added into acc.
// Returns the summed loss. Order follows `indices` exactly.
template <typename Indices>
double accumulate_gradients(const ParamVector& params, const std::vector<Sample>& samples, const Indices& indices,
                            double scale, ParamVector& acc) {
  detail::Workspace ws;
  double total = 0.0;
  for (std::size_t i : indices) {
    detail::check_sample(params.shape, samples[i]);
    total += detail::accumulate_loss_grad(params.shape, params.values, samples[i], acc.values, scale, ws);
  }
  return total;
}

inline std::size_t predict(const ParamVector& params, const Sample& sample) {
  detail::Workspace ws;
  detail::forward(params.shape, params.values, sample, ws);
  return static_cast<std::size_t>(std::max_element(ws.logits.begin(), ws.logits.end()) - ws.logits.begin());
}

struct EvalMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double mean_loss = 0.0;
};

// Macro-F1 over the classes that occur in either the labels or the
// predictions. Within that set a class with no true positives scores 0.
inline double macro_f1(const std::vector<std::size_t>& labels, const std::vector<std::size_t>& predictions,
                       std::size_t num_classes) {
  detail::require(labels.size() == predictions.size(), "macro_f1: size mismatch");
  std::vector<double> tp(num_classes, 0.0), fp(num_classes, 0.0), fn(num_classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == predictions[i]) {
      tp[labels[i]] += 1;
    } else {
      fp[predictions[i]] += 1;
      fn[labels[i]] += 1;
    }
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double denom = 2 * tp[k] + fp[k] + fn[k];
    if (denom == 0.0) continue;
    sum += 2 * tp[k] / denom;
    ++present;
  }
  return present ? sum / static_cast<double>(present) : 0.0;
}

inline EvalMetrics evaluate(const ParamVector& params, const Dataset& ds) {
  detail::require(!ds.empty(), "evaluate: dataset is empty");
  detail::Workspace ws;
  std::vector<std::size_t> labels, preds;
  labels.reserve(ds.size());
  preds.reserve(ds.size());
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (const auto& s : ds.samples) {
    detail::check_sample(params.shape, s);
    detail::forward(params.shape, params.values, s, ws);
    ws.probs.resize(params.shape.num_classes);
    loss_sum += detail::softmax_xent(ws.logits, s.label, ws.probs);
    const auto pred = static_cast<std::size_t>(std::max_element(ws.logits.begin(), ws.logits.end()) - ws.logits.begin());
    correct += pred == s.label;
    labels.push_back(s.label);
    preds.push_back(pred);
  }
  const double n = static_cast<double>(ds.size());
  return {static_cast<double>(correct) / n, macro_f1(labels, preds, params.shape.num_classes), loss_sum / n};
}

// Checkpoint: little-endian, 56-byte header then the raw values.
//   char[4] "FSPV" | u32 version=1 | u32 kind (0 linear, 1 mlp) | u32 reserved
//   u64 input_dim | u64 num_classes | u64 hidden | u64 round | u64 count
//   f64[count] values (IEEE-754 binary64)
namespace detail {

template <typename T>
void put_le(std::ostream& out, T v) {
  static_assert(std::is_integral_v<T> || std::is_same_v<T, double>);
  std::uint64_t bits = 0;
  if constexpr (std::is_same_v<T, double>) {
    bits = std::bit_cast<std::uint64_t>(v);
  } else {
    bits = static_cast<std::uint64_t>(v);
  }
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw IoError("checkpoint: truncated file");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<double>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace detail

struct Checkpoint {
  ParamVector params;
  std::uint64_t round = 0;
};

inline void write_checkpoint(const std::string& path, const ParamVector& params, std::uint64_t round = 0) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write("FSPV", 4);
  detail::put_le<std::uint32_t>(out, 1);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.shape.kind));
  detail::put_le<std::uint32_t>(out, 0);
  detail::put_le<std::uint64_t>(out, params.shape.input_dim);
  detail::put_le<std::uint64_t>(out, params.shape.num_classes);
  detail::put_le<std::uint64_t>(out, params.shape.hidden);
  detail::put_le<std::uint64_t>(out, round);
  detail::put_le<std::uint64_t>(out, params.values.size());
  for (double v : params.values) detail::put_le<double>(out, v);
  if (!out) throw IoError("write failed: " + path);
}

inline Checkpoint read_checkpoint(const std::string& path, double init_scale = 1.0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "FSPV", 4) != 0) throw IoError("checkpoint: bad magic");
  if (detail::get_le<std::uint32_t>(in) != 1) throw IoError("checkpoint: unsupported version");
  const auto kind = detail::get_le<std::uint32_t>(in);
  if (kind > 1) throw IoError("checkpoint: unknown model kind");
  detail::get_le<std::uint32_t>(in);
  Checkpoint ck;
  ck.params.shape.kind = static_cast<ModelKind>(kind);
  ck.params.shape.input_dim = detail::get_le<std::uint64_t>(in);
  ck.params.shape.num_classes = detail::get_le<std::uint64_t>(in);
  ck.params.shape.hidden = detail::get_le<std::uint64_t>(in);
  ck.params.shape.init_scale = init_scale;
  ck.round = detail::get_le<std::uint64_t>(in);
  const auto count = detail::get_le<std::uint64_t>(in);
  ck.params.shape.validate();
  if (count != param_count(ck.params.shape)) throw IoError("checkpoint: value count does not match shape");
  ck.params.values.resize(count);
  for (auto& v : ck.params.values) v = detail::get_le<double>(in);
  return ck;
}

}  // namespace fedsampling
