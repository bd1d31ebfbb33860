// Copyright 2026 The fedsvd-sim Authors.
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

#ifndef FEDSVD_MODEL_HPP_
#define FEDSVD_MODEL_HPP_

// LoRA-adapted multinomial logistic classifier. With one layer the logits are
// z = (w0 + s * b * a) x; deeper stacks put tanh between layers. No biases.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsvd/linalg.hpp"
#include "fedsvd/lora.hpp"
#include "fedsvd/rng.hpp"

namespace fedsvd {

struct Example {
  Vector x;
  std::size_t y = 0;

  bool operator==(const Example&) const = default;
};

struct Classifier {
  std::vector<LoraLayer> layers;
  std::size_t class_count = 0;

  std::size_t input_dim() const { return layers.front().d_in(); }

  bool operator==(const Classifier&) const = default;
};

// Which adapter factors receive gradients. A layer with a_frozen set never
// trains a, whatever the mask says.
struct TrainableMask {
  bool a = false;
  bool b = true;
};

struct LayerGrad {
  Matrix a;
  Matrix b;
};

// One entry per layer.
using ModelGrad = std::vector<LayerGrad>;

inline void validate(const Classifier& model) {
  if (model.layers.empty()) {
    throw std::invalid_argument("classifier: needs at least one layer");
  }
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LoraLayer& layer = model.layers[l];
    if (layer.a.rows() != layer.rank || layer.a.cols() != layer.d_in() ||
        layer.b.rows() != layer.d_out() || layer.b.cols() != layer.rank) {
      throw std::invalid_argument("classifier: layer " + std::to_string(l) +
                                  " adapter shapes do not match w0 " +
                                  shape_str(layer.w0));
    }
    if (l + 1 < model.layers.size() &&
        model.layers[l + 1].d_in() != layer.d_out()) {
      throw std::invalid_argument("classifier: layer " + std::to_string(l) +
                                  " output does not feed layer " +
                                  std::to_string(l + 1));
    }
  }
  if (model.layers.back().d_out() != model.class_count) {
    throw std::invalid_argument("classifier: final layer width " +
                                std::to_string(model.layers.back().d_out()) +
                                " != class count " +
                                std::to_string(model.class_count));
  }
}

inline Vector softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

// -log softmax(logits)[y]
inline double loss(std::span<const double> logits, std::size_t y) {
  if (y >= logits.size()) {
    throw std::invalid_argument("loss: label " + std::to_string(y) +
                                " out of range for " +
                                std::to_string(logits.size()) + " classes");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - mx);
  return mx + std::log(total) - logits[y];
}

namespace detail {

// Activations recorded during a forward pass.
struct ForwardTrace {
  std::vector<Vector> inputs;   // input to layer l
  std::vector<Vector> projected;  // a_l * inputs[l]
  Vector logits;
};

inline Vector layer_apply(const LoraLayer& layer, std::span<const double> h,
                          Vector* projected) {
  Vector out = matvec(layer.w0, h);
  Vector ah = matvec(layer.a, h);
  const Vector bah = matvec(layer.b, ah);
  const double s = layer.scale();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * bah[i];
  if (projected != nullptr) *projected = std::move(ah);
  return out;
}

inline ForwardTrace trace_forward(const Classifier& model,
                                  std::span<const double> x) {
  if (x.size() != model.input_dim()) {
    throw std::invalid_argument("forward: input has " +
                                std::to_string(x.size()) +
                                " features, model expects " +
                                std::to_string(model.input_dim()));
  }
  const std::size_t depth = model.layers.size();
  ForwardTrace t;
  t.inputs.resize(depth);
  t.projected.resize(depth);
  Vector h(x.begin(), x.end());
  for (std::size_t l = 0; l < depth; ++l) {
    t.inputs[l] = h;
    h = layer_apply(model.layers[l], h, &t.projected[l]);
    if (l + 1 < depth)
      for (double& v : h) v = std::tanh(v);
  }
  t.logits = std::move(h);
  return t;
}

// dL/d(pre-activation) of every layer, given dL/dz at the output.
inline std::vector<Vector> backprop_deltas(const Classifier& model,
                                           const ForwardTrace& t,
                                           Vector output_delta) {
  const std::size_t depth = model.layers.size();
  std::vector<Vector> deltas(depth);
  deltas[depth - 1] = std::move(output_delta);
  for (std::size_t l = depth - 1; l > 0; --l) {
    const LoraLayer& layer = model.layers[l];
    const Vector& d = deltas[l];
    Vector dh = matvec_t(layer.w0, d);
    const Vector btd = matvec_t(layer.b, d);
    const Vector atbtd = matvec_t(layer.a, btd);
    const double s = layer.scale();
    const Vector& h = t.inputs[l];
    for (std::size_t i = 0; i < dh.size(); ++i)
      dh[i] = (dh[i] + s * atbtd[i]) * (1.0 - h[i] * h[i]);
    deltas[l - 1] = std::move(dh);
  }
  return deltas;
}

inline Vector output_error(std::span<const double> logits, std::size_t y) {
  Vector d = softmax(logits);
  d[y] -= 1.0;
  return d;
}

}  // namespace detail

inline Vector forward(const Classifier& model, std::span<const double> x) {
  return detail::trace_forward(model, x).logits;
}

// Gradient of the loss of one example w.r.t. every adapter factor. Frozen
// factors get exact zeros of the right shape.
inline ModelGrad example_grad(const Classifier& model, const Example& ex,
                              TrainableMask mask) {
  if (ex.y >= model.class_count) {
    throw std::invalid_argument("per_sample_grads: label " +
                                std::to_string(ex.y) + " out of range");
  }
  const detail::ForwardTrace t = detail::trace_forward(model, ex.x);
  const std::vector<Vector> deltas =
      detail::backprop_deltas(model, t, detail::output_error(t.logits, ex.y));
  ModelGrad g(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LoraLayer& layer = model.layers[l];
    const double s = layer.scale();
    if (mask.b) {
      g[l].b = outer(deltas[l], t.projected[l]);
      g[l].b *= s;
    } else {
      g[l].b = Matrix(layer.b.rows(), layer.b.cols());
    }
    if (mask.a && !layer.a_frozen) {
      Vector btd = matvec_t(layer.b, deltas[l]);
      for (double& v : btd) v *= s;
      g[l].a = outer(btd, t.inputs[l]);
    } else {
      g[l].a = Matrix(layer.a.rows(), layer.a.cols());
    }
  }
  return g;
}

inline std::vector<ModelGrad> per_sample_grads(const Classifier& model,
                                               std::span<const Example> batch,
                                               TrainableMask mask) {
  if (batch.empty()) {
    throw std::invalid_argument("per_sample_grads: empty batch");
  }
  std::vector<ModelGrad> out;
  out.reserve(batch.size());
  for (const Example& ex : batch) out.push_back(example_grad(model, ex, mask));
  return out;
}

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

// Accuracy uses argmax with ties going to the lowest class index.
inline EvalResult evaluate(const Classifier& model,
                           std::span<const Example> data) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty data");
  std::vector<Matrix> weights;
  weights.reserve(model.layers.size());
  for (const LoraLayer& layer : model.layers)
    weights.push_back(effective_weight(layer));
  std::size_t correct = 0;
  double total_loss = 0.0;
  for (const Example& ex : data) {
    Vector h = ex.x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      h = matvec(weights[l], h);
      if (l + 1 < weights.size())
        for (double& v : h) v = std::tanh(v);
    }
    if (argmax(h) == ex.y) ++correct;
    total_loss += loss(h, ex.y);
  }
  const double n = static_cast<double>(data.size());
  return {static_cast<double>(correct) / n, total_loss / n};
}

// Layer widths from input to classes, e.g. {64, 32, 3}.
struct Architecture {
  std::vector<std::size_t> widths;
  std::size_t rank = 8;
  double alpha = 8.0;
};

// Adapter rank of a layer: the requested rank capped at min(d_out, d_in). The
// scale alpha / rank is kept fixed when the cap applies.
inline std::size_t layer_rank(std::size_t requested, std::size_t d_out,
                              std::size_t d_in) {
  return std::min({requested, d_out, d_in});
}

// Kaiming-uniform backbone, Kaiming-uniform a, zero b.
inline Classifier make_classifier(const Architecture& arch, Rng& rng) {
  if (arch.widths.size() < 2) {
    throw std::invalid_argument("make_classifier: needs input and output widths");
  }
  if (arch.rank == 0) {
    throw std::invalid_argument("make_classifier: rank must be >= 1");
  }
  Classifier model;
  model.class_count = arch.widths.back();
  for (std::size_t l = 0; l + 1 < arch.widths.size(); ++l) {
    const std::size_t d_in = arch.widths[l];
    const std::size_t d_out = arch.widths[l + 1];
    LoraLayer layer;
    layer.w0 = kaiming_uniform(d_out, d_in, d_in, rng);
    layer.rank = layer_rank(arch.rank, d_out, d_in);
    layer.alpha = arch.alpha * static_cast<double>(layer.rank) /
                  static_cast<double>(arch.rank);
    AdapterPair p = init_adapter(d_out, d_in, layer.rank, rng);
    layer.a = std::move(p.a);
    layer.b = std::move(p.b);
    model.layers.push_back(std::move(layer));
  }
  validate(model);
  return model;
}

// Full-batch gradient descent on the backbone weights (adapters untouched and
// assumed zero). Used to stand in for a pre-trained, then frozen, model.
inline void pretrain_backbone(Classifier& model, std::span<const Example> data,
                              int steps, double lr) {
  if (data.empty()) throw std::invalid_argument("pretrain_backbone: no data");
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (int step = 0; step < steps; ++step) {
    std::vector<Matrix> grads;
    for (const LoraLayer& layer : model.layers)
      grads.emplace_back(layer.d_out(), layer.d_in());
    for (const Example& ex : data) {
      const detail::ForwardTrace t = detail::trace_forward(model, ex.x);
      const std::vector<Vector> deltas = detail::backprop_deltas(
          model, t, detail::output_error(t.logits, ex.y));
      for (std::size_t l = 0; l < grads.size(); ++l) {
        const Vector& d = deltas[l];
        const Vector& h = t.inputs[l];
        for (std::size_t i = 0; i < d.size(); ++i) {
          auto row = grads[l].row(i);
          const double di = d[i] * inv_n;
          for (std::size_t j = 0; j < h.size(); ++j) row[j] += di * h[j];
        }
      }
    }
    for (std::size_t l = 0; l < grads.size(); ++l)
      axpy(-lr, grads[l], model.layers[l].w0);
  }
}

}  // namespace fedsvd

#endif  // FEDSVD_MODEL_HPP_
