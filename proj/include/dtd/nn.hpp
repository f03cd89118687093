// Copyright 2026 The dtdtrack Authors.
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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "dtd/core.hpp"

namespace dtd::nn {

// ---------------------------------------------------------------------------
// Tensor — (channels, height, width), row-major. Flat vectors use (n, 1, 1).
// ---------------------------------------------------------------------------

struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {
    if (c <= 0 || h <= 0 || w <= 0) throw ShapeMismatchError("Tensor: non-positive dimensions");
  }

  static Tensor flat(const std::vector<double>& values) {
    Tensor t(static_cast<int>(values.size()), 1, 1);
    t.data = values;
    return t;
  }

  int size() const { return channels * height * width; }

  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

// ---------------------------------------------------------------------------
// Layer specifications
// ---------------------------------------------------------------------------

struct ConvSpec {
  int out_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  int stride = 1;
};
struct ReluSpec {};
struct PoolSpec {
  int size = 2;
  int stride = 2;
};
struct FcSpec {
  int out_units = 0;
};

using LayerSpec = std::variant<ConvSpec, ReluSpec, PoolSpec, FcSpec>;

struct NetworkSpec {
  std::string name;
  int input_h = 0;
  int input_w = 0;  // input is a single-channel patch
  std::vector<LayerSpec> layers;
  int output_dim = 0;
};

struct LayerShape {
  int c = 0, h = 0, w = 0;
};

// Output shape of every layer, validating that kernels fit. Throws
// ShapeMismatchError when any intermediate dimension collapses below 1.
inline std::vector<LayerShape> derive_shapes(const NetworkSpec& spec) {
  std::vector<LayerShape> shapes;
  LayerShape cur{1, spec.input_h, spec.input_w};
  if (cur.h <= 0 || cur.w <= 0) throw ShapeMismatchError(spec.name + ": bad input size");
  for (const LayerSpec& layer : spec.layers) {
    if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
      if (conv->stride < 1 || conv->kernel_h > cur.h || conv->kernel_w > cur.w) {
        throw ShapeMismatchError(spec.name + ": conv kernel does not fit");
      }
      cur = {conv->out_channels, (cur.h - conv->kernel_h) / conv->stride + 1,
             (cur.w - conv->kernel_w) / conv->stride + 1};
    } else if (std::get_if<ReluSpec>(&layer)) {
      // shape unchanged
    } else if (const auto* pool = std::get_if<PoolSpec>(&layer)) {
      if (pool->stride < 1 || pool->size > cur.h || pool->size > cur.w) {
        throw ShapeMismatchError(spec.name + ": pool window does not fit");
      }
      cur = {cur.c, (cur.h - pool->size) / pool->stride + 1, (cur.w - pool->size) / pool->stride + 1};
    } else if (const auto* fc = std::get_if<FcSpec>(&layer)) {
      if (fc->out_units < 1) throw ShapeMismatchError(spec.name + ": fc with no outputs");
      cur = {fc->out_units, 1, 1};
    }
    if (cur.c < 1 || cur.h < 1 || cur.w < 1) {
      throw ShapeMismatchError(spec.name + ": layer output collapsed below 1x1");
    }
    shapes.push_back(cur);
  }
  if (shapes.empty() || shapes.back().c * shapes.back().h * shapes.back().w != spec.output_dim) {
    throw ShapeMismatchError(spec.name + ": output_dim does not match final layer");
  }
  return shapes;
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

// Conv layers: w holds (out, in, kh, kw) kernels, b holds per-output biases.
// FC layers: w is the (out x in) matrix row-major, b the bias vector.
// ReLU/pool layers carry empty entries to keep indices aligned with the spec.
struct LayerWeights {
  std::vector<double> w;
  std::vector<double> b;
};

struct NetworkWeights {
  std::vector<LayerWeights> layers;
};

inline NetworkWeights zero_weights_like(const NetworkSpec& spec) {
  const std::vector<LayerShape> shapes = derive_shapes(spec);
  NetworkWeights out;
  LayerShape in{1, spec.input_h, spec.input_w};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    LayerWeights lw;
    if (const auto* conv = std::get_if<ConvSpec>(&spec.layers[i])) {
      lw.w.assign(static_cast<std::size_t>(conv->out_channels) * in.c * conv->kernel_h * conv->kernel_w, 0.0);
      lw.b.assign(static_cast<std::size_t>(conv->out_channels), 0.0);
    } else if (const auto* fc = std::get_if<FcSpec>(&spec.layers[i])) {
      const int in_units = in.c * in.h * in.w;
      lw.w.assign(static_cast<std::size_t>(fc->out_units) * in_units, 0.0);
      lw.b.assign(static_cast<std::size_t>(fc->out_units), 0.0);
    }
    out.layers.push_back(std::move(lw));
    in = shapes[i];
  }
  return out;
}

// Xavier-uniform initialization, deterministic in the seed.
inline NetworkWeights init_weights(const NetworkSpec& spec, std::uint64_t seed) {
  NetworkWeights out = zero_weights_like(spec);
  std::mt19937_64 rng(seed);
  const std::vector<LayerShape> shapes = derive_shapes(spec);
  LayerShape in{1, spec.input_h, spec.input_w};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    LayerWeights& lw = out.layers[i];
    if (!lw.w.empty()) {
      int fan_in = 0, fan_out = 0;
      if (const auto* conv = std::get_if<ConvSpec>(&spec.layers[i])) {
        fan_in = in.c * conv->kernel_h * conv->kernel_w;
        fan_out = conv->out_channels * conv->kernel_h * conv->kernel_w;
      } else {
        fan_in = in.c * in.h * in.w;
        fan_out = shapes[i].c;
      }
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (double& v : lw.w) v = dist(rng);
    }
    in = shapes[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward kernels
// ---------------------------------------------------------------------------

// Valid (no padding) cross-correlation.
inline Tensor conv_forward(const Tensor& input, const std::vector<double>& kernels,
                           const std::vector<double>& bias, int out_channels, int kernel_h,
                           int kernel_w, int stride) {
  if (stride < 1 || kernel_h > input.height || kernel_w > input.width) {
    throw ShapeMismatchError("conv_forward: kernel does not fit input");
  }
  if (kernels.size() != static_cast<std::size_t>(out_channels) * input.channels * kernel_h * kernel_w ||
      bias.size() != static_cast<std::size_t>(out_channels)) {
    throw ShapeMismatchError("conv_forward: weight sizes inconsistent");
  }
  const int oh = (input.height - kernel_h) / stride + 1;
  const int ow = (input.width - kernel_w) / stride + 1;
  Tensor out(out_channels, oh, ow);
  const int in_c = input.channels;
  for (int o = 0; o < out_channels; ++o) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double acc = bias[static_cast<std::size_t>(o)];
        for (int c = 0; c < in_c; ++c) {
          const std::size_t kbase = ((static_cast<std::size_t>(o) * in_c + c) * kernel_h) * kernel_w;
          for (int u = 0; u < kernel_h; ++u) {
            const double* in_row = &input.data[(static_cast<std::size_t>(c) * input.height + (i * stride + u)) * input.width + j * stride];
            const double* k_row = &kernels[kbase + static_cast<std::size_t>(u) * kernel_w];
            for (int v = 0; v < kernel_w; ++v) acc += k_row[v] * in_row[v];
          }
        }
        out.at(o, i, j) = acc;
      }
    }
  }
  return out;
}

inline Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.data) v = std::max(v, 0.0);
  return out;
}

// Per-channel window max; argmax (flat input index per output element) is
// recorded for backprop routing. Ties resolve to the first element in scan
// order, keeping training deterministic.
inline Tensor maxpool_forward(const Tensor& input, int size, int stride,
                              std::vector<int>* argmax = nullptr) {
  if (stride < 1 || size > input.height || size > input.width) {
    throw ShapeMismatchError("maxpool_forward: window does not fit input");
  }
  const int oh = (input.height - size) / stride + 1;
  const int ow = (input.width - size) / stride + 1;
  Tensor out(input.channels, oh, ow);
  if (argmax) argmax->assign(static_cast<std::size_t>(out.size()), 0);
  std::size_t oi = 0;
  for (int c = 0; c < input.channels; ++c) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j, ++oi) {
        double best = -std::numeric_limits<double>::infinity();
        int best_idx = 0;
        for (int u = 0; u < size; ++u) {
          for (int v = 0; v < size; ++v) {
            const int y = i * stride + u;
            const int x = j * stride + v;
            const int idx = (c * input.height + y) * input.width + x;
            const double val = input.data[static_cast<std::size_t>(idx)];
            if (val > best) {
              best = val;
              best_idx = idx;
            }
          }
        }
        out.data[oi] = best;
        if (argmax) (*argmax)[oi] = best_idx;
      }
    }
  }
  return out;
}

inline Tensor fc_forward(const Tensor& input, const std::vector<double>& matrix,
                         const std::vector<double>& bias) {
  const int in_units = input.size();
  const int out_units = static_cast<int>(bias.size());
  if (matrix.size() != static_cast<std::size_t>(out_units) * in_units) {
    throw ShapeMismatchError("fc_forward: matrix size inconsistent with input/bias");
  }
  Tensor out(out_units, 1, 1);
  for (int o = 0; o < out_units; ++o) {
    const double* row = &matrix[static_cast<std::size_t>(o) * in_units];
    double acc = bias[static_cast<std::size_t>(o)];
    for (int i = 0; i < in_units; ++i) acc += row[i] * input.data[static_cast<std::size_t>(i)];
    out.data[static_cast<std::size_t>(o)] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Network forward / backward
// ---------------------------------------------------------------------------

struct ForwardCache {
  std::vector<Tensor> activations;           // activations[0] = input, one per layer after
  std::vector<std::vector<int>> pool_argmax;  // aligned with layers; empty for non-pool
};

inline Tensor net_forward(const NetworkSpec& spec, const NetworkWeights& weights, const Tensor& input,
                          ForwardCache* cache = nullptr) {
  if (input.channels != 1 || input.height != spec.input_h || input.width != spec.input_w) {
    throw ShapeMismatchError(spec.name + ": input shape mismatch");
  }
  if (weights.layers.size() != spec.layers.size()) {
    throw ShapeMismatchError(spec.name + ": weight layer count mismatch");
  }
  if (cache) {
    cache->activations.clear();
    cache->pool_argmax.assign(spec.layers.size(), {});
    cache->activations.push_back(input);
  }
  Tensor cur = input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerWeights& lw = weights.layers[i];
    if (const auto* conv = std::get_if<ConvSpec>(&spec.layers[i])) {
      cur = conv_forward(cur, lw.w, lw.b, conv->out_channels, conv->kernel_h, conv->kernel_w, conv->stride);
    } else if (std::get_if<ReluSpec>(&spec.layers[i])) {
      cur = relu(cur);
    } else if (const auto* pool = std::get_if<PoolSpec>(&spec.layers[i])) {
      cur = maxpool_forward(cur, pool->size, pool->stride, cache ? &cache->pool_argmax[i] : nullptr);
    } else if (std::get_if<FcSpec>(&spec.layers[i])) {
      cur = fc_forward(cur, lw.w, lw.b);
    }
    if (cache) cache->activations.push_back(cur);
  }
  if (cur.size() != spec.output_dim) throw ShapeMismatchError(spec.name + ": unexpected output size");
  return cur;
}

inline double mse_loss(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size()) throw ShapeMismatchError("mse_loss: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

// Reverse-mode gradients for every parameter given dLoss/dOutput. Returns
// gradient buffers with the same layout as NetworkWeights.
inline NetworkWeights net_backward(const NetworkSpec& spec, const NetworkWeights& weights,
                                   const ForwardCache& cache, const std::vector<double>& dloss_dout) {
  NetworkWeights grads = zero_weights_like(spec);
  Tensor delta = cache.activations.back();
  if (dloss_dout.size() != delta.data.size()) throw ShapeMismatchError("net_backward: output grad size");
  delta.data = dloss_dout;

  for (int li = static_cast<int>(spec.layers.size()) - 1; li >= 0; --li) {
    const Tensor& in = cache.activations[static_cast<std::size_t>(li)];
    const LayerWeights& lw = weights.layers[static_cast<std::size_t>(li)];
    LayerWeights& gw = grads.layers[static_cast<std::size_t>(li)];

    if (const auto* conv = std::get_if<ConvSpec>(&spec.layers[static_cast<std::size_t>(li)])) {
      Tensor din(in.channels, in.height, in.width);
      const int s = conv->stride;
      const int kh = conv->kernel_h;
      const int kw = conv->kernel_w;
      for (int o = 0; o < delta.channels; ++o) {
        for (int i = 0; i < delta.height; ++i) {
          for (int j = 0; j < delta.width; ++j) {
            const double g = delta.at(o, i, j);
            gw.b[static_cast<std::size_t>(o)] += g;
            for (int c = 0; c < in.channels; ++c) {
              const std::size_t kbase = ((static_cast<std::size_t>(o) * in.channels + c) * kh) * kw;
              for (int u = 0; u < kh; ++u) {
                const std::size_t in_base = (static_cast<std::size_t>(c) * in.height + (i * s + u)) * in.width + j * s;
                for (int v = 0; v < kw; ++v) {
                  gw.w[kbase + static_cast<std::size_t>(u) * kw + v] += g * in.data[in_base + static_cast<std::size_t>(v)];
                  din.data[in_base + static_cast<std::size_t>(v)] += g * lw.w[kbase + static_cast<std::size_t>(u) * kw + v];
                }
              }
            }
          }
        }
      }
      delta = std::move(din);
    } else if (std::get_if<ReluSpec>(&spec.layers[static_cast<std::size_t>(li)])) {
      Tensor din = delta;
      for (std::size_t i = 0; i < din.data.size(); ++i) {
        if (in.data[i] <= 0.0) din.data[i] = 0.0;
      }
      din.channels = in.channels;
      din.height = in.height;
      din.width = in.width;
      delta = std::move(din);
    } else if (std::get_if<PoolSpec>(&spec.layers[static_cast<std::size_t>(li)])) {
      Tensor din(in.channels, in.height, in.width);
      const std::vector<int>& argmax = cache.pool_argmax[static_cast<std::size_t>(li)];
      for (std::size_t i = 0; i < delta.data.size(); ++i) {
        din.data[static_cast<std::size_t>(argmax[i])] += delta.data[i];
      }
      delta = std::move(din);
    } else if (std::get_if<FcSpec>(&spec.layers[static_cast<std::size_t>(li)])) {
      const int in_units = in.size();
      const int out_units = delta.size();
      Tensor din(in.channels, in.height, in.width);
      for (int o = 0; o < out_units; ++o) {
        const double g = delta.data[static_cast<std::size_t>(o)];
        gw.b[static_cast<std::size_t>(o)] += g;
        const double* wrow = &lw.w[static_cast<std::size_t>(o) * in_units];
        double* grow = &gw.w[static_cast<std::size_t>(o) * in_units];
        for (int i = 0; i < in_units; ++i) {
          grow[i] += g * in.data[static_cast<std::size_t>(i)];
          din.data[static_cast<std::size_t>(i)] += g * wrow[i];
        }
      }
      delta = std::move(din);
    }
  }
  return grads;
}

// Forward + MSE + backward in one call; the convenience entry point for the
// trainer and the finite-difference tests.
inline NetworkWeights backward(const NetworkSpec& spec, const NetworkWeights& weights, const Tensor& patch,
                               const std::vector<double>& target, double* loss_out = nullptr) {
  ForwardCache cache;
  const Tensor pred = net_forward(spec, weights, patch, &cache);
  if (loss_out) *loss_out = mse_loss(pred.data, target);
  std::vector<double> dout(pred.data.size());
  const double inv_n = 1.0 / static_cast<double>(pred.data.size());
  for (std::size_t i = 0; i < dout.size(); ++i) dout[i] = 2.0 * (pred.data[i] - target[i]) * inv_n;
  return net_backward(spec, weights, cache, dout);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainSample {
  Tensor input;
  std::vector<double> target;
};

struct SgdHyper {
  int batch_size = 16;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 10;
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean sample loss per epoch
};

// Mini-batch SGD with classical momentum. Fully deterministic in the seed:
// the shuffle order and every update depend only on (dataset, hyper, seed).
inline TrainReport sgd_train(const NetworkSpec& spec, NetworkWeights& weights,
                             const std::vector<TrainSample>& dataset, const SgdHyper& hyper) {
  if (dataset.empty()) throw EmptyDatasetError("sgd_train: empty dataset");
  if (hyper.batch_size < 1 || hyper.epochs < 0 || hyper.learning_rate < 0.0 || hyper.momentum < 0.0) {
    throw ContractError("sgd_train: hyperparameters must be non-negative (batch_size >= 1)");
  }
  NetworkWeights velocity = zero_weights_like(spec);
  std::mt19937_64 rng(hyper.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainReport report;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t batch_end = std::min(order.size(), pos + static_cast<std::size_t>(hyper.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(batch_end - pos);
      NetworkWeights grad_sum = zero_weights_like(spec);
      for (std::size_t k = pos; k < batch_end; ++k) {
        const TrainSample& sample = dataset[order[k]];
        double loss = 0.0;
        NetworkWeights g = backward(spec, weights, sample.input, sample.target, &loss);
        epoch_loss += loss;
        for (std::size_t li = 0; li < g.layers.size(); ++li) {
          for (std::size_t i = 0; i < g.layers[li].w.size(); ++i) grad_sum.layers[li].w[i] += g.layers[li].w[i];
          for (std::size_t i = 0; i < g.layers[li].b.size(); ++i) grad_sum.layers[li].b[i] += g.layers[li].b[i];
        }
      }
      for (std::size_t li = 0; li < weights.layers.size(); ++li) {
        LayerWeights& v = velocity.layers[li];
        LayerWeights& w = weights.layers[li];
        const LayerWeights& gs = grad_sum.layers[li];
        for (std::size_t i = 0; i < w.w.size(); ++i) {
          v.w[i] = hyper.momentum * v.w[i] + gs.w[i] * inv_batch;
          w.w[i] -= hyper.learning_rate * v.w[i];
        }
        for (std::size_t i = 0; i < w.b.size(); ++i) {
          v.b[i] = hyper.momentum * v.b[i] + gs.b[i] * inv_batch;
          w.b[i] -= hyper.learning_rate * v.b[i];
        }
      }
      pos = batch_end;
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(dataset.size()));
  }
  return report;
}

}  // namespace dtd::nn
